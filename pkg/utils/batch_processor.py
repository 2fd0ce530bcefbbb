"""
Batch processing for wayshape experiment suites.

Runs independent jobs (one experiment run per job) across worker
processes and returns results in submission order, so merged tables do
not depend on completion order.
"""
import logging
from concurrent.futures import ProcessPoolExecutor, as_completed
from datetime import datetime
from typing import Any, Callable, Dict, List, Optional, Sequence

from core.config import Config

logger = logging.getLogger(__name__)


class BatchJobError(RuntimeError):
    """Raised after a batch finishes when one or more jobs failed."""

    def __init__(self, errors: List[Dict[str, Any]]):
        self.errors = errors
        first = errors[0]
        super().__init__(f"{len(errors)} batch job(s) failed; first at index {first['index']}: {first['error']}")


class BatchProcessor:
    """Ordered map of a picklable function over job arguments."""

    def __init__(self, max_workers: Optional[int] = None):
        self.max_workers = max(1, max_workers if max_workers is not None else Config.MAX_WORKERS)

    def map(self, func: Callable[[Any], Any], items: Sequence[Any]) -> List[Any]:
        """
        Apply func to every item.

        With one worker everything runs in-process; otherwise jobs go to a
        process pool. Either way results[i] belongs to items[i].
        """
        started = datetime.now()
        results: List[Any] = [None] * len(items)
        errors: List[Dict[str, Any]] = []

        if self.max_workers == 1 or len(items) <= 1:
            for index, item in enumerate(items):
                try:
                    results[index] = func(item)
                except Exception as e:
                    logger.error(f"Batch job {index} failed: {e}")
                    errors.append({"index": index, "error": str(e), "exception": e})
        else:
            with ProcessPoolExecutor(max_workers=self.max_workers) as executor:
                future_to_index = {executor.submit(func, item): index for index, item in enumerate(items)}
                for future in as_completed(future_to_index):
                    index = future_to_index[future]
                    try:
                        results[index] = future.result()
                        logger.debug(f"Batch job {index + 1}/{len(items)} finished")
                    except Exception as e:
                        logger.error(f"Batch job {index} failed: {e}")
                        errors.append({"index": index, "error": str(e), "exception": e})

        elapsed = (datetime.now() - started).total_seconds()
        logger.info(f"Batch of {len(items)} jobs finished in {elapsed:.1f}s with {len(errors)} error(s)")
        if errors:
            errors.sort(key=lambda err: err["index"])
            raise BatchJobError(errors) from errors[0]["exception"]
        return results


batch_processor = BatchProcessor()
