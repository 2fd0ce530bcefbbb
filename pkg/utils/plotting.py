"""
Learning-curve plots.

One SVG per demo regime showing mean success over seeds with a min/max
band for every reward formulation, plus one multi-panel figure when
several regimes are present. Output bytes are reproducible.
"""
import logging
from pathlib import Path
from typing import List, Union

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import pandas as pd  # noqa: E402

logger = logging.getLogger(__name__)

FORMULATION_ORDER = ["dense_only", "sparse_only", "combined"]
DEFAULT_REGIME = "standard"


def _svg_params() -> dict:
    return {"svg.hashsalt": "wayshape", "svg.fonttype": "none"}


def _ordered(values) -> List[str]:
    known = [f for f in FORMULATION_ORDER if f in set(values)]
    return known + sorted(v for v in set(values) if v not in FORMULATION_ORDER)


def _draw_panel(ax, frame: pd.DataFrame, title: str) -> None:
    for formulation in _ordered(frame["formulation"]):
        data = frame[frame["formulation"] == formulation]
        stats = data.groupby("step")["success_rate"].agg(["mean", "min", "max"]).sort_index()
        steps = stats.index.to_numpy()
        ax.plot(steps, stats["mean"].to_numpy(), label=formulation)
        ax.fill_between(steps, stats["min"].to_numpy(), stats["max"].to_numpy(), alpha=0.2)
    ax.set_title(title)
    ax.set_xlabel("online environment steps")
    ax.set_ylabel("forward success rate")
    ax.set_ylim(-0.02, 1.02)
    ax.legend(loc="lower right")


def emit_plots(curves: pd.DataFrame, out_dir: Union[str, Path]) -> List[Path]:
    """
    Write the curve plots for a curves table.

    Args:
        curves: rows of (step, seed, formulation, success_rate, mean_reward[, regime])
        out_dir: destination directory

    Returns:
        written SVG paths, per-regime files first
    """
    if curves is None or len(curves) == 0:
        raise ValueError("no learning curves to plot")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    frame = curves.copy()
    if "regime" not in frame.columns:
        frame["regime"] = DEFAULT_REGIME
    regimes = list(dict.fromkeys(frame["regime"]))

    written: List[Path] = []
    with plt.rc_context(_svg_params()):
        for regime in regimes:
            fig, ax = plt.subplots(figsize=(6, 4))
            _draw_panel(ax, frame[frame["regime"] == regime], f"demo regime: {regime}")
            fig.tight_layout()
            path = out_dir / f"curves_{regime}.svg"
            fig.savefig(path, format="svg", metadata={"Date": None})
            plt.close(fig)
            written.append(path)

        if len(regimes) > 1:
            fig, axes = plt.subplots(1, len(regimes), figsize=(5 * len(regimes), 4), sharey=True)
            for ax, regime in zip(axes, regimes):
                _draw_panel(ax, frame[frame["regime"] == regime], f"demo regime: {regime}")
            fig.tight_layout()
            path = out_dir / "ablation.svg"
            fig.savefig(path, format="svg", metadata={"Date": None})
            plt.close(fig)
            written.append(path)

    logger.info(f"Wrote {len(written)} plot(s) to {out_dir}")
    return written
