"""
Data models for wayshape.

This module contains the Pydantic models for experiment configuration
and result tables, plus the loader for the flat `key = value`
experiment file format.
"""
import logging
from pathlib import Path
from typing import Any, Dict, List, Literal, Mapping, Optional, Union

import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .config import Config
from .geometry import GridSpec

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1
FORMULATIONS = ("dense_only", "sparse_only", "combined")
LIST_FIELDS = ("seeds", "demo_counts")


class ConfigError(ValueError):
    """Invalid experiment configuration; carries one message per offending field."""

    def __init__(self, messages: List[str]):
        self.messages = list(messages)
        super().__init__("invalid experiment config:\n  " + "\n  ".join(self.messages))


class ExperimentConfig(BaseModel):
    """One file fully determines an experiment."""
    model_config = ConfigDict(extra="forbid", frozen=True)

    schema_version: int = Field(..., description="Config format version, must be 1")
    name: str = Field("experiment", description="Experiment name used in artifact names", min_length=1)
    task: str = Field("bin_sort_left", description="Registered task pair")

    # Prompt grid
    image_width: int = Field(Config.IMAGE_WIDTH, gt=0)
    image_height: int = Field(Config.IMAGE_HEIGHT, gt=0)
    grid_cols: int = Field(Config.GRID_COLS, ge=2)
    grid_rows: int = Field(Config.GRID_ROWS, ge=2)
    height_levels: int = Field(Config.HEIGHT_LEVELS, ge=2)

    # Reward
    reward_lambda: float = Field(Config.REWARD_LAMBDA, gt=0, description="Transform slope")
    reward_phi: float = Field(Config.REWARD_PHI, ge=0, description="Transform shift in pixels")
    formulation: Literal["dense_only", "sparse_only", "combined"] = "combined"
    k_prompts: int = Field(Config.SPARSE_PROMPTS, ge=1)
    p_fp: float = Field(Config.SPARSE_FALSE_POSITIVE, ge=0, lt=1)
    p_fn: float = Field(Config.SPARSE_FALSE_NEGATIVE, ge=0, lt=1)
    object_reward: bool = Config.OBJECT_REWARD
    sparse_latch: bool = Config.SPARSE_LATCH

    # Demonstrations
    demo_regime: str = Field("standard", description="Named demo regime")
    demo_counts: Optional[List[int]] = Field(None, description="forward, backward, failure episode counts")

    # Protocol
    seeds: List[int] = Field(default_factory=lambda: list(Config.DEFAULT_SEEDS))
    online_steps: Optional[int] = Field(None, ge=0, description="Online budget of the standard regime; Config default when unset")
    offline_steps: int = Field(Config.OFFLINE_STEPS, ge=0)
    eval_interval: int = Field(Config.EVAL_INTERVAL, gt=0)
    eval_trials: int = Field(Config.EVAL_TRIALS, gt=0)
    include_bc: bool = False
    workers: int = Field(Config.MAX_WORKERS, ge=1)

    # Simulator and camera
    perturb_radius: float = Field(Config.PERTURB_RADIUS, ge=0)
    moka_perturb_radius: float = Field(Config.MOKA_PERTURB_RADIUS, ge=0)
    projection_noise: float = Field(Config.PROJECTION_NOISE, ge=0)
    calibration_pairs: int = Field(Config.CALIBRATION_PAIRS, ge=4)
    calibration_outliers: float = Field(Config.CALIBRATION_OUTLIERS, ge=0, lt=1)

    # Learner
    gamma: float = Field(Config.GAMMA, gt=0, lt=1)
    alpha: float = Field(Config.CONSERVATIVE_ALPHA, ge=0)
    bc_weight: float = Field(Config.BC_WEIGHT, ge=0)
    batch_size: int = Field(Config.BATCH_SIZE, gt=0)
    hidden_size: int = Field(Config.HIDDEN_SIZE, gt=0)
    offline_ratio: float = Field(Config.OFFLINE_RATIO, ge=0, le=1)
    buffer_capacity: int = Field(Config.BUFFER_CAPACITY, gt=0)

    # Waypoint provider
    provider: Literal["oracle", "file", "remote"] = "oracle"
    waypoint_path: Optional[str] = Field(None, description="Waypoint file; '{direction}' is substituted")
    oracle_z_low: int = Field(Config.ORACLE_Z_LOW, ge=0)
    oracle_z_lift: int = Field(Config.ORACLE_Z_LIFT, ge=0)
    vlm_base_url: str = Config.VLM_BASE_URL
    vlm_model: str = Config.VLM_MODEL
    vlm_api_key_env: str = Config.VLM_API_KEY_ENV
    vlm_retries: int = Field(Config.VLM_RETRIES, ge=0)
    provider_fallback: bool = Config.PROVIDER_FALLBACK

    out_dir: str = Field("runs/experiment", description="Output directory")

    @field_validator(*LIST_FIELDS, mode="before")
    @classmethod
    def split_list(cls, value: Any) -> Any:
        if isinstance(value, str):
            return [item.strip() for item in value.split(",") if item.strip()]
        return value

    @field_validator("schema_version")
    @classmethod
    def check_schema(cls, value: int) -> int:
        if value != SCHEMA_VERSION:
            raise ValueError(f"unsupported schema version {value}, expected {SCHEMA_VERSION}")
        return value

    @field_validator("seeds")
    @classmethod
    def check_seeds(cls, value: List[int]) -> List[int]:
        if not value:
            raise ValueError("at least one seed is required")
        if len(set(value)) != len(value):
            raise ValueError("seeds must be distinct")
        return value

    @field_validator("demo_counts")
    @classmethod
    def check_demo_counts(cls, value: Optional[List[int]]) -> Optional[List[int]]:
        if value is None:
            return value
        if len(value) != 3 or min(value) < 0:
            raise ValueError("demo_counts needs three non-negative integers: forward, backward, failure")
        if value[0] + value[1] == 0:
            raise ValueError("demo_counts needs at least one successful demonstration")
        return value

    @field_validator("demo_regime")
    @classmethod
    def check_regime(cls, value: str) -> str:
        if value not in Config.DEMO_REGIMES:
            raise ValueError(f"unknown demo regime '{value}', expected one of {sorted(Config.DEMO_REGIMES)}")
        return value

    @model_validator(mode="after")
    def check_consistency(self) -> "ExperimentConfig":
        if self.provider == "file" and not self.waypoint_path:
            raise ValueError("waypoint_path is required when provider = file")
        if self.oracle_z_low == self.oracle_z_lift:
            raise ValueError("oracle_z_low and oracle_z_lift must differ")
        for key in ("oracle_z_low", "oracle_z_lift"):
            if getattr(self, key) >= self.height_levels:
                raise ValueError(f"{key} must be below height_levels ({self.height_levels})")
        return self

    def grid(self) -> GridSpec:
        return GridSpec(self.image_width, self.image_height, self.grid_cols, self.grid_rows, self.height_levels)

    def counts(self) -> List[int]:
        """Demo counts: explicit list, else the regime's default."""
        return list(self.demo_counts) if self.demo_counts is not None else list(Config.DEMO_REGIMES[self.demo_regime])

    def budget(self) -> int:
        """
        Online step budget. The 5x regime runs longer, by the ratio of
        Config.ONLINE_STEPS_REDUCED to Config.ONLINE_STEPS.
        """
        base = Config.ONLINE_STEPS if self.online_steps is None else self.online_steps
        if self.demo_regime != "5x":
            return base
        return int(round(base * Config.ONLINE_STEPS_REDUCED / Config.ONLINE_STEPS))

    def waypoint_file(self, direction: str) -> Optional[Path]:
        if not self.waypoint_path:
            return None
        return Path(self.waypoint_path.replace("{direction}", direction))

    def with_overrides(self, **overrides: Any) -> "ExperimentConfig":
        """Validated copy with some fields replaced; None values are ignored."""
        data = self.model_dump()
        data.update({k: v for k, v in overrides.items() if v is not None})
        return validate_config(data)

    def to_text(self) -> str:
        """Serialise back into the flat key = value format."""
        lines = ["# wayshape experiment config"]
        for key, value in self.model_dump().items():
            if value is None:
                continue
            if isinstance(value, list):
                value = ", ".join(str(v) for v in value)
            elif isinstance(value, bool):
                value = str(value).lower()
            lines.append(f"{key} = {value}")
        return "\n".join(lines) + "\n"


def _field_messages(error: ValidationError) -> List[str]:
    messages = []
    for err in error.errors():
        field_name = ".".join(str(part) for part in err["loc"]) or "config"
        msg = err["msg"]
        if msg.startswith("Value error, "):
            msg = msg[len("Value error, "):]
        messages.append(f"{field_name}: {msg}")
    return messages


def validate_config(data: Mapping[str, Any]) -> ExperimentConfig:
    try:
        return ExperimentConfig.model_validate(dict(data))
    except ValidationError as e:
        raise ConfigError(_field_messages(e)) from e


def parse_config_text(text: str) -> Dict[str, str]:
    """
    Parse the flat config format.

    One `key = value` pair per line; blank lines and `#` comments are
    skipped. Lists are comma separated and split during validation.
    """
    data: Dict[str, str] = {}
    errors: List[str] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            errors.append(f"line {lineno}: expected 'key = value', got {raw.strip()!r}")
            continue
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            errors.append(f"line {lineno}: missing key")
        elif key in data:
            errors.append(f"{key}: duplicate key on line {lineno}")
        else:
            data[key] = value
    if errors:
        raise ConfigError(errors)
    return data


def load_config(path: Union[str, Path], overrides: Optional[Mapping[str, Any]] = None) -> ExperimentConfig:
    """Read, override and validate an experiment file."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError([f"config: cannot read {path}: {e}"]) from e
    data: Dict[str, Any] = parse_config_text(text)
    data.update({k: v for k, v in (overrides or {}).items() if v is not None})
    config = validate_config(data)
    logger.info(f"Loaded experiment config '{config.name}' from {path}")
    return config


# Results

class ResultsRow(BaseModel):
    """One method's success rate on one task and demo regime."""
    method: str = Field(..., description="dense_only, sparse_only, combined, offline_rl, bc, moka_*")
    task: str
    regime: str
    success: float = Field(..., ge=0, le=100, description="Success percentage")
    trials: int = Field(Config.EVAL_TRIALS, gt=0)
    seeds: int = Field(..., gt=0, description="Number of seeds averaged")


RESULT_COLUMNS = list(ResultsRow.model_fields)


class ResultsTable(BaseModel):
    rows: List[ResultsRow] = Field(default_factory=list)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([row.model_dump() for row in self.rows], columns=RESULT_COLUMNS)

    @classmethod
    def from_frame(cls, frame: pd.DataFrame) -> "ResultsTable":
        return cls(rows=[ResultsRow(**record) for record in frame.to_dict(orient="records")])

    def extend(self, other: "ResultsTable") -> "ResultsTable":
        return ResultsTable(rows=self.rows + other.rows)

    def success(self, method: str, regime: Optional[str] = None) -> float:
        for row in self.rows:
            if row.method == method and (regime is None or row.regime == regime):
                return row.success
        raise KeyError(f"no results row for method '{method}'" + (f" in regime '{regime}'" if regime else ""))
