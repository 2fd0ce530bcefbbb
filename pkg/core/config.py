"""
Configuration module for wayshape.

This module contains all default settings and environment variables
used throughout the package. Experiment files (see core.models) start
from these defaults.
"""
import os
from typing import List, Dict


def _flag(name: str, default: str) -> bool:
    return os.getenv(name, default).lower() == "true"


class Config:
    """Configuration class for wayshape."""

    # Logging
    LOG_LEVEL = os.getenv("WAYSHAPE_LOG_LEVEL", "INFO")

    # Grid / image space (rewards are computed in 100x100 pixel space)
    IMAGE_WIDTH = int(os.getenv("WAYSHAPE_IMAGE_WIDTH", "100"))
    IMAGE_HEIGHT = int(os.getenv("WAYSHAPE_IMAGE_HEIGHT", "100"))
    GRID_COLS = int(os.getenv("WAYSHAPE_GRID_COLS", "6"))
    GRID_ROWS = int(os.getenv("WAYSHAPE_GRID_ROWS", "6"))
    HEIGHT_LEVELS = int(os.getenv("WAYSHAPE_HEIGHT_LEVELS", "6"))

    # Dense reward shaping
    REWARD_LAMBDA = float(os.getenv("WAYSHAPE_REWARD_LAMBDA", "0.1"))
    REWARD_PHI = float(os.getenv("WAYSHAPE_REWARD_PHI", "15"))
    OBJECT_REWARD = _flag("WAYSHAPE_OBJECT_REWARD", "False")
    SPARSE_LATCH = _flag("WAYSHAPE_SPARSE_LATCH", "False")

    # Sparse consensus classifier
    SPARSE_PROMPTS = int(os.getenv("WAYSHAPE_SPARSE_PROMPTS", "4"))
    SPARSE_FALSE_POSITIVE = float(os.getenv("WAYSHAPE_SPARSE_FALSE_POSITIVE", "0.1"))
    SPARSE_FALSE_NEGATIVE = float(os.getenv("WAYSHAPE_SPARSE_FALSE_NEGATIVE", "0.05"))

    # Camera calibration (RANSAC)
    CALIBRATION_PAIRS = int(os.getenv("WAYSHAPE_CALIBRATION_PAIRS", "60"))
    CALIBRATION_OUTLIERS = float(os.getenv("WAYSHAPE_CALIBRATION_OUTLIERS", "0.2"))
    RANSAC_THRESHOLD = float(os.getenv("WAYSHAPE_RANSAC_THRESHOLD", "4.0"))
    RANSAC_ITERATIONS = int(os.getenv("WAYSHAPE_RANSAC_ITERATIONS", "200"))
    PROJECTION_NOISE = float(os.getenv("WAYSHAPE_PROJECTION_NOISE", "0.5"))

    # Simulator
    PERTURB_RADIUS = float(os.getenv("WAYSHAPE_PERTURB_RADIUS", "0.06"))
    MOKA_PERTURB_RADIUS = float(os.getenv("WAYSHAPE_MOKA_PERTURB_RADIUS", "0.06"))
    DEMO_ACTION_NOISE = float(os.getenv("WAYSHAPE_DEMO_ACTION_NOISE", "0.005"))

    # Prompting
    KEYPOINTS_PER_OBJECT = 5
    MASK_RADIUS = int(os.getenv("WAYSHAPE_MASK_RADIUS", "8"))
    ORACLE_Z_LOW = int(os.getenv("WAYSHAPE_ORACLE_Z_LOW", "0"))
    ORACLE_Z_LIFT = int(os.getenv("WAYSHAPE_ORACLE_Z_LIFT", "1"))

    # VLM endpoint (chat-completions wire format)
    VLM_BASE_URL = os.getenv("WAYSHAPE_VLM_BASE_URL", "https://api.openai.com/v1")
    VLM_MODEL = os.getenv("WAYSHAPE_VLM_MODEL", "gpt-4o")
    VLM_API_KEY_ENV = os.getenv("WAYSHAPE_VLM_API_KEY_ENV", "OPENAI_API_KEY")
    VLM_TIMEOUT = float(os.getenv("WAYSHAPE_VLM_TIMEOUT", "60"))
    VLM_RETRIES = int(os.getenv("WAYSHAPE_VLM_RETRIES", "3"))
    PROVIDER_FALLBACK = _flag("WAYSHAPE_PROVIDER_FALLBACK", "True")

    # Mock endpoint server
    MOCK_HOST = os.getenv("WAYSHAPE_MOCK_HOST", "127.0.0.1")
    MOCK_PORT = int(os.getenv("WAYSHAPE_MOCK_PORT", "8100"))

    # Experiment protocol
    DEFAULT_SEEDS: List[int] = [0, 1, 2]
    EVAL_TRIALS = int(os.getenv("WAYSHAPE_EVAL_TRIALS", "20"))
    EVAL_INTERVAL = int(os.getenv("WAYSHAPE_EVAL_INTERVAL", "2000"))
    ONLINE_STEPS = int(os.getenv("WAYSHAPE_ONLINE_STEPS", "100000"))
    ONLINE_STEPS_REDUCED = int(os.getenv("WAYSHAPE_ONLINE_STEPS_REDUCED", "175000"))
    OFFLINE_STEPS = int(os.getenv("WAYSHAPE_OFFLINE_STEPS", "5000"))
    DEMO_REGIMES: Dict[str, List[int]] = {
        "standard": [20, 20, 8],
        "2x": [10, 10, 4],
        "5x": [4, 4, 2],
    }

    # Learner
    GAMMA = float(os.getenv("WAYSHAPE_GAMMA", "0.9"))
    ACTOR_LR = float(os.getenv("WAYSHAPE_ACTOR_LR", "0.001"))
    CRITIC_LR = float(os.getenv("WAYSHAPE_CRITIC_LR", "0.001"))
    BATCH_SIZE = int(os.getenv("WAYSHAPE_BATCH_SIZE", "128"))
    CONSERVATIVE_ALPHA = float(os.getenv("WAYSHAPE_CONSERVATIVE_ALPHA", "0.5"))
    TARGET_TAU = float(os.getenv("WAYSHAPE_TARGET_TAU", "0.005"))
    BC_WEIGHT = float(os.getenv("WAYSHAPE_BC_WEIGHT", "0.4"))
    EXPLORATION_STD = float(os.getenv("WAYSHAPE_EXPLORATION_STD", "0.2"))
    HIDDEN_SIZE = int(os.getenv("WAYSHAPE_HIDDEN_SIZE", "64"))
    OFFLINE_RATIO = float(os.getenv("WAYSHAPE_OFFLINE_RATIO", "0.5"))
    BUFFER_CAPACITY = int(os.getenv("WAYSHAPE_BUFFER_CAPACITY", "250000"))
    CALIBRATION_EPSILON = float(os.getenv("WAYSHAPE_CALIBRATION_EPSILON", "0.5"))

    # Monitoring
    ENABLE_METRICS = _flag("WAYSHAPE_ENABLE_METRICS", "True")

    # Batch processing
    MAX_WORKERS = int(os.getenv("WAYSHAPE_MAX_WORKERS", "1"))
