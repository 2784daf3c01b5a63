"""
Toolkit configuration.
All constants and environment-driven settings live here.
"""

import math
import os

# ---------- Runtime ----------
LOG_LEVEL: str = os.getenv("METAKIT_LOG_LEVEL", "INFO")
DEFAULT_SEED: int = int(os.getenv("METAKIT_SEED", "0"))
NUM_WORKERS: int = int(os.getenv("METAKIT_NUM_WORKERS", "0"))  # 0 = in-thread

# ---------- Autodiff ----------
FINITE_DIFFERENCE_STEP: float = 1e-5

# ---------- Toy problems (conventions, not measured facts) ----------
AMPLITUDE_RANGE: tuple[float, float] = (0.1, 5.0)
PHASE_RANGE: tuple[float, float] = (0.0, math.pi)
INPUT_RANGE: tuple[float, float] = (-5.0, 5.0)
SLOPE_RANGE: tuple[float, float] = (-3.0, 3.0)
INTERCEPT_RANGE: tuple[float, float] = (-3.0, 3.0)
FREQUENCY_RANGE: tuple[float, float] = (0.5, 2.0)
LINE_PROBABILITY: float = 0.5
DEFAULT_NUM_TOY_TASKS: int = 1_000_000

# ---------- Task sampling ----------
# Above this many combinations the loader draws ranks uniformly instead of
# materialising a permutation (duplicates within an epoch are tolerated).
LAZY_SAMPLING_THRESHOLD: int = 10**7

# ---------- Class stores / manifests ----------
MANIFEST_FORMAT_VERSION: int = 1
MANIFEST_FILENAME: str = "manifest.json"
DEFAULT_SPLIT_FRACTIONS: tuple[float, float, float] = (0.64, 0.16, 0.20)
IMAGE_EXTENSIONS: tuple[str, ...] = (".png",)
DECODE_CACHE_SIZE: int = 4096
MIN_SYNTHETIC_IMAGE_SIZE: int = 8

# ---------- Meta-modules ----------
CHECKPOINT_FORMAT_VERSION: int = 1
HIDDEN_SIZES: tuple[int, ...] = (40, 40)
REGRESSION_ACTIVATION: str = "tanh"
CLASSIFICATION_ACTIVATION: str = "relu"

# ---------- MAML defaults ----------
INNER_LR: float = 0.01
OUTER_LR: float = 0.001
INNER_STEPS: int = 1
META_BATCH_SIZE: int = 4
OUTER_STEPS: int = 2000
EVAL_TASKS: int = 100
LOG_EVERY: int = 100
