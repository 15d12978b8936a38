"""Shared constants for the eastnet services layer.

Single source of truth for the protocol values that more than one module
reads: the chronological split, metric masking, the filter-normalization
epsilon and the binary file magics. Model/training defaults that users
may override live in ``eastnet.utils.config.SCHEMA`` instead.
"""

# Chronological train / validation / test proportions (7:1:2).
SPLIT_RATIOS: tuple[float, float, float] = (0.7, 0.1, 0.2)
MIN_SPLIT_LENGTH = 10

# Targets below this magnitude (raw units) are excluded from MAPE.
MAPE_MASK_EPS = 1.0

# Per-channel z-score denominator floor.
STD_FLOOR = 1e-8

# Filter normalization variance epsilon.
FN_EPS = 1e-6

# Accepted finite-difference step range for gradient checks.
GRADCHECK_H_RANGE: tuple[float, float] = (1e-6, 1e-4)
GRADCHECK_TOLERANCE = 1e-4

DATASET_MAGIC = b"MMT1"
DATASET_VERSION = 1
MEMORY_MAGIC = b"EAMB"
MEMORY_VERSION = 1
CHECKPOINT_MAGIC = b"EANW"
CHECKPOINT_VERSION = 1

METRICS_HEADER = ("variant", "rmse", "mae", "mape")
