"""Double-threshold extraction of defects from the sparse matrix.

Breaks in the lattice show up as negative values of E and lumpy extra
material as positive values, so two thresholds t1 <= 0 <= t2 split the
defect map into the two classes.
"""

from dataclasses import dataclass

import numpy as np

from .image import as_gray


@dataclass(frozen=True)
class SegmentationResult:
    defect_mask: np.ndarray
    broken_mask: np.ndarray
    block_mask: np.ndarray
    t1: float
    t2: float


def auto_thresholds(E: np.ndarray, k: float = 3.0) -> tuple[float, float]:
    """k-sigma thresholds (mean - k*std, mean + k*std), clamped around 0.

    A constant E has zero spread and yields (0, 0), which labels every
    nonzero pixel a defect.
    """
    arr = as_gray(E)
    if k <= 0:
        raise ValueError("k must be positive")
    if np.all(arr == arr.flat[0]):  # zero spread, float-exact check
        return 0.0, 0.0
    sigma = float(arr.std())
    mu = float(arr.mean())
    return min(mu - k * sigma, 0.0), max(mu + k * sigma, 0.0)


def double_threshold(E: np.ndarray, t1: float, t2: float) -> SegmentationResult:
    """Label E <= t1 as broken, E > t2 as block, their union as defect."""
    arr = as_gray(E)
    if t1 > t2:
        raise ValueError(f"t1 must not exceed t2, got ({t1}, {t2})")
    broken = arr <= t1
    block = arr > t2
    return SegmentationResult(
        defect_mask=broken | block,
        broken_mask=broken,
        block_mask=block,
        t1=float(t1),
        t2=float(t2),
    )
