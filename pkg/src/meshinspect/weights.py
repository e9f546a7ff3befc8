"""Per-pixel sparse-penalty weights built from the two defect priors.

Pixels flagged by either prior get weight w_min, everything else 1, so
the solver's elementwise shrinkage lam*W/rho is smallest exactly where
a defect is suspected.
"""

import numpy as np

from .image import as_mask


def _check_w_min(w_min: float) -> None:
    if not 0.0 < w_min <= 1.0:
        raise ValueError(f"w_min must be in (0, 1], got {w_min}")


def build_weight(block_prior: np.ndarray, broken_prior: np.ndarray,
                 w_min: float = 0.1) -> np.ndarray:
    """Two-level weight matrix: w_min on prior pixels, 1 elsewhere."""
    _check_w_min(w_min)
    a, b = as_mask(block_prior), as_mask(broken_prior)
    if a.shape != b.shape:
        raise ValueError(f"prior dimension mismatch: {a.shape} vs {b.shape}")
    return np.where(a | b, w_min, 1.0)


def box_blur(arr: np.ndarray, radius: int) -> np.ndarray:
    """Separable moving average over a (2*radius+1)^2 window, edge-padded."""
    if radius < 0:
        raise ValueError("radius must be >= 0")
    out = np.asarray(arr, dtype=np.float64)
    if radius == 0:
        return out.copy()
    size = 2 * radius + 1
    for axis in (0, 1):
        padded = np.concatenate(
            [np.repeat(out.take([0], axis=axis), radius, axis=axis),
             out,
             np.repeat(out.take([-1], axis=axis), radius, axis=axis)],
            axis=axis,
        )
        csum = np.cumsum(padded, axis=axis)
        zero = np.zeros_like(csum.take([0], axis=axis))
        csum = np.concatenate([zero, csum], axis=axis)
        hi = csum.take(range(size, csum.shape[axis]), axis=axis)
        lo = csum.take(range(0, csum.shape[axis] - size), axis=axis)
        out = (hi - lo) / size
    return out


def graded_weight(block_prior: np.ndarray, broken_prior: np.ndarray,
                  w_min: float = 0.1, blur_radius: int = 2) -> np.ndarray:
    """Smoothly graded alternative: W = 1 - (1 - w_min) * blur(prior union)."""
    _check_w_min(w_min)
    union = build_weight(block_prior, broken_prior, w_min) < 1.0
    blurred = box_blur(union.astype(np.float64), blur_radius)
    return 1.0 - (1.0 - w_min) * blurred
