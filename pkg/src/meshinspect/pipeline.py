"""End-to-end detection: priors -> weights -> decomposition -> segmentation."""

from dataclasses import dataclass, field

import numpy as np

from .hough import HoughConfig, broken_line_prior
from .image import as_gray
from .rpca import Decomposition, SolverConfig, solve
from .segmentation import SegmentationResult, auto_thresholds, double_threshold
from .spectral import DEFAULT_SIDES, FusionWeights, block_defect_prior
from .weights import build_weight, graded_weight


@dataclass(frozen=True)
class PipelineConfig:
    mesh_type: str = "square"
    solver: SolverConfig = field(default_factory=SolverConfig)
    hough: HoughConfig = field(default_factory=HoughConfig)
    fusion: FusionWeights = field(default_factory=FusionWeights)
    sides: tuple[int, int, int] = DEFAULT_SIDES
    w_min: float = 0.1
    graded: bool = False
    blur_radius: int = 2
    seg_k: float = 3.0
    t1: float | None = None  # manual threshold overrides; both or neither
    t2: float | None = None

    def __post_init__(self):
        if (self.t1 is None) != (self.t2 is None):
            raise ValueError("override both thresholds or neither")
        if self.mesh_type not in ("square", "circular"):
            raise ValueError(f"unknown mesh_type {self.mesh_type!r}")

    @classmethod
    def for_mesh(cls, mesh_type: str, **overrides) -> "PipelineConfig":
        solver = overrides.pop("solver", SolverConfig.for_mesh(mesh_type))
        return cls(mesh_type=mesh_type, solver=solver, **overrides)


def matched_sides(image_size: int, period: int) -> tuple[int, int, int]:
    """Low-pass sides that keep every passband below the lattice frequency.

    The block prior isolates low-frequency anomalies, so the largest
    filter must not admit the mesh fundamental at image_size/period
    bins; the default (10, 20, 40) is kept whenever it already fits.
    """
    fundamental = image_size // period
    largest = 2 * fundamental - 8
    if largest >= DEFAULT_SIDES[2]:
        return DEFAULT_SIDES
    largest = max(largest, 4)
    return (max(2, round(largest / 4)), max(3, round(largest / 2)), largest)


def matched_radius_range(period: int, line_width: int) -> tuple[int, int]:
    """Circle search radii bracketing a ring lattice's nominal radius."""
    ring = (period - line_width) / 2.0 - 1.0
    return max(2, int(ring) - 2), int(np.ceil(ring)) + 2


def config_for_mesh(mesh_type: str, image_size: int, period: int,
                    line_width: int = 2, **overrides) -> PipelineConfig:
    """Pipeline configuration tuned to a known mesh geometry."""
    if "sides" not in overrides:
        overrides["sides"] = matched_sides(image_size, period)
    if mesh_type == "circular" and "hough" not in overrides:
        overrides["hough"] = HoughConfig(
            radius_range=matched_radius_range(period, line_width))
    return PipelineConfig.for_mesh(mesh_type, **overrides)


@dataclass
class DetectionResult:
    block_prior: np.ndarray
    broken_prior: np.ndarray
    weights: np.ndarray
    decomposition: Decomposition
    segmentation: SegmentationResult


def compute_priors(img: np.ndarray, cfg: PipelineConfig) -> tuple[np.ndarray, np.ndarray]:
    arr = as_gray(img)
    block = block_defect_prior(arr, cfg.sides, cfg.fusion)
    broken = broken_line_prior(arr, cfg.mesh_type, cfg.hough)
    return block, broken


def _weights_from_priors(block, broken, cfg: PipelineConfig) -> np.ndarray:
    if cfg.graded:
        return graded_weight(block, broken, cfg.w_min, cfg.blur_radius)
    return build_weight(block, broken, cfg.w_min)


def compute_weights(img: np.ndarray, cfg: PipelineConfig) -> np.ndarray:
    return _weights_from_priors(*compute_priors(img, cfg), cfg)


def segment_defects(E: np.ndarray, cfg: PipelineConfig) -> SegmentationResult:
    if cfg.t1 is not None:
        t1, t2 = cfg.t1, cfg.t2
    else:
        t1, t2 = auto_thresholds(E, cfg.seg_k)
    return double_threshold(E, t1, t2)


def detect(img: np.ndarray, cfg: PipelineConfig = PipelineConfig()) -> DetectionResult:
    """Run the full defect-detection pipeline on one image."""
    arr = as_gray(img)
    block, broken = compute_priors(arr, cfg)
    W = _weights_from_priors(block, broken, cfg)
    dec = solve(arr, W, cfg.solver)
    seg = segment_defects(dec.E, cfg)
    return DetectionResult(block_prior=block, broken_prior=broken, weights=W,
                           decomposition=dec, segmentation=seg)
