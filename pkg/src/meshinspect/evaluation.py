"""Pixel-level scoring of predicted masks and grid parameter search."""

import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .image import as_mask
from .rpca import SolverConfig, solve
from .segmentation import auto_thresholds, double_threshold


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


@dataclass(frozen=True)
class MetricsReport:
    """Rates derived from a confusion count.

    A metric whose denominator is zero is reported as None, never as a
    conventional 0.
    """

    tpr: float | None
    fpr: float | None
    ppv: float | None
    npv: float | None
    f: float | None
    gamma: float = 1.0


def confusion(pred: np.ndarray, gt: np.ndarray) -> ConfusionCounts:
    """Per-pixel confusion counts with gt=1 as the positive class."""
    p, g = as_mask(pred), as_mask(gt)
    if p.shape != g.shape:
        raise ValueError(f"mask dimension mismatch: {p.shape} vs {g.shape}")
    tp = int(np.count_nonzero(p & g))
    fp = int(np.count_nonzero(p & ~g))
    fn = int(np.count_nonzero(~p & g))
    tn = p.size - tp - fp - fn
    return ConfusionCounts(tp=tp, fp=fp, tn=tn, fn=fn)


def _ratio(num: int, den: int) -> float | None:
    return num / den if den else None


def metrics(c: ConfusionCounts, gamma: float = 1.0) -> MetricsReport:
    """TPR, FPR, PPV, NPV and the f-value combining TPR with PPV."""
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    tpr = _ratio(c.tp, c.fn + c.tp)
    fpr = _ratio(c.fp, c.fp + c.tn)
    ppv = _ratio(c.tp, c.fp + c.tp)
    npv = _ratio(c.tn, c.tn + c.fn)
    f = None
    if tpr is not None and ppv is not None:
        den = tpr + gamma * gamma * ppv
        if den > 0:
            f = (gamma * gamma + 1.0) * tpr * ppv / den
    return MetricsReport(tpr=tpr, fpr=fpr, ppv=ppv, npv=npv, f=f, gamma=gamma)


def f_score(pred: np.ndarray, gt: np.ndarray, gamma: float = 1.0) -> float | None:
    return metrics(confusion(pred, gt), gamma).f


@dataclass(frozen=True)
class GridCell:
    lam: float
    beta: float
    mean_f: float | None
    per_image_f: tuple
    error: str | None = None


@dataclass(frozen=True)
class GridSearchResult:
    best_lam: float
    best_beta: float
    best_score: float
    cells: tuple[GridCell, ...]


def _score_cell(args):
    lam, beta, cfg_base, images, weight_maps, gts, seg_k = args
    cfg = replace(cfg_base, lam=lam, beta=beta)
    per_image = []
    try:
        for img, W, gt in zip(images, weight_maps, gts):
            dec = solve(img, W, cfg)
            t1, t2 = auto_thresholds(dec.E, seg_k)
            seg = double_threshold(dec.E, t1, t2)
            per_image.append(f_score(seg.defect_mask, gt))
    except Exception as exc:  # failed cells are excluded, search continues
        return GridCell(lam=lam, beta=beta, mean_f=None,
                        per_image_f=tuple(per_image), error=str(exc))
    mean_f = float(np.mean([f if f is not None else 0.0 for f in per_image]))
    return GridCell(lam=lam, beta=beta, mean_f=mean_f,
                    per_image_f=tuple(per_image))


def grid_search(dataset, lambda_grid, beta_grid,
                cfg_base: SolverConfig = SolverConfig(),
                pipeline_cfg=None, seg_k: float = 3.0,
                workers: int = 1) -> GridSearchResult:
    """Scan (lam, beta) cells over a dataset and pick the best mean f.

    dataset is a sequence of (image, gt_mask, mesh_type) triples. The
    prior stage does not depend on lam or beta, so weight maps are
    computed once per image and shared across cells. Per cell, each
    image is decomposed, auto-thresholded and scored against its ground
    truth (an undefined f counts as 0 in the mean). Ties are broken by
    the smaller lam, then the smaller beta. Cells that raise are
    excluded with a warning.
    """
    from .pipeline import PipelineConfig, compute_weights

    if not dataset or not lambda_grid or not beta_grid:
        raise ValueError("dataset and both grids must be non-empty")
    pipe = pipeline_cfg if pipeline_cfg is not None else PipelineConfig()
    images, weight_maps, gts = [], [], []
    for img, gt, mesh_type in dataset:
        images.append(np.asarray(img, dtype=np.float64))
        weight_maps.append(compute_weights(img, replace(pipe, mesh_type=mesh_type)))
        gts.append(as_mask(gt))

    jobs = [(float(lam), float(beta), cfg_base, images, weight_maps, gts, seg_k)
            for lam in lambda_grid for beta in beta_grid]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            cells = list(pool.map(_score_cell, jobs))
    else:
        cells = [_score_cell(job) for job in jobs]

    valid = [c for c in cells if c.error is None]
    for cell in cells:
        if cell.error is not None:
            warnings.warn(
                f"grid cell (lam={cell.lam}, beta={cell.beta}) failed and was "
                f"excluded: {cell.error}"
            )
    if not valid:
        raise RuntimeError("every grid cell failed")
    best = min(valid, key=lambda c: (-c.mean_f, c.lam, c.beta))
    return GridSearchResult(best_lam=best.lam, best_beta=best.beta,
                            best_score=best.mean_f, cells=tuple(cells))
