"""Delimited reports and matplotlib figures for pipeline outputs."""

import csv
import os

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .evaluation import GridSearchResult
from .image import normalize
from .pipeline import DetectionResult
from .rpca import Decomposition
from .scanning import ScanPlan


def write_csv(path: str, header, rows) -> None:
    """Write a delimited table atomically ('' stands for absent values)."""
    tmp = path + ".tmp"
    with open(tmp, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow(["" if v is None else v for v in row])
    os.replace(tmp, path)


def _save(fig, path: str) -> None:
    tmp = path + ".tmp"
    fig.savefig(tmp, format=os.path.splitext(path)[1].lstrip(".") or "png",
                dpi=110, bbox_inches="tight")
    plt.close(fig)
    os.replace(tmp, path)


def detection_figure(img: np.ndarray, result: DetectionResult, path: str) -> None:
    """Six-panel overview: input, background, defect matrix, and masks."""
    dec = result.decomposition
    seg = result.segmentation
    panels = [
        ("input", img, "gray"),
        ("background L", dec.L, "gray"),
        ("defect matrix E", normalize(dec.E), "coolwarm"),
        ("defect mask", seg.defect_mask, "gray"),
        ("broken mask", seg.broken_mask, "gray"),
        ("block mask", seg.block_mask, "gray"),
    ]
    fig, axes = plt.subplots(2, 3, figsize=(10, 6.5))
    for ax, (title, data, cmap) in zip(axes.ravel(), panels):
        ax.imshow(np.asarray(data, dtype=float), cmap=cmap, interpolation="nearest")
        ax.set_title(title, fontsize=9)
        ax.set_axis_off()
    fig.suptitle(f"t1={seg.t1:.4g}  t2={seg.t2:.4g}  "
                 f"iters={dec.iterations} ({dec.termination})", fontsize=10)
    _save(fig, path)


def trace_figure(dec: Decomposition, path: str) -> None:
    residuals = [r for r, _ in dec.trace]
    objectives = [o for _, o in dec.trace]
    steps = np.arange(1, len(residuals) + 1)
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 3.4))
    ax1.semilogy(steps, residuals, "o-")
    ax1.set_xlabel("iteration")
    ax1.set_ylabel("max |D - L - E - N|")
    ax2.plot(steps, objectives, "o-")
    ax2.set_xlabel("iteration")
    ax2.set_ylabel("objective")
    fig.tight_layout()
    _save(fig, path)


def metrics_scatter_figure(rows, path: str) -> None:
    """TPR vs FPR scatter; rows are (label, MetricsReport)."""
    fig, ax = plt.subplots(figsize=(5, 4.2))
    for label, rep in rows:
        if rep.tpr is None or rep.fpr is None:
            continue
        ax.scatter(rep.fpr, rep.tpr, s=18)
        ax.annotate(str(label), (rep.fpr, rep.tpr), fontsize=7,
                    xytext=(3, 3), textcoords="offset points")
    ax.set_xlabel("FPR")
    ax.set_ylabel("TPR")
    ax.set_xlim(left=0)
    ax.set_ylim(0, 1.02)
    _save(fig, path)


def f_histogram_figure(f_values, path: str, bins: int = 20) -> None:
    vals = [v for v in f_values if v is not None]
    fig, ax = plt.subplots(figsize=(5, 3.6))
    ax.hist(vals, bins=bins, range=(0.0, 1.0), edgecolor="black")
    ax.set_xlabel("f value")
    ax.set_ylabel("images")
    _save(fig, path)


def grid_heatmap_figure(result: GridSearchResult, path: str) -> None:
    lams = sorted({c.lam for c in result.cells})
    betas = sorted({c.beta for c in result.cells})
    grid = np.full((len(lams), len(betas)), np.nan)
    for cell in result.cells:
        if cell.mean_f is not None:
            grid[lams.index(cell.lam), betas.index(cell.beta)] = cell.mean_f
    fig, ax = plt.subplots(figsize=(5.5, 4.2))
    im = ax.imshow(grid, origin="lower", aspect="auto", cmap="viridis")
    ax.set_xticks(range(len(betas)), [f"{b:g}" for b in betas], fontsize=8)
    ax.set_yticks(range(len(lams)), [f"{l:g}" for l in lams], fontsize=8)
    ax.set_xlabel("beta")
    ax.set_ylabel("lambda")
    ax.set_title(f"best: lam={result.best_lam:g} beta={result.best_beta:g} "
                 f"f={result.best_score:.4f}", fontsize=9)
    fig.colorbar(im, ax=ax, label="mean f")
    _save(fig, path)


def plan_figure(plan: ScanPlan, path: str) -> None:
    xs = [n[0] for n in plan.nodes]
    ys = [n[1] for n in plan.nodes]
    fig, ax = plt.subplots(figsize=(5, 5))
    ax.plot(xs, ys, "-o", markersize=4)
    ax.annotate("start", (xs[0], ys[0]), fontsize=8,
                xytext=(4, 4), textcoords="offset points")
    for x, y in plan.nodes:
        ax.add_patch(plt.Circle((x, y), plan.fov_diameter / 2,
                                fill=False, alpha=0.25, linewidth=0.6))
    ax.add_patch(plt.Rectangle((0, 0), plan.region[0], plan.region[1],
                               fill=False, edgecolor="red", linewidth=1.2))
    ax.set_aspect("equal")
    ax.invert_yaxis()
    ax.set_xlabel("x (um)")
    ax.set_ylabel("y (um)")
    ax.set_title(f"{len(plan.nodes)} nodes, dwell {plan.total_dwell:g} s, "
                 f"overlap {plan.overlap:g} um", fontsize=9)
    _save(fig, path)
