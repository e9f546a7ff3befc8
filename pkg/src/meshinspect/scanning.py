"""Serpentine scan planning over a rectangular region and tile stitching.

Node coordinates are the top-left corners of tiles, in micrometres.
Rows alternate sweep direction so consecutive nodes always differ in a
single coordinate. Intensity mosaics blend overlaps by averaging; mask
mosaics blend by logical OR so a defect seen by any tile survives.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .evaluation import MetricsReport, confusion, metrics
from .image import as_gray, as_mask
from .pipeline import PipelineConfig, detect
from .segmentation import SegmentationResult


@dataclass(frozen=True)
class ScanPlan:
    nodes: tuple[tuple[float, float], ...]  # (x_um, y_um) in visit order
    step: float
    dwell: float
    fov_diameter: float
    region: tuple[float, float]

    @property
    def total_dwell(self) -> float:
        return len(self.nodes) * self.dwell

    @property
    def overlap(self) -> float:
        return self.fov_diameter - self.step

    @property
    def fov_side(self) -> float:
        """Side of the square field inscribed in the circular FOV."""
        return self.fov_diameter / math.sqrt(2.0)


def _axis_positions(extent: float, step: float, fov_side: float) -> list[float]:
    if fov_side >= extent:
        return [0.0]
    count = math.ceil(extent / step) + 1
    return [i * step for i in range(count)]


def plan_s_path(region: tuple[float, float], step: float,
                fov_diameter: float, dwell: float = 2.0) -> ScanPlan:
    """Serpentine node layout covering the region with overlap redundancy.

    Nodes advance by `step` per axis until the last node reaches or
    passes the region edge; a single node suffices when the inscribed
    FOV square already covers the axis. Requires fov_diameter > step,
    otherwise adjacent tiles would have no redundancy.
    """
    width, height = region
    if width <= 0 or height <= 0:
        raise ValueError(f"degenerate region {region}")
    if step <= 0:
        raise ValueError("step must be positive")
    if fov_diameter <= step:
        raise ValueError(
            f"no redundancy: fov_diameter {fov_diameter} must exceed step {step}"
        )
    fov_side = fov_diameter / math.sqrt(2.0)
    xs = _axis_positions(width, step, fov_side)
    ys = _axis_positions(height, step, fov_side)
    nodes = []
    for row, y in enumerate(ys):
        sweep = xs if row % 2 == 0 else list(reversed(xs))
        nodes.extend((x, y) for x in sweep)
    return ScanPlan(nodes=tuple(nodes), step=step, dwell=dwell,
                    fov_diameter=fov_diameter, region=(width, height))


def _tile_layout(tiles, plan: ScanPlan, pixel_pitch: float):
    if pixel_pitch <= 0:
        raise ValueError("pixel_pitch must be positive")
    by_node = {}
    shape = None
    for img, node in tiles:
        arr = as_gray(img)
        if shape is None:
            shape = arr.shape
        elif arr.shape != shape:
            raise ValueError(f"inconsistent tile sizes: {arr.shape} vs {shape}")
        by_node[(float(node[0]), float(node[1]))] = arr
    placed = []
    for node in plan.nodes:
        key = (float(node[0]), float(node[1]))
        if key not in by_node:
            raise ValueError(f"missing tile for node {node}")
        row0 = int(round(key[1] / pixel_pitch))
        col0 = int(round(key[0] / pixel_pitch))
        placed.append((by_node[key], row0, col0))
    th, tw = shape
    rows = max(r for _, r, _ in placed) + th
    cols = max(c for _, _, c in placed) + tw
    return placed, (rows, cols)


def stitch(tiles, plan: ScanPlan, pixel_pitch: float) -> np.ndarray:
    """Average-blend tiles into a mosaic covering all node positions.

    tiles is a sequence of (image, (x_um, y_um)) pairs, one per plan
    node; node coordinates are converted to pixels with pixel_pitch.
    """
    placed, (rows, cols) = _tile_layout(tiles, plan, pixel_pitch)
    total = np.zeros((rows, cols), dtype=np.float64)
    count = np.zeros((rows, cols), dtype=np.int64)
    for arr, r0, c0 in placed:
        th, tw = arr.shape
        total[r0:r0 + th, c0:c0 + tw] += arr
        count[r0:r0 + th, c0:c0 + tw] += 1
    return total / np.maximum(count, 1)


def stitch_masks(masks, plan: ScanPlan, pixel_pitch: float) -> np.ndarray:
    """OR-blend binary tiles into a region mask."""
    pairs = [(as_mask(m).astype(np.float64), node) for m, node in masks]
    placed, (rows, cols) = _tile_layout(pairs, plan, pixel_pitch)
    out = np.zeros((rows, cols), dtype=bool)
    for arr, r0, c0 in placed:
        th, tw = arr.shape
        out[r0:r0 + th, c0:c0 + tw] |= arr.astype(bool)
    return out


@dataclass
class TileReport:
    index: int
    node: tuple[float, float]
    ok: bool
    error: str | None = None
    t1: float | None = None
    t2: float | None = None
    metrics: MetricsReport | None = None


@dataclass
class RegionDetection:
    segmentation: SegmentationResult
    tile_reports: list[TileReport] = field(default_factory=list)


def detect_over_region(tiles, plan: ScanPlan, cfg: PipelineConfig,
                       pixel_pitch: float, gt_tiles=None) -> RegionDetection:
    """Run the detection pipeline per tile and OR-stitch the masks.

    A tile whose detection raises is reported and contributes nothing
    to the region masks. When gt_tiles (defect masks, one per tile,
    same order) is given, each successful tile also gets a
    MetricsReport.
    """
    tiles = list(tiles)
    if gt_tiles is not None and len(gt_tiles) != len(tiles):
        raise ValueError("gt_tiles must match tiles one to one")
    reports = []
    mask_triples = []
    for index, (img, node) in enumerate(tiles):
        shape = as_gray(img).shape
        try:
            result = detect(img, cfg)
        except Exception as exc:
            reports.append(TileReport(index=index, node=tuple(node), ok=False,
                                      error=str(exc)))
            empty = np.zeros(shape, dtype=bool)
            mask_triples.append((empty, empty, empty, node))
            continue
        seg = result.segmentation
        report = TileReport(index=index, node=tuple(node), ok=True,
                            t1=seg.t1, t2=seg.t2)
        if gt_tiles is not None:
            report.metrics = metrics(confusion(seg.defect_mask, gt_tiles[index]))
        reports.append(report)
        mask_triples.append((seg.defect_mask, seg.broken_mask, seg.block_mask, node))

    defect = stitch_masks([(m[0], m[3]) for m in mask_triples], plan, pixel_pitch)
    broken = stitch_masks([(m[1], m[3]) for m in mask_triples], plan, pixel_pitch)
    block = stitch_masks([(m[2], m[3]) for m in mask_triples], plan, pixel_pitch)
    seg = SegmentationResult(defect_mask=defect, broken_mask=broken,
                             block_mask=block, t1=math.nan, t2=math.nan)
    return RegionDetection(segmentation=seg, tile_reports=reports)


def cut_tiles(image: np.ndarray, plan: ScanPlan, pixel_pitch: float,
              tile_shape: tuple[int, int]) -> list[tuple[np.ndarray, tuple[float, float]]]:
    """Extract one tile per plan node from a larger source image.

    The source must be large enough to contain every tile; this is the
    inverse of stitch for test and simulation purposes.
    """
    arr = as_gray(image)
    th, tw = tile_shape
    tiles = []
    for node in plan.nodes:
        r0 = int(round(node[1] / pixel_pitch))
        c0 = int(round(node[0] / pixel_pitch))
        if r0 < 0 or c0 < 0 or r0 + th > arr.shape[0] or c0 + tw > arr.shape[1]:
            raise ValueError(f"tile at node {node} falls outside the source image")
        tiles.append((arr[r0:r0 + th, c0:c0 + tw].copy(), node))
    return tiles
