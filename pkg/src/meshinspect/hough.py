"""Voting-based line/circle detection and the broken-line defect prior.

Lines are parametrized as (rho, theta) with rho = x*cos(theta) +
y*sin(theta), theta in [0, pi); circles as integer (cx, cy, r). The
prior marks pixels where the detected lattice predicts metal but the
binarized observation shows none.
"""

import math
from dataclasses import dataclass

import numpy as np

from .image import as_gray, as_mask, binarize, dilate, otsu_threshold

# Default acceptance: votes must reach this fraction of the candidate's
# own raster (clipped segment length or perimeter). Lattice alignment
# artifacts collect at most ~0.7 of their length on mesh images.
LINE_SUPPORT_FRACTION = 0.75
CIRCLE_SUPPORT_FRACTION = 0.6
# A detected primitive joins the broken-line prior only if at least
# this fraction of its raster lies near observed metal; alignment
# artifacts of the periodic lattice score well below it.
MIN_PRIMITIVE_SUPPORT = 0.6


@dataclass(frozen=True)
class LineParam:
    rho: float
    theta: float
    votes: int = 0


@dataclass(frozen=True)
class CircleParam:
    cx: int
    cy: int
    r: int
    votes: int = 0


@dataclass(frozen=True)
class HoughConfig:
    """Accumulator resolutions and peak acceptance parameters.

    With vote_threshold=None the acceptance rule adapts to scale: lines
    need half the shorter image side in votes plus most of their voting
    band filled, circles most of their own rasterized perimeter. An
    explicit vote_threshold is applied as a plain count.
    radius_range=None searches [4, min(h,w)//2].
    """

    rho_resolution: float = 1.0
    theta_resolution: float = math.radians(1.0)
    vote_threshold: int | None = None
    radius_range: tuple[int, int] | None = None
    dilate_radius: int = 2

    def __post_init__(self):
        if self.rho_resolution <= 0 or self.theta_resolution <= 0:
            raise ValueError("accumulator resolutions must be positive")
        if self.vote_threshold is not None and self.vote_threshold < 1:
            raise ValueError("vote_threshold must be >= 1")
        if self.radius_range is not None:
            lo, hi = self.radius_range
            if lo < 1 or hi < lo:
                raise ValueError(f"invalid radius_range {self.radius_range}")
        if self.dilate_radius < 0:
            raise ValueError("dilate_radius must be >= 0")


def line_accumulator(mask: np.ndarray, cfg: HoughConfig) -> tuple[np.ndarray, np.ndarray, float]:
    """Build the (rho, theta) vote table; returns (acc, thetas, rho_offset)."""
    m = as_mask(mask)
    h, w = m.shape
    diag = float(np.ceil(np.hypot(h - 1, w - 1)))
    thetas = np.arange(0.0, math.pi, cfg.theta_resolution)
    n_rho = int(round(2 * diag / cfg.rho_resolution)) + 1
    acc = np.zeros((n_rho, thetas.size), dtype=np.int64)
    ys, xs = np.nonzero(m)
    if xs.size:
        rho = (xs[:, None] * np.cos(thetas)[None, :]
               + ys[:, None] * np.sin(thetas)[None, :])
        ridx = np.rint((rho + diag) / cfg.rho_resolution).astype(np.int64)
        flat = ridx * thetas.size + np.arange(thetas.size)[None, :]
        acc += np.bincount(flat.ravel(), minlength=acc.size).reshape(acc.shape)
    return acc, thetas, diag


def _first_wins_peaks(acc: np.ndarray, threshold: int) -> np.ndarray:
    """Local maxima in raster order: strictly above earlier neighbors,
    at least equal to later ones, so plateaus yield one deterministic peak."""
    keep = acc >= threshold
    nd = acc.ndim
    for offset in np.ndindex(*(3,) * nd):
        delta = tuple(o - 1 for o in offset)
        if all(d == 0 for d in delta):
            continue
        src = tuple(
            slice(max(d, 0), acc.shape[i] + min(d, 0)) for i, d in enumerate(delta)
        )
        dst = tuple(
            slice(max(-d, 0), acc.shape[i] + min(-d, 0)) for i, d in enumerate(delta)
        )
        earlier = delta < (0,) * nd  # lexicographic: neighbor precedes cell
        if earlier:
            ok = acc[dst] > acc[src]
        else:
            ok = acc[dst] >= acc[src]
        keep[dst] &= ok
    return keep


def hough_lines(mask: np.ndarray, cfg: HoughConfig = HoughConfig()) -> list[LineParam]:
    """Detect lines as accumulator peaks, sorted by votes descending.

    An empty mask yields an empty list. Duplicates within one
    resolution cell are suppressed by the local-maximum test.
    """
    m = as_mask(mask)
    if not m.any():
        return []
    acc, thetas, diag = line_accumulator(m, cfg)
    auto = cfg.vote_threshold is None
    threshold = max(1, round(0.5 * min(m.shape))) if auto else cfg.vote_threshold
    keep = _first_wins_peaks(acc, threshold)
    ridx, tidx = np.nonzero(keep)
    votes = acc[ridx, tidx]
    order = np.lexsort((tidx, ridx, -votes))
    lines = [
        LineParam(
            rho=float(ridx[i] * cfg.rho_resolution - diag),
            theta=float(thetas[tidx[i]]),
            votes=int(votes[i]),
        )
        for i in order
    ]
    if auto:
        # Also require most of the cell's voting band to be filled; the
        # band holds raster_len * (|cos| + |sin|) pixels per unit of rho
        # resolution, which rejects lattice alignment artifacts
        # regardless of mesh density.
        kept = []
        for line in lines:
            raster_len = max(int(rasterize_line(m.shape, line).sum()), 1)
            capacity = (raster_len * cfg.rho_resolution
                        * (abs(math.cos(line.theta)) + abs(math.sin(line.theta))))
            if line.votes >= LINE_SUPPORT_FRACTION * capacity:
                kept.append(line)
        lines = kept
    return lines


def circle_perimeter_offsets(r: int) -> np.ndarray:
    """Midpoint-circle pixel offsets (dy, dx) for an integer radius."""
    if r < 1:
        raise ValueError("radius must be >= 1")
    pts = set()
    x, y, d = r, 0, 1 - r
    while x >= y:
        for a, b in ((x, y), (y, x)):
            pts.update({(b, a), (b, -a), (-b, a), (-b, -a)})
        y += 1
        if d < 0:
            d += 2 * y + 1
        else:
            x -= 1
            d += 2 * (y - x) + 1
    return np.array(sorted(pts), dtype=np.int64)


def hough_circles(mask: np.ndarray, cfg: HoughConfig = HoughConfig()) -> list[CircleParam]:
    """Detect circles via a (cx, cy, r) accumulator over integer radii.

    Centers may lie outside the image by up to the largest radius.
    """
    m = as_mask(mask)
    h, w = m.shape
    if cfg.radius_range is not None:
        r_lo, r_hi = cfg.radius_range
    else:
        r_lo, r_hi = 4, max(4, min(h, w) // 2)
    radii = list(range(r_lo, r_hi + 1))
    if not radii:
        raise ValueError("radius_range is empty")
    if not m.any():
        return []
    pad = r_hi
    ys, xs = np.nonzero(m)
    acc = np.zeros((len(radii), h + 2 * pad, w + 2 * pad), dtype=np.int32)
    for i, r in enumerate(radii):
        off = circle_perimeter_offsets(r)
        cy = ys[:, None] + off[None, :, 0] + pad
        cx = xs[:, None] + off[None, :, 1] + pad
        flat = cy.ravel() * (w + 2 * pad) + cx.ravel()
        counts = np.bincount(flat, minlength=acc[i].size)
        acc[i] += counts.reshape(acc[i].shape).astype(np.int32)
    if cfg.vote_threshold is not None:
        keep = _first_wins_peaks(acc, cfg.vote_threshold)
    else:
        # Normalize by each radius' own perimeter so large circles are
        # not favored; a candidate must collect most of its raster.
        keep = _first_wins_peaks(acc, 1)
        for i, r in enumerate(radii):
            keep[i] &= acc[i] >= CIRCLE_SUPPORT_FRACTION * len(circle_perimeter_offsets(r))
    ri, cyi, cxi = np.nonzero(keep)
    votes = acc[ri, cyi, cxi]
    order = np.lexsort((cxi, cyi, ri, -votes))
    return [
        CircleParam(
            cx=int(cxi[i] - pad),
            cy=int(cyi[i] - pad),
            r=int(radii[ri[i]]),
            votes=int(votes[i]),
        )
        for i in order
    ]


def _bresenham(x0: int, y0: int, x1: int, y1: int):
    dx, dy = abs(x1 - x0), -abs(y1 - y0)
    sx = 1 if x0 < x1 else -1
    sy = 1 if y0 < y1 else -1
    err = dx + dy
    while True:
        yield x0, y0
        if x0 == x1 and y0 == y1:
            return
        e2 = 2 * err
        if e2 >= dy:
            err += dy
            x0 += sx
        if e2 <= dx:
            err += dx
            y0 += sy


def rasterize_line(shape: tuple[int, int], line: LineParam) -> np.ndarray:
    """1-pixel-wide raster of an infinite line clipped to the image."""
    h, w = shape
    out = np.zeros(shape, dtype=bool)
    c, s = math.cos(line.theta), math.sin(line.theta)
    # Parametric point: (x, y) = rho*(c, s) + t*(-s, c).
    bounds = []
    for coef, base, hi in (( -s, line.rho * c, w - 1), (c, line.rho * s, h - 1)):
        if abs(coef) < 1e-12:
            if not 0.0 - 0.5 <= base <= hi + 0.5:
                return out
            continue
        t0, t1 = (0.0 - base) / coef, (hi - base) / coef
        bounds.append((min(t0, t1), max(t0, t1)))
    t_lo = max(b[0] for b in bounds)
    t_hi = min(b[1] for b in bounds)
    if t_lo > t_hi:
        return out
    x0 = int(round(line.rho * c - t_lo * s))
    y0 = int(round(line.rho * s + t_lo * c))
    x1 = int(round(line.rho * c - t_hi * s))
    y1 = int(round(line.rho * s + t_hi * c))
    for x, y in _bresenham(x0, y0, x1, y1):
        if 0 <= x < w and 0 <= y < h:
            out[y, x] = True
    return out


def rasterize_circle(shape: tuple[int, int], circle: CircleParam) -> np.ndarray:
    """1-pixel-wide raster of a circle clipped to the image."""
    out = np.zeros(shape, dtype=bool)
    off = circle_perimeter_offsets(circle.r)
    ys = off[:, 0] + circle.cy
    xs = off[:, 1] + circle.cx
    inside = (ys >= 0) & (ys < shape[0]) & (xs >= 0) & (xs < shape[1])
    out[ys[inside], xs[inside]] = True
    return out


def rasterize_primitives(shape: tuple[int, int],
                         lines=(), circles=()) -> np.ndarray:
    out = np.zeros(shape, dtype=bool)
    for line in lines:
        out |= rasterize_line(shape, line)
    for circle in circles:
        out |= rasterize_circle(shape, circle)
    return out


def draw_primitives(img: np.ndarray, lines=(), circles=()) -> np.ndarray:
    """Copy of the image with detected primitives drawn at intensity 1.0."""
    out = as_gray(img).copy()
    out[rasterize_primitives(out.shape, lines, circles)] = 1.0
    return out


def _laterally_tolerated(observed: np.ndarray, pts: np.ndarray,
                         normals: np.ndarray, radius: int) -> np.ndarray:
    """True where observed metal exists within `radius` of each point,
    measured along the point's unit normal (ny, nx). Samples falling
    outside the image count as tolerated."""
    h, w = observed.shape
    ts = np.arange(-radius, radius + 1, dtype=np.float64)
    ys = np.rint(pts[:, 0, None] + ts[None, :] * normals[:, 0, None]).astype(np.int64)
    xs = np.rint(pts[:, 1, None] + ts[None, :] * normals[:, 1, None]).astype(np.int64)
    inside = (ys >= 0) & (ys < h) & (xs >= 0) & (xs < w)
    hit = ~inside
    hit[inside] = observed[ys[inside], xs[inside]]
    return hit.any(axis=1)


def broken_line_prior(img: np.ndarray, mesh_type: str = "square",
                      cfg: HoughConfig = HoughConfig()) -> np.ndarray:
    """Binary prior marking suspected breaks in the mesh lattice.

    The binarized input votes for lattice primitives (lines for square
    mesh, circles for circular). A raster pixel of a detected primitive
    is flagged when no observed metal lies within dilate_radius along
    the primitive's normal; the tolerance is directional so that
    lattice lines crossing a gap do not mask it. The flagged set is
    dilated by dilate_radius to cover the full line width.
    """
    if mesh_type not in ("square", "circular"):
        raise ValueError(f"mesh_type must be 'square' or 'circular', got {mesh_type!r}")
    observed = binarize(img, otsu_threshold(img), "above")

    def line_normals(line):
        def normals(pts):
            direction = np.array([math.sin(line.theta), math.cos(line.theta)])
            return np.broadcast_to(direction, pts.shape)
        return normals

    def circle_normals(circle):
        def normals(pts):
            radial = pts - np.array([float(circle.cy), float(circle.cx)])
            norm = np.linalg.norm(radial, axis=1, keepdims=True)
            return radial / np.maximum(norm, 1e-9)
        return normals

    if mesh_type == "square":
        prims = [(rasterize_line(observed.shape, line), line_normals(line))
                 for line in hough_lines(observed, cfg)]
    else:
        prims = [(rasterize_circle(observed.shape, c), circle_normals(c))
                 for c in hough_circles(observed, cfg)]

    flagged = np.zeros(observed.shape, dtype=bool)
    for raster, normals_of in prims:
        pts = np.argwhere(raster).astype(np.float64)
        if not pts.size:
            continue
        hit = _laterally_tolerated(observed, pts, normals_of(pts),
                                   cfg.dilate_radius)
        if hit.mean() < MIN_PRIMITIVE_SUPPORT:
            continue
        flagged[tuple(pts[~hit].astype(np.int64).T)] = True
    return dilate(flagged, cfg.dilate_radius)
