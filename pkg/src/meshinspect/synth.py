"""Synthetic mesh images with injected defects and exact ground truth.

Square meshes are built separably (row stripes union column stripes),
which keeps the clean background at numerical rank <= 2; circular
meshes are periodic lattices of rasterized rings. Broken defects erase
line pixels down to the background intensity, block defects paint a
bright square. Everything is deterministic given the seed.
"""

import csv
import os
from dataclasses import asdict, dataclass, replace

import numpy as np

from .image import load_gray, load_mask, save_gray, save_mask

BLOCK_CONTRAST = 0.8  # block intensity = line + BLOCK_CONTRAST * (1 - line)


@dataclass(frozen=True)
class MeshSpec:
    """Mesh geometry and imaging defaults.

    The default period keeps the lattice fundamental above the largest
    default low-pass side; circular meshes need a larger period (16 or
    more at size 256) so rings stay resolvable.
    """

    mesh_type: str = "square"
    period: int = 8
    line_width: int = 2
    image_size: int = 256
    line_intensity: float = 0.75
    background_intensity: float = 0.15
    illumination_gradient: float = 0.06
    noise_sigma: float = 0.008
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.line_width < self.period < self.image_size:
            raise ValueError(
                "need 0 < line_width < period < image_size, got "
                f"{self.line_width}, {self.period}, {self.image_size}"
            )
        if self.line_intensity == self.background_intensity:
            raise ValueError("line and background intensities must differ")
        if self.mesh_type not in ("square", "circular"):
            raise ValueError(f"unknown mesh_type {self.mesh_type!r}")
        if self.noise_sigma < 0 or self.illumination_gradient < 0:
            raise ValueError("noise_sigma and illumination_gradient must be >= 0")


@dataclass(frozen=True)
class DefectSpec:
    """One family of defects to inject.

    kind "mixed" alternates broken and block defects. location=None
    places defects with the mesh's seeded generator; an explicit
    (row, col) anchors a single defect's top-left corner.
    """

    kind: str = "broken"
    location: tuple[int, int] | None = None
    extent: int = 20
    count: int = 1

    def __post_init__(self):
        if self.kind not in ("broken", "block", "mixed", "none"):
            raise ValueError(f"unknown defect kind {self.kind!r}")
        if self.extent < 1 or self.count < 0:
            raise ValueError("extent must be >= 1 and count >= 0")
        if self.location is not None and self.count != 1:
            raise ValueError("an explicit location requires count == 1")


def _line_starts(mesh: MeshSpec) -> np.ndarray:
    offset = (mesh.period - mesh.line_width) // 2
    return np.arange(offset, mesh.image_size - mesh.line_width + 1, mesh.period)


def _square_lattice(mesh: MeshSpec) -> np.ndarray:
    n = mesh.image_size
    axis = np.zeros(n, dtype=bool)
    for start in _line_starts(mesh):
        axis[start:start + mesh.line_width] = True
    return axis[:, None] | axis[None, :]


def _ring_centers(mesh: MeshSpec) -> list[tuple[int, int]]:
    half = mesh.period // 2
    coords = range(half, mesh.image_size, mesh.period)
    return [(cy, cx) for cy in coords for cx in coords]


def _ring_radius(mesh: MeshSpec) -> float:
    return (mesh.period - mesh.line_width) / 2.0 - 1.0


def _circular_lattice(mesh: MeshSpec) -> np.ndarray:
    # rings never reach past their own cell, so the distance to the
    # nearest center reduces to modular cell coordinates
    n = mesh.image_size
    half = mesh.period // 2
    yy, xx = np.mgrid[0:n, 0:n]
    u = yy % mesh.period - half
    v = xx % mesh.period - half
    dist = np.hypot(u, v)
    r = _ring_radius(mesh)
    return np.abs(dist - r) <= mesh.line_width / 2.0


def _on_vertical_line(mesh: MeshSpec, col: int) -> bool:
    return any(s <= col and col + mesh.line_width <= s + mesh.line_width
               for s in _line_starts(mesh))


def _place_broken_square(mesh, lattice, rng, extent, location):
    starts = _line_starts(mesh)
    if location is None:
        vertical = bool(rng.integers(0, 2))
        line = int(rng.choice(starts))
        along = int(rng.integers(2, mesh.image_size - extent - 2))
    else:
        row, col = location
        if _on_vertical_line(mesh, col):
            vertical, line, along = True, col, row
        elif _on_vertical_line(mesh, row):  # symmetric lattice: same starts
            vertical, line, along = False, row, col
        else:
            raise ValueError(f"broken defect at {location} is not anchored on a mesh line")
    if along < 0 or along + extent > mesh.image_size:
        raise ValueError("broken defect extends outside the image")
    gt = np.zeros_like(lattice)
    if vertical:
        gt[along:along + extent, line:line + mesh.line_width] = True
    else:
        gt[line:line + mesh.line_width, along:along + extent] = True
    return gt & lattice


def _place_broken_circular(mesh, lattice, rng, extent, location):
    n = mesh.image_size
    centers = _ring_centers(mesh)
    r = _ring_radius(mesh)
    if location is None:
        interior = [c for c in centers
                    if mesh.period // 2 <= c[0] <= n - mesh.period // 2
                    and mesh.period // 2 <= c[1] <= n - mesh.period // 2]
        cy, cx = interior[int(rng.integers(0, len(interior)))]
        theta0 = float(rng.uniform(0, 2 * np.pi))
    else:
        cy, cx = location
        if (cy, cx) not in centers:
            raise ValueError(f"{location} is not a ring center of this mesh")
        theta0 = 0.0
    span = min(extent / max(r, 1.0), 2 * np.pi)
    yy, xx = np.mgrid[0:n, 0:n]
    dist = np.hypot(yy - cy, xx - cx)
    ring = np.abs(dist - r) <= mesh.line_width / 2.0
    angle = np.mod(np.arctan2(yy - cy, xx - cx) - theta0, 2 * np.pi)
    return ring & (angle <= span) & lattice


def _place_block(mesh, rng, extent, location, forbidden):
    n = mesh.image_size
    if extent > n - 4:
        raise ValueError("block defect extends outside the image")
    for _ in range(200):
        if location is not None:
            row, col = location
        else:
            row = int(rng.integers(2, n - extent - 1))
            col = int(rng.integers(2, n - extent - 1))
        if row < 0 or col < 0 or row + extent > n or col + extent > n:
            raise ValueError("block defect extends outside the image")
        gt = np.zeros((n, n), dtype=bool)
        gt[row:row + extent, col:col + extent] = True
        if not (gt & forbidden).any():
            return gt
        if location is not None:
            raise ValueError("block defect overlaps a defect of another kind")
    raise ValueError("could not place a non-overlapping block defect")


def generate(mesh: MeshSpec, defects: DefectSpec = DefectSpec(count=0)
             ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Render a mesh image plus (broken, block) ground-truth masks."""
    rng = np.random.default_rng(mesh.seed)
    lattice = _square_lattice(mesh) if mesh.mesh_type == "square" else _circular_lattice(mesh)
    n = mesh.image_size
    gt_broken = np.zeros((n, n), dtype=bool)
    gt_block = np.zeros((n, n), dtype=bool)

    kinds: list[str] = []
    if defects.kind != "none":
        for i in range(defects.count):
            if defects.kind == "mixed":
                kinds.append("broken" if i % 2 == 0 else "block")
            else:
                kinds.append(defects.kind)
    for kind in kinds:
        if kind == "broken":
            if mesh.mesh_type == "square":
                gt = _place_broken_square(mesh, lattice, rng, defects.extent,
                                          defects.location)
            else:
                gt = _place_broken_circular(mesh, lattice, rng, defects.extent,
                                            defects.location)
            if (gt & gt_block).any():
                raise ValueError("broken defect overlaps a defect of another kind")
            gt_broken |= gt
        else:
            gt_block |= _place_block(mesh, rng, defects.extent, defects.location,
                                     forbidden=gt_broken)

    img = np.where(lattice, mesh.line_intensity, mesh.background_intensity)
    img = np.where(gt_broken, mesh.background_intensity, img)
    block_value = mesh.line_intensity + BLOCK_CONTRAST * (1.0 - mesh.line_intensity)
    img = np.where(gt_block, block_value, img)

    if mesh.illumination_gradient > 0:
        yy, xx = np.mgrid[0:n, 0:n]
        tilt = (yy + xx) / max(2 * (n - 1), 1) - 0.5
        img = img * (1.0 + mesh.illumination_gradient * tilt)
    if mesh.noise_sigma > 0:
        img = img + rng.normal(0.0, mesh.noise_sigma, size=img.shape)
    return np.clip(img, 0.0, 1.0), gt_broken, gt_block


@dataclass
class DatasetItem:
    image: np.ndarray
    gt_broken: np.ndarray
    gt_block: np.ndarray
    metadata: dict


def _kind_counts(n: int, mix: tuple[float, float, float]) -> list[int]:
    if len(mix) != 3 or any(m < 0 for m in mix) or abs(sum(mix) - 1.0) > 1e-9:
        raise ValueError(f"mix proportions must be >= 0 and sum to 1, got {mix}")
    raw = [n * m for m in mix]
    counts = [int(np.floor(r)) for r in raw]
    # Largest-remainder rounding keeps the total exactly n.
    remainders = sorted(range(3), key=lambda i: (-(raw[i] - counts[i]), i))
    for i in range(n - sum(counts)):
        counts[remainders[i % 3]] += 1
    return counts


def make_dataset(n: int = 60, mesh: MeshSpec = MeshSpec(),
                 mix: tuple[float, float, float] = (1 / 3, 1 / 3, 1 / 3),
                 seed: int = 0) -> list[DatasetItem]:
    """Deterministic dataset of defective mesh images.

    mix gives the (broken, block, mixed) proportions. Every image gets
    its own derived seed, so regenerating with the same arguments is
    bitwise identical.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    counts = _kind_counts(n, mix)
    kinds = ["broken"] * counts[0] + ["block"] * counts[1] + ["mixed"] * counts[2]
    rng = np.random.default_rng(seed)
    items = []
    for index, kind in enumerate(kinds):
        for attempt in range(50):
            img_seed = int(rng.integers(0, 2 ** 31))
            if kind == "broken":
                spec = DefectSpec(kind="broken", extent=int(rng.integers(12, 29)),
                                  count=int(rng.integers(1, 3)))
            elif kind == "block":
                spec = DefectSpec(kind="block", extent=int(rng.integers(10, 19)),
                                  count=int(rng.integers(1, 3)))
            else:
                spec = DefectSpec(kind="mixed", extent=int(rng.integers(12, 21)),
                                  count=2)
            try:
                image, gt_broken, gt_block = generate(replace(mesh, seed=img_seed), spec)
                break
            except ValueError:
                continue
        else:
            raise RuntimeError(f"failed to place defects for image {index}")
        items.append(DatasetItem(
            image=image, gt_broken=gt_broken, gt_block=gt_block,
            metadata={
                "index": index, "kind": kind, "seed": img_seed,
                "extent": spec.extent, "count": spec.count,
                **{k: v for k, v in asdict(mesh).items() if k != "seed"},
            },
        ))
    return items


_MANIFEST_FIELDS = ("index", "kind", "seed", "extent", "count", "mesh_type",
                    "period", "line_width", "image_size", "line_intensity",
                    "background_intensity", "illumination_gradient", "noise_sigma")


def write_dataset(items: list[DatasetItem], out_dir: str) -> None:
    """Write images/, gt_broken/, gt_block/ and a manifest.csv."""
    for sub in ("images", "gt_broken", "gt_block"):
        os.makedirs(os.path.join(out_dir, sub), exist_ok=True)
    for item in items:
        name = f"img_{item.metadata['index']:03d}.png"
        save_gray(item.image, os.path.join(out_dir, "images", name))
        save_mask(item.gt_broken, os.path.join(out_dir, "gt_broken", name))
        save_mask(item.gt_block, os.path.join(out_dir, "gt_block", name))
    with open(os.path.join(out_dir, "manifest.csv"), "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=_MANIFEST_FIELDS)
        writer.writeheader()
        for item in items:
            writer.writerow({k: item.metadata[k] for k in _MANIFEST_FIELDS})


def load_dataset(in_dir: str) -> list[DatasetItem]:
    """Read back a dataset directory written by write_dataset."""
    manifest = os.path.join(in_dir, "manifest.csv")
    if not os.path.isfile(manifest):
        raise FileNotFoundError(f"no manifest.csv under {in_dir!r}")
    items = []
    with open(manifest, newline="") as fh:
        for row in csv.DictReader(fh):
            name = f"img_{int(row['index']):03d}.png"
            items.append(DatasetItem(
                image=load_gray(os.path.join(in_dir, "images", name)),
                gt_broken=load_mask(os.path.join(in_dir, "gt_broken", name)),
                gt_block=load_mask(os.path.join(in_dir, "gt_block", name)),
                metadata={
                    "index": int(row["index"]), "kind": row["kind"],
                    "seed": int(row["seed"]), "extent": int(row["extent"]),
                    "count": int(row["count"]), "mesh_type": row["mesh_type"],
                    "period": int(row["period"]),
                    "line_width": int(row["line_width"]),
                    "image_size": int(row["image_size"]),
                    "line_intensity": float(row["line_intensity"]),
                    "background_intensity": float(row["background_intensity"]),
                    "illumination_gradient": float(row["illumination_gradient"]),
                    "noise_sigma": float(row["noise_sigma"]),
                },
            ))
    return items
