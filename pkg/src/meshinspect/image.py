"""Grayscale image I/O, binarization and binary morphology.

Images are 2-D float64 arrays with intensities nominally in [0, 1];
masks are 2-D bool arrays. All functions are pure and safe to call
concurrently.
"""

import os

import numpy as np
from PIL import Image


def as_gray(data) -> np.ndarray:
    """Validate and return a 2-D float64 intensity array."""
    arr = np.asarray(data, dtype=np.float64)
    if arr.ndim != 2 or arr.size == 0:
        raise ValueError(f"expected a non-empty 2-D intensity array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("image contains non-finite values")
    return arr


def as_mask(data) -> np.ndarray:
    """Validate and return a 2-D bool mask array."""
    arr = np.asarray(data)
    if arr.ndim != 2 or arr.size == 0:
        raise ValueError(f"expected a non-empty 2-D mask array, got shape {arr.shape}")
    if arr.dtype != np.bool_:
        uniq = np.unique(arr)
        if not np.all(np.isin(uniq, (0, 1))):
            raise ValueError("mask values must be 0 or 1")
        arr = arr.astype(bool)
    return arr


def _read_pgm(path: str) -> np.ndarray:
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:2] != b"P5":
        raise ValueError(f"unsupported format: {path!r} is not a binary PGM (P5)")
    # Header tokens: magic, width, height, maxval; '#' starts a comment.
    tokens = []
    pos = 2
    while len(tokens) < 3:
        while pos < len(raw) and raw[pos : pos + 1].isspace():
            pos += 1
        if pos < len(raw) and raw[pos : pos + 1] == b"#":
            while pos < len(raw) and raw[pos : pos + 1] != b"\n":
                pos += 1
            continue
        start = pos
        while pos < len(raw) and not raw[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise ValueError(f"truncated PGM header in {path!r}")
        tokens.append(raw[start:pos])
    pos += 1  # single whitespace byte after maxval
    width, height, maxval = (int(t) for t in tokens)
    if maxval != 255:
        raise ValueError(f"unsupported format: PGM maxval {maxval}, expected 255")
    if width <= 0 or height <= 0:
        raise ValueError(f"zero-sized image in {path!r}")
    pixels = np.frombuffer(raw, dtype=np.uint8, count=width * height, offset=pos)
    if pixels.size != width * height:
        raise ValueError(f"truncated PGM pixel data in {path!r}")
    return pixels.reshape(height, width).copy()


def _write_pgm(arr_u8: np.ndarray, path: str) -> None:
    h, w = arr_u8.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(arr_u8.tobytes())


def load_gray(path: str) -> np.ndarray:
    """Load an 8-bit grayscale PGM (P5) or PNG as intensities in [0, 1].

    Raises FileNotFoundError for missing files and ValueError for
    unsupported formats (color, palette or >8-bit images) or
    zero-sized images.
    """
    if not os.path.isfile(path):
        raise FileNotFoundError(f"no such image file: {path!r}")
    if path.lower().endswith((".pgm", ".pnm")):
        pixels = _read_pgm(path)
    else:
        with Image.open(path) as im:
            if im.format not in ("PNG", "PPM"):
                raise ValueError(f"unsupported format: {im.format} in {path!r}")
            if im.mode != "L":
                raise ValueError(
                    f"unsupported format: mode {im.mode} in {path!r}, "
                    "expected 8-bit single-channel"
                )
            pixels = np.asarray(im, dtype=np.uint8)
    if pixels.size == 0:
        raise ValueError(f"zero-sized image: {path!r}")
    return pixels.astype(np.float64) / 255.0


def save_gray(img: np.ndarray, path: str) -> None:
    """Write intensities clamped to [0, 1] as an 8-bit PGM or PNG.

    Quantization rounds half up, so a reload differs from the clamped
    input by at most 1/255 per pixel.
    """
    arr = as_gray(img)
    arr_u8 = np.floor(np.clip(arr, 0.0, 1.0) * 255.0 + 0.5).astype(np.uint8)
    tmp = path + ".tmp"
    try:
        if path.lower().endswith((".pgm", ".pnm")):
            _write_pgm(arr_u8, tmp)
        else:
            Image.fromarray(arr_u8, mode="L").save(tmp, format="PNG")
        os.replace(tmp, path)
    except OSError:
        if os.path.exists(tmp):
            os.remove(tmp)
        raise


def save_mask(mask: np.ndarray, path: str) -> None:
    """Write a binary mask as a PNG with values exactly 0 or 255."""
    save_gray(as_mask(mask).astype(np.float64), path)


def load_mask(path: str) -> np.ndarray:
    """Load a 0/255 mask image back into a bool array."""
    arr = load_gray(path)
    if not np.all((arr == 0.0) | (arr == 1.0)):
        raise ValueError(f"mask file {path!r} contains values other than 0 and 255")
    return arr.astype(bool)


def quantize_u8(img: np.ndarray) -> np.ndarray:
    """8-bit quantization used by save_gray and the Otsu histogram."""
    return np.floor(np.clip(as_gray(img), 0.0, 1.0) * 255.0 + 0.5).astype(np.uint8)


def otsu_histogram(img: np.ndarray) -> tuple[np.ndarray, float, float]:
    """256-bin histogram over the image's own value range."""
    arr = as_gray(img)
    lo, hi = float(arr.min()), float(arr.max())
    if hi == lo:
        raise ValueError("degenerate histogram: image has a single intensity level")
    idx = np.minimum(((arr - lo) * (256.0 / (hi - lo))).astype(np.int64), 255)
    hist = np.bincount(idx.ravel(), minlength=256).astype(np.float64)
    return hist, lo, hi


def otsu_threshold(img: np.ndarray) -> float:
    """Threshold maximizing between-class variance on a 256-bin histogram.

    The histogram spans the image's min-max range; the returned
    threshold is the upper edge of the winning bin, so `value > t`
    reproduces the winning class split exactly. Ties are broken by the
    lowest bin. Raises ValueError on constant images.
    """
    hist, lo, hi = otsu_histogram(img)
    total = hist.sum()
    omega0 = np.cumsum(hist) / total               # mass of class {bin <= k}
    mu = np.cumsum(hist * np.arange(256)) / total  # cumulative first moment
    mu_total = mu[-1]
    omega1 = 1.0 - omega0
    with np.errstate(divide="ignore", invalid="ignore"):
        between = (mu_total * omega0 - mu) ** 2 / (omega0 * omega1)
    between[~np.isfinite(between)] = -1.0
    k = int(np.argmax(between))  # argmax takes the lowest index on ties
    return lo + (k + 1) * (hi - lo) / 256.0


def binarize(img: np.ndarray, t: float, polarity: str = "above") -> np.ndarray:
    """Threshold an image into a mask.

    polarity="above" marks pixels with value > t, "below" marks
    value <= t; the two calls partition every pixel.
    """
    arr = as_gray(img)
    if not np.isfinite(t):
        raise ValueError("threshold must be finite")
    if polarity == "above":
        return arr > t
    if polarity == "below":
        return arr <= t
    raise ValueError(f"polarity must be 'above' or 'below', got {polarity!r}")


def dilate(mask: np.ndarray, radius: int) -> np.ndarray:
    """Dilate with a square structuring element of side 2*radius + 1.

    Output is 1 wherever an input 1 lies within Chebyshev distance
    radius; radius 0 is the identity.
    """
    m = as_mask(mask)
    if radius < 0:
        raise ValueError("radius must be >= 0")
    if radius == 0 or not m.any():
        return m.copy()
    out = m.copy()
    # Separable: a square kernel is a horizontal run then a vertical run.
    for axis in (0, 1):
        acc = out.copy()
        for shift in range(1, radius + 1):
            acc[_shifted_slice(axis, shift)] |= out[_shifted_slice(axis, -shift)]
            acc[_shifted_slice(axis, -shift)] |= out[_shifted_slice(axis, shift)]
        out = acc
    return out


def _shifted_slice(axis: int, shift: int):
    sl = slice(shift, None) if shift >= 0 else slice(None, shift)
    return (sl, slice(None)) if axis == 0 else (slice(None), sl)


def mask_union(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Elementwise logical OR of two same-shaped masks."""
    ma, mb = as_mask(a), as_mask(b)
    if ma.shape != mb.shape:
        raise ValueError(f"mask dimension mismatch: {ma.shape} vs {mb.shape}")
    return ma | mb


def normalize(img: np.ndarray) -> np.ndarray:
    """Affinely rescale an image to span [0, 1]; constant images map to 0."""
    arr = as_gray(img)
    lo, hi = arr.min(), arr.max()
    if hi == lo:
        return np.zeros_like(arr)
    return (arr - lo) / (hi - lo)
