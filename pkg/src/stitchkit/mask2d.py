"""Binary masks and rasters.

Masks are 2D boolean arrays and rasters 2D float arrays, both indexed
``[row, col]``. Pixel coordinates are ``(row, col)`` tuples throughout. A
depth value of 0 or a non-finite value marks an invalid pixel.
"""

import numpy as np

from . import kernels
from .errors import DimensionMismatch, NoContrast, NoEndpoint

_RING = ((-1, 0), (-1, 1), (0, 1), (1, 1), (1, 0), (1, -1), (0, -1), (-1, -1))


def valid_depth(raster):
    r = np.asarray(raster, dtype=float)
    return np.isfinite(r) & (r != 0)


def flood_fill_average(image, mask):
    """Replace every masked pixel with the mean of the masked pixels."""
    image = np.asarray(image, dtype=float)
    mask = np.asarray(mask, dtype=bool)
    if image.shape != mask.shape:
        raise DimensionMismatch(f"image {image.shape} vs mask {mask.shape}")
    out = image.copy()
    if mask.any():
        out[mask] = image[mask].mean()
    return out


def skeletonize(mask):
    """Zhang-Suen thinning to a one-pixel-wide 8-connected skeleton.

    Candidates are committed in raster order and re-checked against the
    partially thinned image, which keeps every 8-connected component intact
    (the textbook parallel pass erases 2x2 blocks).
    """
    mask = np.asarray(mask, dtype=bool)
    if mask.ndim != 2:
        raise DimensionMismatch(f"mask must be 2D, got shape {mask.shape}")
    if not mask.any():
        return mask.copy()
    return kernels.zhang_suen(mask)


def otsu_threshold(values):
    """Exact Otsu split over the distinct values of a 1D sample.

    Returns the largest value of the lower class. Every boundary between
    consecutive distinct values is scored; ties go to the first boundary.
    """
    v = np.sort(np.asarray(values, dtype=float).ravel())
    uniq, counts = np.unique(v, return_counts=True)
    if len(uniq) < 2:
        raise NoContrast("need at least two distinct values")
    w = counts.astype(float)
    total = w.sum()
    w0 = np.cumsum(w)[:-1]
    s0 = np.cumsum(w * uniq)[:-1]
    mu0 = s0 / w0
    mu1 = ((w * uniq).sum() - s0) / (total - w0)
    between = w0 * (total - w0) * (mu0 - mu1) ** 2
    return float(uniq[int(np.argmax(between))])


def adaptive_depth_threshold(crop):
    """Otsu-threshold the valid depths and keep the nearer class."""
    crop = np.asarray(crop, dtype=float)
    valid = valid_depth(crop)
    t = otsu_threshold(crop[valid])
    out = np.zeros(crop.shape, dtype=bool)
    out[valid] = crop[valid] <= t
    return out


def neighbour_count(mask):
    """Number of 8-neighbours set, for every pixel."""
    m = np.pad(np.asarray(mask, dtype=np.uint8), 1)
    h, w = m.shape[0] - 2, m.shape[1] - 2
    total = np.zeros((h, w), dtype=np.uint8)
    for dr, dc in _RING:
        total += m[1 + dr:1 + dr + h, 1 + dc:1 + dc + w]
    return total


def skeleton_endpoints(skeleton):
    """Foreground pixels with exactly one 8-neighbour, in raster order."""
    sk = np.asarray(skeleton, dtype=bool)
    ends = sk & (neighbour_count(sk) == 1)
    return [tuple(int(x) for x in rc) for rc in np.argwhere(ends)]


def tip_pixel(skeleton, hint):
    """Skeleton endpoint closest to ``hint`` (row, col)."""
    ends = skeleton_endpoints(skeleton)
    if not ends:
        raise NoEndpoint("skeleton has no endpoint")
    hr, hc = float(hint[0]), float(hint[1])
    return min(ends, key=lambda rc: ((rc[0] - hr) ** 2 + (rc[1] - hc) ** 2, rc))


def crop_window(shape, center, size):
    """Row/col slices of a ``size`` x ``size`` window around ``center``.

    The window is shifted, not shrunk, to stay inside the image when
    possible.
    """
    h, w = shape
    out = []
    for c, n in ((center[0], h), (center[1], w)):
        s = min(size, n)
        start = int(round(c)) - s // 2
        start = max(0, min(start, n - s))
        out.append(slice(start, start + s))
    return tuple(out)
