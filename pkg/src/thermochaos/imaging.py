"""Image preprocessing, contour tracing and radial-signal construction.

Images and masks are plain 2-D numpy arrays indexed ``[row, col]``.
Contours are ``(n, 2)`` integer arrays of ``(x, y)`` = ``(col, row)`` pixel
coordinates, ordered along the boundary.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import ConstantImage, DegenerateContour, EmptyMask

# Neighbour offsets (dx, dy), counter-clockwise as displayed (row axis down),
# starting at east.
_CCW = np.array(
    [(1, 0), (1, -1), (0, -1), (-1, -1), (-1, 0), (-1, 1), (0, 1), (1, 1)],
    dtype=np.int64,
)
_NORTH = 2
_EIGHT = np.ones((3, 3), dtype=bool)


@dataclass(frozen=True)
class RadialSignal:
    values: np.ndarray
    centroid: tuple[float, float]

    def __len__(self) -> int:
        return len(self.values)


@dataclass(frozen=True)
class BBox:
    """Inclusive-exclusive pixel box: columns ``x0:x1``, rows ``y0:y1``."""

    x0: int
    y0: int
    x1: int
    y1: int

    @property
    def width(self) -> int:
        return self.x1 - self.x0

    @property
    def height(self) -> int:
        return self.y1 - self.y0


def normalize_minmax(img) -> np.ndarray:
    """Linearly rescale intensities onto [0, 1].

    Raises ConstantImage when the image has a single distinct value.
    """
    x = np.asarray(img, dtype=np.float64)
    if x.size == 0:
        raise ValueError("image is empty")
    lo, hi = x.min(), x.max()
    if hi == lo:
        raise ConstantImage(f"image is constant ({lo!r}); min-max scaling undefined")
    out = (x - lo) / (hi - lo)
    # pin the extremes so that min == 0 and max == 1 hold exactly
    out[x == lo] = 0.0
    out[x == hi] = 1.0
    return out


def _axis_coords(n_in: int, n_out: int):
    # corner-aligned: output sample 0 hits input 0, sample n_out-1 hits n_in-1
    if n_out == 1:
        pos = np.array([(n_in - 1) / 2.0])
    else:
        pos = np.arange(n_out) * ((n_in - 1) / (n_out - 1))
    if n_in == 1:
        zero = np.zeros(n_out, dtype=np.int64)
        return zero, zero, np.zeros(n_out)
    i0 = np.clip(np.floor(pos).astype(np.int64), 0, n_in - 2)
    frac = pos - i0
    return i0, i0 + 1, frac


def resize_bilinear(img, w: int, h: int) -> np.ndarray:
    """Bilinear resize to ``h`` rows by ``w`` columns.

    Uses corner-aligned sampling: the four corner pixels of the output
    coincide with the corner pixels of the input. A single output row or
    column samples the middle of the input.
    """
    if w < 1 or h < 1:
        raise ValueError(f"target size must be positive, got {w}x{h}")
    x = np.asarray(img, dtype=np.float64)
    if x.ndim != 2 or x.size == 0:
        raise ValueError("expected a non-empty 2-D image")
    if x.shape == (h, w):
        return x.copy()
    r0, r1, fr = _axis_coords(x.shape[0], h)
    c0, c1, fc = _axis_coords(x.shape[1], w)
    top = x[r0][:, c0] + fc * (x[r0][:, c1] - x[r0][:, c0])
    bot = x[r1][:, c0] + fc * (x[r1][:, c1] - x[r1][:, c0])
    out = top + fr[:, None] * (bot - top)
    # rounding in the lerp can step one ulp past the input range
    return np.clip(out, x.min(), x.max())


def largest_component(mask) -> np.ndarray:
    """Boolean mask of the largest 8-connected foreground component.

    Ties go to the component whose top-most, left-most pixel comes first in
    raster order.
    """
    m = np.asarray(mask, dtype=bool)
    if not m.any():
        raise EmptyMask("mask has no foreground pixels")
    labels, n = ndimage.label(m, structure=_EIGHT)
    if n == 1:
        return labels == 1
    sizes = np.bincount(labels.ravel())[1:]
    # first occurrence in raster order of each label is its start pixel
    flat = labels.ravel()
    _, first = np.unique(flat, return_index=True)
    starts = first[1:] if flat[first[0]] == 0 else first
    best = sorted(range(n), key=lambda k: (-sizes[k], starts[k]))[0]
    return labels == best + 1


def _next_pixel(padded, p, scan_from):
    for i in range(8):
        idx = (scan_from + i) % 8
        q = (p[0] + _CCW[idx, 0], p[1] + _CCW[idx, 1])
        if padded[q[1], q[0]]:
            return q, idx
    return None, None


def trace_contour(mask) -> np.ndarray:
    """Moore-neighbour trace of the largest 8-connected component.

    The walk starts at the top-most, then left-most foreground pixel and
    runs counter-clockwise as displayed (down the left flank first). Stops
    on Jacob's criterion: back at the start about to repeat the first move.
    """
    comp = largest_component(mask)
    padded = np.pad(comp, 1, constant_values=False)
    rows, cols = np.nonzero(padded)
    start = (int(cols[0]), int(rows[0]))  # nonzero is raster ordered

    first, idx = _next_pixel(padded, start, _NORTH)
    if first is None:
        return np.array([[start[0] - 1, start[1] - 1]], dtype=np.int64)

    points = [start]
    p = first
    while True:
        nxt, nidx = _next_pixel(padded, p, (idx + 5) % 8)
        if p == start and nxt == first:
            break
        points.append(p)
        p, idx = nxt, nidx
    return np.asarray(points, dtype=np.int64) - 1


def centroid(contour) -> tuple[float, float]:
    """Arithmetic mean of the contour points."""
    pts = np.asarray(contour, dtype=np.float64)
    if pts.ndim != 2 or len(pts) == 0:
        raise DegenerateContour("contour has no points")
    c = pts.mean(axis=0)
    return float(c[0]), float(c[1])


def radial_signal(contour) -> RadialSignal:
    """Distances from each contour point to the contour centroid, in order."""
    pts = np.asarray(contour, dtype=np.float64)
    if pts.ndim != 2 or len(pts) < 3:
        raise DegenerateContour(f"need at least 3 contour points, got {len(pts)}")
    cx, cy = centroid(pts)
    values = np.hypot(pts[:, 0] - cx, pts[:, 1] - cy)
    return RadialSignal(values=values, centroid=(cx, cy))


def roi_bbox(mask, pad: int = 0) -> BBox:
    """Tight foreground box grown by ``pad`` pixels and clamped to the image."""
    m = np.asarray(mask, dtype=bool)
    if not m.any():
        raise EmptyMask("mask has no foreground pixels")
    if pad < 0:
        raise ValueError("pad must be non-negative")
    rows = np.nonzero(m.any(axis=1))[0]
    cols = np.nonzero(m.any(axis=0))[0]
    h, w = m.shape
    return BBox(
        x0=max(int(cols[0]) - pad, 0),
        y0=max(int(rows[0]) - pad, 0),
        x1=min(int(cols[-1]) + 1 + pad, w),
        y1=min(int(rows[-1]) + 1 + pad, h),
    )


def crop_roi(img, mask, pad: int = 0) -> np.ndarray:
    x = np.asarray(img)
    if x.shape != np.shape(mask):
        raise ValueError(f"image shape {x.shape} != mask shape {np.shape(mask)}")
    b = roi_bbox(mask, pad)
    return x[b.y0:b.y1, b.x0:b.x1].copy()
