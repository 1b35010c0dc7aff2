"""Chaos-theoretic descriptors of radial boundary signals.

LE is the Rosenstein divergence-rate estimate at embedding dimension 3 and
delay 1. A scalar contour signal gives no access to a full Lyapunov
spectrum, so LLE is taken as the largest Rosenstein estimate over a small
set of embedding dimensions (default 2..5).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import astuple, dataclass

import numpy as np

from .errors import (
    DegeneratePointSet,
    InsufficientBoundary,
    NoValidNeighbors,
    SignalTooShort,
)
from .imaging import radial_signal, trace_contour

DEFAULT_M_SET = (2, 3, 4, 5)
MIN_CONTOUR_POINTS = 32
DEFAULT_PERIOD = 10
_BLOCK = 512


@dataclass(frozen=True)
class NonlinearFeatures:
    bcd: float
    lle: float
    le: float
    apen: float

    NAMES = ("bcd", "lle", "le", "apen")

    def as_array(self) -> np.ndarray:
        return np.array(astuple(self), dtype=np.float64)


def delay_embed(signal, m: int, tau: int) -> np.ndarray:
    """Time-delay embedding; row ``i`` is ``signal[i], signal[i+tau], ...``.

    Returns an array of shape ``(N - (m-1)*tau, m)``.
    """
    x = np.asarray(signal, dtype=np.float64).ravel()
    if m < 1 or tau < 1:
        raise ValueError(f"m and tau must be >= 1 (got m={m}, tau={tau})")
    count = len(x) - (m - 1) * tau
    if count < 1:
        raise SignalTooShort(f"N={len(x)} too short for m={m}, tau={tau}")
    cols = [x[j * tau : j * tau + count] for j in range(m)]
    return np.stack(cols, axis=1)


def mean_period(signal, default: int = DEFAULT_PERIOD) -> int:
    """Mean period from zero crossings of the mean-removed signal."""
    x = np.asarray(signal, dtype=np.float64)
    s = np.sign(x - x.mean())
    s = s[s != 0]
    crossings = int(np.count_nonzero(s[1:] != s[:-1]))
    if crossings < 2:
        return default
    return int(math.ceil(2.0 * len(x) / crossings))


def _nearest_neighbors(Y: np.ndarray, min_tsep: int, tiny: float) -> np.ndarray:
    """Index of each row's nearest neighbour with |i-j| > min_tsep, or -1."""
    M = len(Y)
    nn = np.full(M, -1, dtype=np.int64)
    cols = np.arange(M)
    for a in range(0, M, _BLOCK):
        b = min(a + _BLOCK, M)
        d2 = np.zeros((b - a, M))
        for k in range(Y.shape[1]):
            d2 += (Y[a:b, k, None] - Y[None, :, k]) ** 2
        rows = np.arange(a, b)
        d2[np.abs(rows[:, None] - cols[None, :]) <= min_tsep] = np.inf
        d2[d2 <= tiny] = np.inf
        j = np.argmin(d2, axis=1)
        ok = np.isfinite(d2[np.arange(b - a), j])
        nn[a:b][ok] = j[ok]
    return nn


def default_fit_window(n: int) -> tuple[int, int]:
    return 1, max(2, min(20, n // 10))


def divergence_curve(signal, m: int = 3, tau: int = 1, t_max: int = 20,
                     min_tsep: int | None = None) -> np.ndarray:
    """Mean log separation <ln d_i(t)> of nearest-neighbour pairs, t = 0..t_max.

    Entries where no pair survives are NaN.
    """
    x = np.asarray(signal, dtype=np.float64).ravel()
    Y = delay_embed(x, m, tau)
    M = len(Y)
    if M < 2:
        raise SignalTooShort(f"need at least 2 embedded vectors, got {M}")
    if min_tsep is None:
        min_tsep = mean_period(x)
    scale = float(np.max(np.abs(x - x.mean()))) if len(x) else 0.0
    tiny = (1e-12 * scale) ** 2
    nn = _nearest_neighbors(Y, min_tsep, tiny)
    i = np.nonzero(nn >= 0)[0]
    if len(i) == 0:
        raise NoValidNeighbors(
            f"no neighbour pairs with separation > {min_tsep} samples and non-zero distance"
        )
    j = nn[i]
    curve = np.full(t_max + 1, np.nan)
    for t in range(t_max + 1):
        keep = (i + t < M) & (j + t < M)
        if not keep.any():
            break
        d = np.sqrt(((Y[i[keep] + t] - Y[j[keep] + t]) ** 2).sum(axis=1))
        d = d[d > 0]
        if len(d):
            curve[t] = np.log(d).mean()
    return curve


def lyapunov_estimate(signal, m: int = 3, tau: int = 1,
                      fit_window: tuple[int, int] | None = None,
                      min_tsep: int | None = None) -> float:
    """Rosenstein largest-Lyapunov estimate in nats per sample.

    Least-squares slope of the mean log-divergence curve over
    ``fit_window = (t_first, t_last)`` (inclusive). Neighbours closer in
    time than the mean period are excluded.
    """
    x = np.asarray(signal, dtype=np.float64).ravel()
    if fit_window is None:
        fit_window = default_fit_window(len(x))
    t0, t1 = fit_window
    if t0 < 0 or t1 <= t0:
        raise ValueError(f"bad fit window {fit_window}")
    curve = divergence_curve(x, m, tau, t1, min_tsep)
    ts = np.arange(t0, t1 + 1)
    ys = curve[t0 : t1 + 1]
    ok = np.isfinite(ys)
    if ok.sum() < 2:
        raise NoValidNeighbors("divergence curve has fewer than 2 finite points in the fit window")
    slope = np.polyfit(ts[ok], ys[ok], 1)[0]
    return float(slope)


def lle(signal, tau: int = 1, m_set=DEFAULT_M_SET,
        fit_window: tuple[int, int] | None = None) -> float:
    """Largest Rosenstein estimate over the embedding dimensions in ``m_set``."""
    ms = sorted(set(m_set))
    if not ms:
        raise ValueError("m_set is empty")
    return max(lyapunov_estimate(signal, m, tau, fit_window) for m in ms)


def _phi(x: np.ndarray, m: int, r: float) -> float:
    T = delay_embed(x, m, 1)
    n = len(T)
    counts = np.empty(n)
    for a in range(0, n, _BLOCK):
        b = min(a + _BLOCK, n)
        d = np.abs(T[a:b, None, :] - T[None, :, :]).max(axis=2)
        counts[a:b] = np.count_nonzero(d <= r, axis=1)
    return float(np.mean(np.log(counts / n)))


def approx_entropy(signal, m: int = 2, r_factor: float = 0.2) -> float:
    """Approximate entropy with tolerance ``r_factor`` times the population std.

    Self-matches are counted, so every template matches at least itself.
    A constant signal returns 0.
    """
    x = np.asarray(signal, dtype=np.float64).ravel()
    if m < 1:
        raise ValueError("m must be >= 1")
    if len(x) < m + 2:
        raise SignalTooShort(f"approximate entropy needs N >= m+2 = {m + 2}, got {len(x)}")
    sd = float(np.std(x))
    if sd == 0.0:
        return 0.0
    r = r_factor * sd
    return _phi(x, m, r) - _phi(x, m + 1, r)


def default_scales() -> np.ndarray:
    return 2.0 ** -np.arange(1, 9)


def box_counts(offsets: np.ndarray, size: float, n_cells: int | None = None) -> int:
    """Number of grid boxes of edge ``size`` (anchored at 0) holding a point."""
    idx = np.floor(offsets / size).astype(np.int64)
    if n_cells is not None:
        np.clip(idx, 0, n_cells - 1, out=idx)
    key = idx[:, 0] * (int(idx[:, 1].max()) + 1) + idx[:, 1]
    return len(np.unique(key))


def _fit_dimension(counts, inv_eps) -> float:
    slope = float(np.polyfit(np.log(inv_eps), np.log(counts), 1)[0])
    if not 0.0 <= slope <= 2.0:
        warnings.warn(f"box-counting slope {slope:.4f} outside [0, 2]; clamped", RuntimeWarning)
        slope = min(max(slope, 0.0), 2.0)
    return slope


def box_counting_dim(points, scales=None) -> float:
    """Box-counting dimension of a planar point set.

    Points are mapped into the unit square anchored at the bounding-box
    corner (uniform scaling by the larger side), then boxes of each edge
    length in ``scales`` are counted. Default scales are 2**-k, k = 1..8.
    """
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ValueError("points must have shape (n, 2)")
    lo = pts.min(axis=0)
    extent = float((pts.max(axis=0) - lo).max()) if len(pts) else 0.0
    if extent == 0.0:
        raise DegeneratePointSet("need at least 2 distinct points")
    eps = default_scales() if scales is None else np.asarray(scales, dtype=np.float64)
    if len(eps) < 4:
        raise ValueError(f"need at least 4 scales, got {len(eps)}")
    if np.any(eps <= 0) or np.any(eps > 1):
        raise ValueError("scales must lie in (0, 1]")
    u = (pts - lo) / extent
    counts = [box_counts(u, e, int(math.ceil(1.0 / e))) for e in eps]
    return _fit_dimension(np.asarray(counts, dtype=np.float64), 1.0 / eps)


def contour_polyline(contour, per_edge: int = 8) -> np.ndarray:
    """Sample the closed polygon through the contour pixels ``per_edge`` times per edge.

    Box counting a bare pixel list saturates once boxes shrink below the
    pixel pitch; the densified polyline keeps the curve connected at every
    default scale.
    """
    p = np.asarray(contour, dtype=np.float64)
    q = np.roll(p, -1, axis=0)
    t = np.arange(per_edge) / per_edge
    return (p[:, None, :] + t[None, :, None] * (q - p)[:, None, :]).reshape(-1, 2)


def extract_features(mask, m_set=DEFAULT_M_SET,
                     fit_window: tuple[int, int] | None = None) -> NonlinearFeatures:
    contour = trace_contour(mask)
    if len(contour) < MIN_CONTOUR_POINTS:
        raise InsufficientBoundary(
            f"contour has {len(contour)} points, need at least {MIN_CONTOUR_POINTS}"
        )
    sig = radial_signal(contour).values
    le = lyapunov_estimate(sig, 3, 1, fit_window)
    others = [lyapunov_estimate(sig, m, 1, fit_window) for m in sorted(set(m_set)) if m != 3]
    lle_val = max([le] + others) if 3 in m_set else max(others)
    return NonlinearFeatures(
        bcd=box_counting_dim(contour_polyline(contour)),
        lle=float(lle_val),
        le=le,
        apen=approx_entropy(sig, 2, 0.2),
    )
