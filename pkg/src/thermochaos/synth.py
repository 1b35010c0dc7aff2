"""Ground-truth generators for the estimators.

Everything here is a test corpus: fractals with known dimension, maps with
known Lyapunov exponents, and smooth ("benign") versus rough ("malignant")
star-shaped lesions. The lesion recipes are an invented construction, not a
model of real tumours.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import Divergence, InvalidParams, LevelOutOfRange, SelfIntersection
from .imaging import radial_signal, trace_contour
from .nonlinear import extract_features

BENIGN = "benign"
MALIGNANT = "malignant"


def koch_curve(level: int) -> np.ndarray:
    """Vertices of the Koch curve on the unit segment (0,0)-(1,0).

    Returns ``4**level + 1`` points; bumps point towards +y.
    """
    if not 0 <= level <= 8:
        raise LevelOutOfRange(f"level must be in 0..8, got {level}")
    pts = np.array([[0.0, 0.0], [1.0, 0.0]])
    h = math.sqrt(3.0) / 6.0
    for _ in range(level):
        p, q = pts[:-1], pts[1:]
        d = q - p
        normal = np.stack([-d[:, 1], d[:, 0]], axis=1)
        a = p + d / 3.0
        peak = p + d / 2.0 + h * normal
        b = p + 2.0 * d / 3.0
        new = np.empty((4 * len(p) + 1, 2))
        new[0:-1:4] = p
        new[1::4] = a
        new[2::4] = peak
        new[3::4] = b
        new[-1] = pts[-1]
        pts = new
    return pts


def logistic_series(r: float, n: int, x0: float = 0.1234, burn_in: int = 100) -> np.ndarray:
    """Orbit of x -> r x (1 - x) after discarding ``burn_in`` iterates."""
    if not (0.0 < r <= 4.0) or not (0.0 < x0 < 1.0) or n < 1 or burn_in < 0:
        raise InvalidParams(f"invalid logistic parameters r={r}, x0={x0}, n={n}, burn_in={burn_in}")
    out = np.empty(n)
    x = x0
    for _ in range(burn_in):
        x = r * x * (1.0 - x)
    for k in range(n):
        x = r * x * (1.0 - x)
        out[k] = x
    return out


def henon_series(n: int, a: float = 1.4, b: float = 0.3, burn_in: int = 100,
                 x0: float = 0.1, y0: float = 0.1) -> np.ndarray:
    """x-coordinate of the Henon map x' = 1 - a x^2 + y, y' = b x."""
    if n < 1 or burn_in < 0:
        raise InvalidParams("n must be >= 1 and burn_in >= 0")
    out = np.empty(n)
    x, y = x0, y0
    for k in range(burn_in + n):
        x, y = 1.0 - a * x * x + y, b * x
        if abs(x) > 1e6:
            raise Divergence(f"Henon orbit diverged at iterate {k}")
        if k >= burn_in:
            out[k - burn_in] = x
    return out


def white_noise(n: int, seed: int) -> np.ndarray:
    """Gaussian noise rescaled to exactly zero mean and unit population std."""
    if n < 2:
        raise InvalidParams("n must be >= 2")
    x = np.random.default_rng(seed).standard_normal(n)
    x -= x.mean()
    return x / x.std()


def sine(n: int, period: float, amplitude: float = 1.0, phase: float = 0.0) -> np.ndarray:
    """Samples of a sine; exactly periodic when ``period`` is an integer."""
    if n < 1 or period <= 0:
        raise InvalidParams("n must be >= 1 and period > 0")
    k = np.mod(np.arange(n, dtype=np.float64), period)
    return amplitude * np.sin(2.0 * np.pi * k / period + phase)


@dataclass(frozen=True)
class ContourParams:
    class_kind: str = BENIGN
    base_radius: float = 40.0
    n_points: int = 256
    amp: float = 0.3
    spectral_decay: float = 0.8
    seed: int = 0


@dataclass(frozen=True)
class Lesion:
    """A rasterised star-shaped lesion and the radius function behind it."""

    params: ContourParams
    mask: np.ndarray
    contour: np.ndarray
    center: tuple[float, float]
    harmonics: np.ndarray = field(repr=False)
    coeffs: np.ndarray = field(repr=False)
    phases: np.ndarray = field(repr=False)
    scale: float

    def radius(self, theta) -> np.ndarray:
        return _radius(theta, self.harmonics, self.coeffs, self.phases,
                       self.scale * self.params.base_radius, self.params.amp)


def _radius(theta, k, c, phases, r0, amp):
    theta = np.asarray(theta, dtype=np.float64)
    wave = np.cos(np.multiply.outer(theta, k) + phases) @ c
    return r0 * (1.0 + amp * wave)


def _spectrum(p: ContourParams, rng: np.random.Generator):
    if p.class_kind == BENIGN:
        k = np.arange(2, 5)
        c = k ** -3.0
    elif p.class_kind == MALIGNANT:
        k = np.arange(2, p.n_points // 4 + 1)
        c = k ** -float(p.spectral_decay)
    else:
        raise InvalidParams(f"class_kind must be {BENIGN!r} or {MALIGNANT!r}, got {p.class_kind!r}")
    phases = rng.uniform(0.0, 2.0 * np.pi, size=len(k))
    return k.astype(np.float64), c / c.sum(), phases


def gen_contour(p: ContourParams) -> Lesion:
    """Rasterise r(theta) = R s (1 + amp * sum_k c_k cos(k theta + phi_k)).

    Coefficients are normalised to sum to 1, so ``amp`` bounds the relative
    radial excursion, and ``s`` rescales so every lesion has area pi R^2.
    Benign lesions use harmonics 2..4 with cubic decay; malignant ones use
    harmonics up to n_points/4 with power-law exponent ``spectral_decay``.
    """
    if p.n_points < 64 or p.base_radius <= 0 or p.amp < 0:
        raise InvalidParams(f"invalid contour parameters {p}")
    if p.amp >= 1.0:
        # with unit-sum coefficients the worst-case trough reaches r <= 0
        raise SelfIntersection(f"amp={p.amp} >= 1 admits a non-positive radius")
    rng = np.random.default_rng(p.seed)
    k, c, phases = _spectrum(p, rng)
    scale = 1.0 / math.sqrt(1.0 + 0.5 * p.amp ** 2 * float(np.sum(c ** 2)))

    r_max = scale * p.base_radius * (1.0 + p.amp)
    half = int(math.ceil(r_max)) + 3
    size = 2 * half + 1
    cx = cy = float(half)
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64)
    dx, dy = xx - cx, yy - cy
    # math-convention angle (y up) so the lesion is not mirrored on screen
    theta = np.arctan2(-dy, dx)
    rad = _radius(theta.ravel(), k, c, phases, scale * p.base_radius, p.amp).reshape(theta.shape)
    if rad.min() <= 0:
        raise SelfIntersection("radius function went non-positive")
    mask = np.hypot(dx, dy) <= rad
    contour = trace_contour(mask)
    return Lesion(params=p, mask=mask, contour=contour, center=(cx, cy),
                  harmonics=k, coeffs=c, phases=phases, scale=scale)


def lesion_corpus(n_per_class: int, seed: int = 0) -> tuple[list[Lesion], np.ndarray]:
    """Benign/malignant pairs sharing base radius and seed, hence matched area.

    Amplitudes are drawn per class from overlapping ranges, so the classes
    differ mainly in spectral content rather than in overall excursion.

    Returns lesions ordered benign_0, malignant_0, benign_1, ... and labels
    (0 benign, 1 malignant).
    """
    rng = np.random.default_rng(seed)
    lesions, labels = [], []
    for _ in range(n_per_class):
        radius = float(rng.uniform(30.0, 50.0))
        s = int(rng.integers(0, 2**31 - 1))
        benign = ContourParams(BENIGN, radius, 256, float(rng.uniform(0.05, 0.25)), 3.0, s)
        malignant = ContourParams(MALIGNANT, radius, 256, float(rng.uniform(0.15, 0.35)),
                                  float(rng.uniform(0.5, 1.0)), s)
        lesions += [gen_contour(benign), gen_contour(malignant)]
        labels += [0, 1]
    return lesions, np.asarray(labels, dtype=np.int64)


def boundary_spectrum(lesion: Lesion, harmonics: int = 32, samples: int = 256) -> np.ndarray:
    """Log magnitudes of radial-signal harmonics 1..``harmonics``, scale-free."""
    r = radial_signal(lesion.contour).values
    t = np.linspace(0.0, len(r), samples, endpoint=False)
    rs = np.interp(t, np.arange(len(r)), r, period=len(r))
    F = np.abs(np.fft.rfft(rs))[1:harmonics + 1] / (rs.mean() * samples / 2)
    return np.log(F + 1e-4)


def deep_embedding(lesions, dim: int = 2048, seed: int = 0, noise: float = 1.0,
                   harmonics: int = 32) -> np.ndarray:
    """Stand-in for CNN embeddings of the lesion images.

    A frozen random projection of the (corpus-standardised) boundary spectrum
    to ``dim`` columns, plus isotropic Gaussian noise of scale ``noise``.
    Labels are never consulted, so the embedding only knows what the image
    shows.
    """
    S = np.array([boundary_spectrum(l, harmonics) for l in lesions])
    sd = S.std(axis=0)
    S = (S - S.mean(axis=0)) / np.where(sd > 0, sd, 1.0)
    rng = np.random.default_rng(seed)
    W = rng.standard_normal((harmonics, dim)) / math.sqrt(harmonics)
    return S @ W + noise * rng.standard_normal((len(S), dim))


def corpus_tables(n_per_class: int, seed: int = 0, deep_dim: int = 2048):
    """Lesion corpus as tables: (ids, labels, hand features [n, 4], deep embedding)."""
    lesions, y = lesion_corpus(n_per_class, seed)
    ids = [f"{'bm'[int(c)]}{i // 2:04d}" for i, c in enumerate(y)]
    H = np.array([extract_features(l.mask).as_array() for l in lesions])
    D = deep_embedding(lesions, deep_dim, seed)
    return ids, y, H, D
