"""DDPM noise schedule, forward corruption, reverse step and ancestral sampler.

Steps are 1-indexed: ``t = 1..T``. Tensors are numpy arrays of any shape;
a leading axis can be used to run many chains at once as long as the
denoiser works elementwise or batch-wise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Protocol

import numpy as np

from .errors import EmptyBatch, InvalidRange, ShapeMismatch, StepOutOfRange

BETA_START = 1e-4
BETA_END = 0.02
DEFAULT_STEPS = 1000

LABELS = {"normal": 0, "malignant": 1}


@dataclass(frozen=True, eq=False)
class NoiseSchedule:
    betas: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.betas, dtype=np.float64)
        if b.ndim != 1 or len(b) < 1:
            raise InvalidRange("betas must be a non-empty 1-D sequence")
        if np.any(b <= 0) or np.any(b >= 1):
            raise InvalidRange("every beta must lie in (0, 1)")
        b.setflags(write=False)
        object.__setattr__(self, "betas", b)
        alphas = 1.0 - b
        alpha_bars = np.cumprod(alphas)
        alphas.setflags(write=False)
        alpha_bars.setflags(write=False)
        object.__setattr__(self, "alphas", alphas)
        object.__setattr__(self, "alpha_bars", alpha_bars)

    @property
    def T(self) -> int:
        return len(self.betas)

    def beta(self, t: int) -> float:
        return float(self.betas[self._index(t)])

    def alpha_bar(self, t: int) -> float:
        return float(self.alpha_bars[self._index(t)])

    def _index(self, t: int) -> int:
        if not 1 <= t <= self.T:
            raise StepOutOfRange(f"step {t} outside 1..{self.T}")
        return t - 1

    def to_csv(self) -> str:
        lines = ["t,beta,alpha_bar"]
        for t, (b, ab) in enumerate(zip(self.betas, self.alpha_bars), start=1):
            lines.append(f"{t},{b:.17g},{ab:.17g}")
        return "\n".join(lines) + "\n"


def linear_schedule(T: int = DEFAULT_STEPS, beta_start: float = BETA_START,
                    beta_end: float = BETA_END) -> NoiseSchedule:
    """Betas spaced linearly from ``beta_start`` to ``beta_end`` inclusive."""
    if T < 1:
        raise InvalidRange(f"T must be >= 1, got {T}")
    if not 0.0 < beta_start <= beta_end < 1.0:
        raise InvalidRange(f"need 0 < beta_start <= beta_end < 1, got {beta_start}, {beta_end}")
    return NoiseSchedule(np.linspace(beta_start, beta_end, T))


class Denoiser(Protocol):
    def predict_noise(self, x_t: np.ndarray, t: int, cond) -> np.ndarray: ...


class ZeroDenoiser:
    """Predicts zero noise everywhere."""

    def predict_noise(self, x_t, t, cond):
        return np.zeros_like(np.asarray(x_t, dtype=np.float64))


class GaussianOptimalDenoiser:
    """Exact noise posterior mean when x0 ~ N(mean_c, std_c^2 I) for class c.

    With x_t = sqrt(ab) x0 + sqrt(1-ab) eps, the pair (eps, x_t) is jointly
    Gaussian and E[eps | x_t] = sqrt(1-ab) (x_t - sqrt(ab) mean) / (ab var + 1 - ab).
    """

    def __init__(self, schedule: NoiseSchedule, means: Mapping, stds: Mapping):
        self.schedule = schedule
        self.means = {_label(k): float(v) for k, v in means.items()}
        self.stds = {_label(k): float(v) for k, v in stds.items()}
        if set(self.means) != set(self.stds):
            raise ValueError("means and stds must cover the same labels")

    @classmethod
    def default(cls, schedule: NoiseSchedule) -> "GaussianOptimalDenoiser":
        # toy class targets on the normalised [0, 1] intensity scale
        return cls(schedule, {"normal": 0.35, "malignant": 0.65},
                   {"normal": 0.08, "malignant": 0.12})

    def predict_noise(self, x_t, t, cond):
        c = _label(cond)
        ab = self.schedule.alpha_bar(t)
        mu, var = self.means[c], self.stds[c] ** 2
        x = np.asarray(x_t, dtype=np.float64)
        return math.sqrt(1.0 - ab) * (x - math.sqrt(ab) * mu) / (ab * var + 1.0 - ab)


def _label(cond) -> int:
    if isinstance(cond, str):
        try:
            return LABELS[cond]
        except KeyError:
            raise ValueError(f"unknown class label {cond!r}") from None
    return int(cond)


def _check_shapes(a, b):
    if np.shape(a) != np.shape(b):
        raise ShapeMismatch(f"shape {np.shape(a)} != {np.shape(b)}")


def q_sample(x0, t: int, eps, s: NoiseSchedule) -> np.ndarray:
    """Draw x_t directly from x0: sqrt(ab_t) x0 + sqrt(1 - ab_t) eps."""
    _check_shapes(x0, eps)
    ab = s.alpha_bar(t)
    return math.sqrt(ab) * np.asarray(x0, dtype=np.float64) + math.sqrt(1.0 - ab) * np.asarray(eps, dtype=np.float64)


def reverse_mean(x_t, t: int, eps_hat, s: NoiseSchedule) -> np.ndarray:
    """Posterior mean of x_{t-1} given the predicted noise."""
    _check_shapes(x_t, eps_hat)
    beta, ab = s.beta(t), s.alpha_bar(t)
    x = np.asarray(x_t, dtype=np.float64)
    e = np.asarray(eps_hat, dtype=np.float64)
    return (x - (beta / math.sqrt(1.0 - ab)) * e) / math.sqrt(1.0 - beta)


def p_sample_step(x_t, t: int, d: Denoiser, cond, s: NoiseSchedule,
                  rng: np.random.Generator) -> np.ndarray:
    """One ancestral step x_t -> x_{t-1} with sigma_t^2 = beta_t; no noise at t = 1."""
    eps_hat = d.predict_noise(x_t, t, cond)
    mean = reverse_mean(x_t, t, eps_hat, s)
    if t == 1:
        return mean
    return mean + math.sqrt(s.beta(t)) * rng.standard_normal(mean.shape)


def sample(d: Denoiser, shape, cond, s: NoiseSchedule, rng: np.random.Generator) -> np.ndarray:
    """Start from x_T ~ N(0, I) and run p_sample_step for t = T..1."""
    x = rng.standard_normal(tuple(shape))
    for t in range(s.T, 0, -1):
        x = p_sample_step(x, t, d, cond, s, rng)
    return x


def loss_simple(d: Denoiser, batch, s: NoiseSchedule, rng: np.random.Generator) -> float:
    """Mean squared noise-prediction error over a batch of ``(x0, cond)`` pairs.

    Each item gets its own uniform step in 1..T and fresh Gaussian noise.
    """
    batch = list(batch)
    if not batch:
        raise EmptyBatch("loss_simple needs at least one (x0, cond) item")
    total, count = 0.0, 0
    for x0, cond in batch:
        x0 = np.asarray(x0, dtype=np.float64)
        t = int(rng.integers(1, s.T + 1))
        eps = rng.standard_normal(x0.shape)
        eps_hat = d.predict_noise(q_sample(x0, t, eps, s), t, cond)
        _check_shapes(eps, eps_hat)
        total += float(np.sum((eps - eps_hat) ** 2))
        count += eps.size
    return total / count
