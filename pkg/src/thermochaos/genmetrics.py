"""Generative-model metrics over precomputed embeddings and class probabilities."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, InvalidRows, NotPSD, TooFewSamples

SYM_TOL = 1e-9
PSD_TOL = 1e-8
ROW_SUM_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class GaussianStats:
    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mu = np.atleast_1d(np.asarray(self.mean, dtype=np.float64))
        cov = np.atleast_2d(np.asarray(self.cov, dtype=np.float64))
        if mu.ndim != 1 or cov.shape != (len(mu), len(mu)):
            raise DimensionMismatch(f"mean of length {len(mu)} vs covariance {cov.shape}")
        if np.max(np.abs(cov - cov.T), initial=0.0) >= SYM_TOL:
            raise NotPSD("covariance is not symmetric")
        object.__setattr__(self, "mean", mu)
        object.__setattr__(self, "cov", cov)

    @property
    def dim(self) -> int:
        return len(self.mean)


def fit_gaussian(features) -> GaussianStats:
    """Sample mean and unbiased covariance of an ``n x d`` feature matrix."""
    X = np.asarray(features, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    if X.shape[0] < 2:
        raise TooFewSamples(f"need at least 2 rows, got {X.shape[0]}")
    mu = X.mean(axis=0)
    D = X - mu
    cov = D.T @ D / (X.shape[0] - 1)
    return GaussianStats(mu, 0.5 * (cov + cov.T))


def _psd_sqrt(C: np.ndarray, what: str) -> np.ndarray:
    w, V = np.linalg.eigh(0.5 * (C + C.T))
    if w.min(initial=0.0) < -PSD_TOL:
        raise NotPSD(f"{what} has eigenvalue {w.min():.3e} < -{PSD_TOL}")
    return (V * np.sqrt(np.clip(w, 0.0, None))) @ V.T


def trace_sqrt_product(a: np.ndarray, b: np.ndarray) -> float:
    """Tr((A B)^{1/2}) for PSD A, B via the symmetric form A^{1/2} B A^{1/2}."""
    ra = _psd_sqrt(a, "first covariance")
    _psd_sqrt(b, "second covariance")
    M = ra @ b @ ra
    w = np.linalg.eigvalsh(0.5 * (M + M.T))
    if w.min(initial=0.0) < -PSD_TOL:
        raise NotPSD(f"A^1/2 B A^1/2 has eigenvalue {w.min():.3e}")
    return float(np.sum(np.sqrt(np.clip(w, 0.0, None))))


def frechet_distance(a: GaussianStats, b: GaussianStats) -> float:
    """||mu_a - mu_b||^2 + Tr(S_a + S_b - 2 (S_a S_b)^{1/2})."""
    if a.dim != b.dim:
        raise DimensionMismatch(f"dimensions differ: {a.dim} vs {b.dim}")
    diff = a.mean - b.mean
    value = float(diff @ diff) + float(np.trace(a.cov) + np.trace(b.cov)) \
        - 2.0 * trace_sqrt_product(a.cov, b.cov)
    # exact value is >= 0; only rounding can push it below
    return max(value, 0.0)


def sliced_fid(features_a, features_b) -> float:
    """Frechet distance between Gaussian fits of alternate (intermediate-layer) embeddings."""
    return frechet_distance(fit_gaussian(features_a), fit_gaussian(features_b))


def _check_probs(P: np.ndarray):
    if P.ndim != 2 or P.shape[0] == 0 or P.shape[1] == 0:
        raise InvalidRows(f"expected a non-empty n x C matrix, got shape {P.shape}")
    if np.any(P < 0) or not np.all(np.isfinite(P)):
        raise InvalidRows("probabilities must be finite and non-negative")
    bad = np.abs(P.sum(axis=1) - 1.0) > ROW_SUM_TOL
    if bad.any():
        raise InvalidRows(f"row {int(np.argmax(bad))} does not sum to 1")


def _split_score(P: np.ndarray) -> float:
    marginal = P.mean(axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(P > 0, P * (np.log(P) - np.log(marginal)), 0.0)
    mean_kl = float(terms.sum(axis=1).mean())
    # mean KL to the marginal is a mutual information: 0 <= I <= log C
    mean_kl = min(max(mean_kl, 0.0), float(np.log(P.shape[1])))
    return float(np.exp(mean_kl))


def inception_score(probs, splits: int = 1) -> tuple[float, float]:
    """exp(E_x KL(p(y|x) || p(y))) per split; returns (mean, population std)."""
    P = np.asarray(probs, dtype=np.float64)
    _check_probs(P)
    if not 1 <= splits <= P.shape[0]:
        raise ValueError(f"splits must be in 1..{P.shape[0]}, got {splits}")
    scores = np.array([_split_score(chunk) for chunk in np.array_split(P, splits)])
    return float(scores.mean()), float(scores.std())
