"""Feature fusion, logistic gradient-boosted trees and cross-validated evaluation.

The booster is the usual second-order formulation: each round fits a
regression tree to the gradient ``p - y`` and hessian ``p (1 - p)`` of the
logistic loss, scores splits by

    0.5 * [G_L^2/(H_L+lam) + G_R^2/(H_R+lam) - G^2/(H+lam)] - gamma

and sets leaf weights to ``-eta * G / (H + lam)``. Split search is exact
and greedy: every midpoint between consecutive distinct values is tried.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from numba import njit
from scipy.special import expit

from .errors import (
    DegenerateDataset,
    EmptyInput,
    LengthMismatch,
    FormatError,
    NonFiniteFeature,
    TooFewSamplesPerClass,
)

DEEP_DIM = 2048
HAND_DIM = 4
MODEL_FORMAT = "thermochaos.gbdt"
MODEL_VERSION = 1


def fuse(deep, hand, deep_dim: int = DEEP_DIM) -> np.ndarray:
    """Concatenate deep then handcrafted features (``deep_dim + 4`` values).

    ``deep=None`` selects the handcrafted-only ablation and returns ``hand``.
    """
    h = np.asarray(hand, dtype=np.float64)
    if h.shape[-1] != HAND_DIM:
        raise LengthMismatch(f"handcrafted vector has length {h.shape[-1]}, expected {HAND_DIM}")
    if deep is None:
        return h.copy()
    d = np.asarray(deep, dtype=np.float64)
    if d.shape[-1] != deep_dim:
        raise LengthMismatch(f"deep vector has length {d.shape[-1]}, expected {deep_dim}")
    if d.shape[:-1] != h.shape[:-1]:
        raise LengthMismatch(f"row counts differ: {d.shape[:-1]} vs {h.shape[:-1]}")
    return np.concatenate([d, h], axis=-1)


@dataclass(frozen=True)
class GbdtConfig:
    n_rounds: int = 200
    eta: float = 0.1
    max_depth: int = 4
    reg_lambda: float = 1.0
    gamma: float = 0.0

    def __post_init__(self):
        if self.n_rounds < 0 or self.max_depth < 0:
            raise ValueError("n_rounds and max_depth must be non-negative")
        if self.eta <= 0 or self.reg_lambda < 0 or self.gamma < 0:
            raise ValueError("need eta > 0, reg_lambda >= 0, gamma >= 0")


@dataclass
class Tree:
    """Flat binary tree; ``feature[i] == -1`` marks a leaf holding ``value[i]``."""

    feature: list = field(default_factory=list)
    threshold: list = field(default_factory=list)
    left: list = field(default_factory=list)
    right: list = field(default_factory=list)
    value: list = field(default_factory=list)

    def _add(self, feature=-1, threshold=0.0, value=0.0) -> int:
        self.feature.append(int(feature))
        self.threshold.append(float(threshold))
        self.left.append(-1)
        self.right.append(-1)
        self.value.append(float(value))
        return len(self.feature) - 1

    @property
    def n_leaves(self) -> int:
        return sum(1 for f in self.feature if f < 0)

    def predict(self, X: np.ndarray) -> np.ndarray:
        feature = np.asarray(self.feature)
        threshold = np.asarray(self.threshold)
        left, right = np.asarray(self.left), np.asarray(self.right)
        node = np.zeros(len(X), dtype=np.int64)
        while True:
            f = feature[node]
            inner = f >= 0
            if not inner.any():
                break
            rows = np.nonzero(inner)[0]
            go_left = X[rows, f[rows]] < threshold[node[rows]]
            node[rows] = np.where(go_left, left[node[rows]], right[node[rows]])
        return np.asarray(self.value)[node]


@dataclass
class GbdtModel:
    config: GbdtConfig
    base_score: float
    n_features: int
    trees: list = field(default_factory=list)
    train_loss: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def decision_function(self, X) -> np.ndarray:
        X = self._check(X)
        out = np.full(len(X), self.base_score)
        for t in self.trees:
            out += t.predict(X)
        return out

    def _check(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if X.shape[1] != self.n_features:
            raise LengthMismatch(f"model expects {self.n_features} features, got {X.shape[1]}")
        return X

    def to_json(self) -> str:
        doc = {
            "format": MODEL_FORMAT,
            "version": MODEL_VERSION,
            "config": asdict(self.config),
            "base_score": self.base_score,
            "n_features": self.n_features,
            "trees": [asdict(t) for t in self.trees],
            "meta": self.meta,
        }
        return json.dumps(doc, sort_keys=True, indent=1)

    @classmethod
    def from_json(cls, text: str) -> "GbdtModel":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as e:
            raise FormatError(f"model is not valid JSON: {e}") from None
        if not isinstance(doc, dict) or doc.get("format") != MODEL_FORMAT or doc.get("version") != MODEL_VERSION:
            raise FormatError(f"unsupported model format {doc.get('format')!r} v{doc.get('version')!r}")
        trees = [Tree(**t) for t in doc["trees"]]
        n = int(doc["n_features"])
        for t in trees:
            if any(f >= n for f in t.feature):
                raise FormatError("tree references a feature index out of range")
        return cls(GbdtConfig(**doc["config"]), float(doc["base_score"]), n, trees,
                   meta=dict(doc.get("meta", {})))


def predict_proba(model: GbdtModel, X) -> np.ndarray:
    """Probability of class 1 for each row (or a single feature vector)."""
    single = np.ndim(X) == 1
    p = expit(model.decision_function(X))
    return p[0] if single else p


def logistic_loss(y: np.ndarray, margin: np.ndarray) -> float:
    # log(1 + e^m) - y m, computed without overflow
    return float(np.mean(np.logaddexp(0.0, margin) - y * margin))


@njit(cache=True)
def _level_splits(xs, order, g, h, slot_of, n_slots, G, H, lam, gamma):
    """Best split of every frontier node in one sweep over the presorted data.

    ``order``/``xs`` are (d, n): row j holds all sample indices and values
    sorted by feature j. ``slot_of[k]`` is the frontier slot of sample k or
    -1. A split is scored whenever a node's next sample (in feature order)
    has a strictly larger value than the previous one, i.e. between every
    pair of consecutive distinct values. Scanning features then positions
    in ascending order and keeping strict improvements resolves ties to the
    lowest feature, then the lowest threshold.
    """
    d, n = order.shape
    best = np.full(n_slots, -np.inf)
    feat = np.full(n_slots, -1, np.int64)
    lo = np.zeros(n_slots)
    hi = np.zeros(n_slots)
    parent = G * G / (H + lam)
    gl = np.empty(n_slots)
    hl = np.empty(n_slots)
    last = np.empty(n_slots)
    seen = np.empty(n_slots, np.bool_)
    for j in range(d):
        gl[:] = 0.0
        hl[:] = 0.0
        seen[:] = False
        for i in range(n):
            k = order[j, i]
            q = slot_of[k]
            if q < 0:
                continue
            v = xs[j, i]
            if seen[q] and v > last[q]:
                gr = G[q] - gl[q]
                hr = H[q] - hl[q]
                gain = 0.5 * (gl[q] * gl[q] / (hl[q] + lam) + gr * gr / (hr + lam) - parent[q]) - gamma
                if gain > best[q]:
                    best[q] = gain
                    feat[q] = j
                    lo[q] = last[q]
                    hi[q] = v
            gl[q] += g[k]
            hl[q] += h[k]
            last[q] = v
            seen[q] = True
    return best, feat, lo, hi


def _midpoint(lo: float, hi: float) -> float:
    mid = lo + 0.5 * (hi - lo)
    # adjacent floats: fall back to hi so that "x < thr" still separates them
    return mid if lo < mid else hi


def _grow(X, order, xs, g, h, cfg: GbdtConfig) -> Tree:
    """Grow one tree breadth-first, one data sweep per depth."""
    tree = Tree()
    lam = cfg.reg_lambda
    n = len(X)
    node_of = np.zeros(n, dtype=np.int64)
    frontier = [tree._add()]
    for depth in range(cfg.max_depth + 1):
        if not frontier:
            break
        slot_of = np.full(n, -1, dtype=np.int64)
        for q, node in enumerate(frontier):
            slot_of[node_of == node] = q
        members = slot_of >= 0
        G = np.bincount(slot_of[members], weights=g[members], minlength=len(frontier))
        H = np.bincount(slot_of[members], weights=h[members], minlength=len(frontier))
        if depth < cfg.max_depth:
            best, feat, lo, hi = _level_splits(xs, order, g, h, slot_of, len(frontier),
                                               G, H, float(lam), float(cfg.gamma))
        else:
            best = np.full(len(frontier), -np.inf)
        nxt = []
        for q, node in enumerate(frontier):
            if not best[q] > 0.0:
                tree.value[node] = -cfg.eta * float(G[q]) / (float(H[q]) + lam)
                continue
            j = int(feat[q])
            thr = _midpoint(float(lo[q]), float(hi[q]))
            tree.feature[node] = j
            tree.threshold[node] = thr
            left, right = tree._add(), tree._add()
            tree.left[node], tree.right[node] = left, right
            rows = node_of == node
            node_of[rows] = np.where(X[rows, j] < thr, left, right)
            nxt += [left, right]
        frontier = nxt
    return tree


def _validate_training(X, y):
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    if X.ndim != 2 or len(X) != len(y):
        raise LengthMismatch(f"X has shape {X.shape} but y has {len(y)} labels")
    if not np.all(np.isfinite(X)):
        raise NonFiniteFeature("training features contain NaN or inf")
    if not np.all((y == 0) | (y == 1)):
        raise DegenerateDataset("labels must be 0 or 1")
    n_pos = int(np.sum(y == 1))
    if n_pos < 2 or len(y) - n_pos < 2:
        raise DegenerateDataset(f"need >= 2 samples per class, got {len(y) - n_pos} / {n_pos}")
    return X, y.astype(np.float64)


def train(X, y, cfg: GbdtConfig | None = None, seed: int = 0) -> GbdtModel:
    """Fit a logistic boosted-tree ensemble.

    Exact greedy search has no random component, so ``seed`` only travels
    with the model's provenance; identical inputs give identical models.
    """
    cfg = cfg or GbdtConfig()
    X, y = _validate_training(X, y)
    p0 = float(y.mean())
    base = math.log(p0 / (1.0 - p0))
    model = GbdtModel(cfg, base, X.shape[1])
    margin = np.full(len(y), base)
    model.train_loss.append(logistic_loss(y, margin))
    if cfg.n_rounds == 0:
        return model
    order = np.ascontiguousarray(np.argsort(X, axis=0, kind="stable").T)
    xs = np.take_along_axis(np.ascontiguousarray(X.T), order, axis=1)
    for _ in range(cfg.n_rounds):
        p = expit(margin)
        g = p - y
        h = p * (1.0 - p)
        tree = _grow(X, order, xs, g, h, cfg)
        model.trees.append(tree)
        margin = margin + tree.predict(X)
        model.train_loss.append(logistic_loss(y, margin))
    return model


@dataclass(frozen=True)
class EvalMetrics:
    """Percentages; NaN marks an undefined ratio (see ``undefined``)."""

    accuracy: float
    sensitivity: float
    specificity: float
    tp: int
    tn: int
    fp: int
    fn: int
    undefined: tuple = ()

    def as_dict(self) -> dict:
        return asdict(self) | {"undefined": list(self.undefined)}


def confusion_metrics(y_true, y_pred) -> EvalMetrics:
    yt = np.asarray(y_true).astype(np.int64).ravel()
    yp = np.asarray(y_pred).astype(np.int64).ravel()
    if len(yt) != len(yp):
        raise LengthMismatch(f"{len(yt)} true labels vs {len(yp)} predictions")
    if len(yt) == 0:
        raise EmptyInput("no labels to score")
    tp = int(np.sum((yt == 1) & (yp == 1)))
    tn = int(np.sum((yt == 0) & (yp == 0)))
    fp = int(np.sum((yt == 0) & (yp == 1)))
    fn = int(np.sum((yt == 1) & (yp == 0)))
    undefined = []
    if tp + fn:
        sens = 100.0 * tp / (tp + fn)
    else:
        sens = float("nan")
        undefined.append("sensitivity")
    if tn + fp:
        spec = 100.0 * tn / (tn + fp)
    else:
        spec = float("nan")
        undefined.append("specificity")
    return EvalMetrics(100.0 * (tp + tn) / len(yt), sens, spec, tp, tn, fp, fn, tuple(undefined))


def stratified_folds(y, k: int = 5, seed: int = 0, synthetic=None) -> np.ndarray:
    """Fold id per sample (-1 for synthetic samples kept out of every test fold).

    Each class is shuffled with a seeded generator and dealt round-robin, so
    fold class counts differ by at most one.
    """
    y = np.asarray(y)
    syn = np.zeros(len(y), bool) if synthetic is None else np.asarray(synthetic, bool)
    if k < 2:
        raise ValueError("k must be >= 2")
    rng = np.random.default_rng(seed)
    folds = np.full(len(y), -1, dtype=np.int64)
    for c in (0, 1):
        idx = np.nonzero((y == c) & ~syn)[0]
        if len(idx) < k:
            raise TooFewSamplesPerClass(f"class {c} has {len(idx)} real samples, need >= {k}")
        idx = rng.permutation(idx)
        folds[idx] = np.arange(len(idx)) % k
    return folds


@dataclass
class CVReport:
    folds: list
    mean: dict
    std: dict
    k: int
    seed: int

    def as_dict(self) -> dict:
        return {
            "k": self.k,
            "seed": self.seed,
            "folds": [f.as_dict() for f in self.folds],
            "mean": self.mean,
            "std": self.std,
        }


def stratified_kfold(X, y, k: int = 5, cfg: GbdtConfig | None = None, seed: int = 0,
                     synthetic=None, include_synthetic: bool = False) -> CVReport:
    """k-fold CV at threshold 0.5; mean and population std of the fold metrics.

    Synthetic-tagged samples are added to every training split and never
    scored unless ``include_synthetic`` treats them as real.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    syn = None if include_synthetic else synthetic
    folds = stratified_folds(y, k, seed, syn)
    results = []
    for f in range(k):
        test = folds == f
        model = train(X[~test], y[~test], cfg, seed)
        pred = (predict_proba(model, X[test]) >= 0.5).astype(np.int64)
        results.append(confusion_metrics(y[test], pred))
    names = ("accuracy", "sensitivity", "specificity")
    mean = {n: float(np.mean([getattr(r, n) for r in results])) for n in names}
    std = {n: float(np.std([getattr(r, n) for r in results])) for n in names}
    return CVReport(results, mean, std, k, seed)
