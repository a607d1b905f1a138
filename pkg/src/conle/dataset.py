"""Label-enhancement datasets: loading, validation, binarization, synthesis, folds."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

log = logging.getLogger(__name__)

SCALINGS = ("none", "zscore")
BINARIZE_MODES = ("threshold_over_uniform", "top_k", "absolute_threshold")
STOCHASTIC_TOL = 1e-6


class DatasetError(ValueError):
    pass


@dataclass(frozen=True)
class BinarizationPolicy:
    mode: str = "threshold_over_uniform"
    param: float = 1.0
    force_argmax_relevant: bool = True

    def __post_init__(self):
        if self.mode not in BINARIZE_MODES:
            raise ValueError(f"unknown binarization mode {self.mode!r}")
        if self.param <= 0:
            raise ValueError("binarization param must be positive")
        if self.mode == "top_k" and self.param != int(self.param):
            raise ValueError("top_k needs an integer k")


@dataclass(frozen=True, eq=False)
class LeDataset:
    name: str
    features: np.ndarray
    logical: np.ndarray
    ground_truth: np.ndarray | None = None
    feature_scaling: str = "none"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        for arr in (self.features, self.logical, self.ground_truth):
            if arr is not None:
                arr.setflags(write=False)

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def dim1(self) -> int:
        return self.features.shape[1]

    @property
    def c(self) -> int:
        return self.logical.shape[1]

    def subset(self, idx) -> "LeDataset":
        idx = np.asarray(idx)
        gt = None if self.ground_truth is None else self.ground_truth[idx].copy()
        return replace(self, features=self.features[idx].copy(),
                       logical=self.logical[idx].copy(), ground_truth=gt)


def validate_logical(logical: np.ndarray) -> np.ndarray:
    L = np.asarray(logical, dtype=float)
    if L.ndim != 2 or L.shape[0] < 1 or L.shape[1] < 1:
        raise DatasetError(f"logical labels must be a non-empty matrix, got shape {L.shape}")
    bad = np.argwhere((L != 0) & (L != 1))
    if bad.size:
        r, col = bad[0]
        raise DatasetError(f"logical entry at row {r}, column {col} is {L[r, col]!r}, not 0/1")
    s = L.sum(axis=1)
    for r in np.flatnonzero((s == 0) | (s == L.shape[1])):
        kind = "no relevant" if s[r] == 0 else "no irrelevant"
        raise DatasetError(f"logical row {r} has {kind} label")
    return L


def validate_distribution(D: np.ndarray, tol: float = STOCHASTIC_TOL) -> np.ndarray:
    D = np.asarray(D, dtype=float)
    if D.ndim != 2:
        raise DatasetError(f"distribution matrix must be 2-D, got shape {D.shape}")
    neg = np.argwhere(D < 0)
    if neg.size:
        r, col = neg[0]
        raise DatasetError(f"ground-truth row {r}, column {col} is negative ({D[r, col]!r})")
    s = D.sum(axis=1)
    for r in np.flatnonzero(np.abs(s - 1.0) > tol):
        raise DatasetError(f"ground-truth row {r} sums to {s[r]:.6g}")
    return D


def scale_features(X: np.ndarray, scaling: str) -> np.ndarray:
    if scaling not in SCALINGS:
        raise ValueError(f"unknown scaling {scaling!r}")
    X = np.asarray(X, dtype=float)
    if scaling == "none":
        return X.copy()
    mean = X.mean(axis=0)
    centered = X - mean
    std = np.sqrt(np.mean(centered ** 2, axis=0))
    const = std == 0
    out = centered / np.where(const, 1.0, std)
    out[:, const] = 0.0
    return out


def make_dataset(name: str, features, logical, ground_truth=None, scaling: str = "none",
                 meta: dict | None = None) -> LeDataset:
    X = np.asarray(features, dtype=float)
    if X.ndim != 2 or X.shape[0] < 1 or X.shape[1] < 1:
        raise DatasetError(f"features must be a non-empty matrix, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        r, col = np.argwhere(~np.isfinite(X))[0]
        raise DatasetError(f"feature at row {r}, column {col} is not finite")
    L = validate_logical(logical)
    if L.shape[0] != X.shape[0]:
        raise DatasetError(f"features have {X.shape[0]} rows but logical labels have {L.shape[0]}")
    D = None
    if ground_truth is not None:
        D = validate_distribution(ground_truth)
        if D.shape != L.shape:
            raise DatasetError(f"ground truth shape {D.shape} != logical shape {L.shape}")
    return LeDataset(name, scale_features(X, scaling), L, D, scaling, dict(meta or {}))


def _read_matrix(path) -> np.ndarray:
    path = Path(path)
    rows = []
    with path.open() as fh:
        for lineno, line in enumerate(fh):
            line = line.strip()
            if not line:
                continue
            try:
                rows.append([float(cell) for cell in line.split(",")])
            except ValueError as exc:
                raise DatasetError(f"{path}: line {lineno + 1}: {exc}") from None
    if not rows:
        raise DatasetError(f"{path}: no data rows")
    widths = {len(r) for r in rows}
    if len(widths) != 1:
        raise DatasetError(f"{path}: ragged rows (widths {sorted(widths)})")
    return np.array(rows, dtype=float)


def write_matrix(path, M: np.ndarray) -> None:
    M = np.atleast_2d(np.asarray(M, dtype=float))
    with open(path, "w", newline="\n") as fh:
        for row in M:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def load_dataset(features_path, labels_path=None, ground_truth_path=None, scaling: str = "zscore",
                 policy: BinarizationPolicy | None = None, name: str | None = None) -> LeDataset:
    """Read header-free numeric CSV files into a validated dataset.

    When ``labels_path`` is omitted the logical labels are derived from the
    ground truth with ``policy`` (default: threshold at 1/c).
    """
    X = _read_matrix(features_path)
    D = _read_matrix(ground_truth_path) if ground_truth_path is not None else None
    meta = {}
    if labels_path is not None:
        L = _read_matrix(labels_path)
    elif D is not None:
        validate_distribution(D)
        policy = policy or BinarizationPolicy()
        L = binarize(D, policy)
        meta["binarization"] = {"mode": policy.mode, "param": policy.param,
                                "force_argmax_relevant": policy.force_argmax_relevant}
    else:
        raise DatasetError("need logical labels or a ground-truth distribution file")
    if name is None:
        name = Path(features_path).name.removesuffix(".csv").removesuffix("_features")
    return make_dataset(name, X, L, D, scaling, meta)


def load_named(directory, name: str, scaling: str = "zscore",
               policy: BinarizationPolicy | None = None) -> LeDataset:
    """Load ``<name>_features.csv`` plus whichever of the label files exist."""
    d = Path(directory)
    logical = d / f"{name}_logical.csv"
    dist = d / f"{name}_distribution.csv"
    return load_dataset(d / f"{name}_features.csv",
                        logical if logical.exists() else None,
                        dist if dist.exists() else None,
                        scaling, policy, name)


def binarize(distributions: np.ndarray, policy: BinarizationPolicy | None = None) -> np.ndarray:
    policy = policy or BinarizationPolicy()
    D = np.asarray(distributions, dtype=float)
    n, c = D.shape
    if c < 2:
        raise ValueError("binarization needs at least two labels")
    if policy.mode == "threshold_over_uniform":
        L = D >= policy.param / c
    elif policy.mode == "absolute_threshold":
        L = D >= policy.param
    else:
        k = int(policy.param)
        if k >= c:
            raise ValueError(f"top_k needs k < c, got k={k}, c={c}")
        # stable sort on -D keeps the lowest index first among ties
        order = np.argsort(-D, axis=1, kind="stable")[:, :k]
        L = np.zeros_like(D, dtype=bool)
        np.put_along_axis(L, order, True, axis=1)
    L = L.astype(float)
    rows = np.arange(n)
    empty = L.sum(axis=1) == 0
    if policy.force_argmax_relevant:
        # the most described label is always relevant
        L[rows, np.argmax(D, axis=1)] = 1.0
    elif empty.any():
        L[empty, np.argmax(D[empty], axis=1)] = 1.0
    full = L.sum(axis=1) == c
    if full.any():
        L[full, np.argmin(D[full], axis=1)] = 0.0
    repaired = int(empty.sum() + full.sum())
    if repaired:
        log.info("binarize: repaired %d degenerate rows", repaired)
    return L


def softmax_rows(A: np.ndarray) -> np.ndarray:
    e = np.exp(A - A.max(axis=1, keepdims=True))
    return e / e.sum(axis=1, keepdims=True)


def synth_distributions(X: np.ndarray, W: np.ndarray, noise: float,
                        rng: np.random.Generator) -> np.ndarray:
    return softmax_rows(X @ W + noise * rng.standard_normal((X.shape[0], W.shape[1])))


def synth_generate(n: int = 500, dim1: int = 20, c: int = 5, seed: int = 7, noise: float = 0.1,
                   policy: BinarizationPolicy | None = None, name: str | None = None) -> LeDataset:
    """Distributions ``softmax(X W + noise * eps)`` over standard-normal features.

    ``W`` has entries of variance 4/dim1, so clean logits have standard
    deviation 2 whatever the feature dimension.
    """
    if min(n, dim1, c) < 2:
        raise ValueError("n, dim1 and c must all be >= 2")
    if noise < 0:
        raise ValueError("noise must be non-negative")
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, dim1))
    W = rng.standard_normal((dim1, c)) * (2.0 / np.sqrt(dim1))
    D = synth_distributions(X, W, noise, rng)
    L = binarize(D, policy)
    name = name or f"synth-n{n}-d{dim1}-c{c}-s{seed}"
    return make_dataset(name, X, L, D, "none",
                        {"synth": {"n": n, "dim1": dim1, "c": c, "seed": seed, "noise": noise}})


@dataclass(frozen=True)
class FoldPlan:
    k: int
    assignments: np.ndarray
    seed: int

    def train_test(self, fold: int) -> tuple[np.ndarray, np.ndarray]:
        test = np.flatnonzero(self.assignments == fold)
        train = np.flatnonzero(self.assignments != fold)
        return train, test

    def sizes(self) -> np.ndarray:
        return np.bincount(self.assignments, minlength=self.k)


def split_folds(dataset_or_n, k: int, seed: int) -> FoldPlan:
    n = dataset_or_n if isinstance(dataset_or_n, (int, np.integer)) else dataset_or_n.n
    if k < 2 or k > n:
        raise ValueError(f"k must satisfy 2 <= k <= n (n={n}), got {k}")
    perm = np.random.default_rng(seed).permutation(n)
    assignments = np.empty(n, dtype=int)
    assignments[perm] = np.arange(n) % k
    return FoldPlan(k, assignments, seed)
