"""Distances and similarities between true and recovered label distributions."""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields

import numpy as np
from scipy.stats import rankdata

MEASURES = ("kl", "chebyshev", "clark", "canberra", "cosine", "intersection")
LOWER_BETTER = {"kl": True, "chebyshev": True, "clark": True, "canberra": True,
                "cosine": False, "intersection": False}
DISPLAY = {"kl": "K-L", "chebyshev": "Cheb", "clark": "Clark", "canberra": "Canber",
           "cosine": "Cosine", "intersection": "Intersec"}
KL_FLOOR = 1e-12


@dataclass(frozen=True)
class MetricReport:
    kl: float
    chebyshev: float
    clark: float
    canberra: float
    cosine: float
    intersection: float
    n: int

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "MetricReport":
        return cls(**{f.name: d[f.name] for f in fields(cls)})

    def values(self) -> dict[str, float]:
        return {m: getattr(self, m) for m in MEASURES}


def _check_pair(d, d_hat, tol=1e-6):
    d = np.asarray(d, dtype=float)
    d_hat = np.asarray(d_hat, dtype=float)
    if d.shape != d_hat.shape:
        raise ValueError(f"shape mismatch: {d.shape} vs {d_hat.shape}")
    if d.shape[-1] < 2:
        raise ValueError("distributions need at least two labels")
    for name, x in (("true", d), ("recovered", d_hat)):
        if np.any(x < -tol) or np.any(np.abs(x.sum(axis=-1) - 1.0) > tol):
            raise ValueError(f"{name} distribution is not row-stochastic")
    return d, d_hat


def _per_sample(D, Dh, canberra_squared=False, kl_reverse=False):
    """Vectorised per-row values of all six measures."""
    if kl_reverse:
        p, q = Dh, D
    else:
        p, q = D, Dh
    q_floor = np.maximum(q, KL_FLOOR)
    with np.errstate(divide="ignore", invalid="ignore"):
        kl_terms = np.where(p > 0, p * np.log(np.where(p > 0, p, 1.0) / q_floor), 0.0)
        diff = D - Dh
        s = D + Dh
        safe = s > 0
        s1 = np.where(safe, s, 1.0)
        clark = np.sqrt(np.sum(np.where(safe, diff ** 2 / s1 ** 2, 0.0), axis=-1))
        num = diff ** 2 if canberra_squared else np.abs(diff)
        canberra = np.sum(np.where(safe, num / s1, 0.0), axis=-1)
    norms = np.linalg.norm(D, axis=-1) * np.linalg.norm(Dh, axis=-1)
    return {
        "kl": np.sum(kl_terms, axis=-1),
        "chebyshev": np.max(np.abs(diff), axis=-1),
        "clark": clark,
        "canberra": canberra,
        "cosine": np.sum(D * Dh, axis=-1) / np.maximum(norms, 1e-300),
        "intersection": np.sum(np.minimum(D, Dh), axis=-1),
    }


def metric_pair(d, d_hat, which: str, canberra_squared: bool = False,
                kl_reverse: bool = False) -> float:
    """One measure between a true distribution ``d`` and a recovery ``d_hat``."""
    if which not in MEASURES:
        raise ValueError(f"unknown measure {which!r}")
    d, d_hat = _check_pair(d, d_hat)
    if d.ndim != 1:
        raise ValueError("metric_pair takes two vectors")
    return float(_per_sample(d, d_hat, canberra_squared, kl_reverse)[which])


def per_sample(recovered, ground_truth, canberra_squared=False, kl_reverse=False) -> dict:
    D, Dh = _check_pair(ground_truth, recovered)
    return _per_sample(D, Dh, canberra_squared, kl_reverse)


def evaluate(recovered, ground_truth, canberra_squared: bool = False,
             kl_reverse: bool = False) -> MetricReport:
    """Mean over samples of each measure, true rows as ``d`` and recovered rows as ``d_hat``."""
    D, Dh = _check_pair(ground_truth, recovered)
    if D.ndim != 2:
        raise ValueError("evaluate takes two matrices")
    vals = _per_sample(D, Dh, canberra_squared, kl_reverse)
    return MetricReport(**{m: float(np.mean(vals[m])) for m in MEASURES}, n=D.shape[0])


def mean_report(reports: list[MetricReport]) -> MetricReport:
    if not reports:
        raise ValueError("no reports to average")
    return MetricReport(
        **{m: float(np.mean([getattr(r, m) for r in reports])) for m in MEASURES},
        n=int(sum(r.n for r in reports)),
    )


@dataclass
class RankTable:
    methods: list[str]
    datasets: list[str]
    values: dict[str, dict[str, float]]     # method -> dataset -> value
    ranks: dict[str, dict[str, float]]      # method -> dataset -> rank
    average_rank: dict[str, float]
    lower_better: bool

    def to_dict(self) -> dict:
        return asdict(self)


def average_ranks(table: dict[str, dict[str, float]], lower_better: bool = True) -> RankTable:
    """Rank methods per dataset (1 = best, ties share the mean rank) and average."""
    methods = list(table)
    if len(methods) < 1:
        raise ValueError("need at least one method")
    datasets = list(table[methods[0]])
    if not datasets:
        raise ValueError("need at least one dataset")
    for m in methods:
        missing = [d for d in datasets if d not in table[m] or table[m][d] is None]
        if missing or set(table[m]) != set(datasets):
            raise ValueError(f"method {m!r} has missing or extra cells: {missing or sorted(set(table[m]) ^ set(datasets))}")
    ranks = {m: {} for m in methods}
    for d in datasets:
        col = np.array([table[m][d] for m in methods], dtype=float)
        if np.any(np.isnan(col)):
            raise ValueError(f"missing cell on dataset {d!r}")
        r = rankdata(col if lower_better else -col, method="average")
        for m, ri in zip(methods, r):
            ranks[m][d] = float(ri)
    avg = {m: float(np.mean([ranks[m][d] for d in datasets])) for m in methods}
    values = {m: {d: float(table[m][d]) for d in datasets} for m in methods}
    return RankTable(methods, datasets, values, ranks, avg, lower_better)


def format_rank_table(table: RankTable, title: str = "", digits: int = 3) -> str:
    """Datasets as rows, methods as columns; the best value per row carries a ``*``."""
    width = max(8, digits + 5, *(len(m) + 1 for m in table.methods))
    first = max(8, *(len(d) for d in table.datasets), len("Avg.Rank"))
    lines = []
    if title:
        lines.append(title)
    lines.append(f"{'':<{first}}" + "".join(f"{m:>{width}}" for m in table.methods))
    for d in table.datasets:
        col = [table.values[m][d] for m in table.methods]
        best = min(col) if table.lower_better else max(col)
        cells = []
        for v in col:
            mark = "*" if v == best else " "
            cells.append(f"{v:>{width - 1}.{digits}f}{mark}")
        lines.append(f"{d:<{first}}" + "".join(cells))
    lines.append(f"{'Avg.Rank':<{first}}"
                 + "".join(f"{table.average_rank[m]:>{width - 1}.2f} " for m in table.methods))
    return "\n".join(lines)
