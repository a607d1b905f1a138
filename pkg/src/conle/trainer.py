"""Mini-batch SGD on the joint objective, with windowed convergence detection."""

from __future__ import annotations

import csv
import logging
import time
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from .dataset import LeDataset
from .diffnet import DivergenceError, sgd_step
from .objective import ConleConfig, ConleModel, LossBreakdown, embed, evaluate_loss, init_model, \
    loss_gradients, recover

log = logging.getLogger(__name__)


class TrainingDiverged(DivergenceError):
    def __init__(self, epoch: int, reason: str):
        super().__init__(f"training diverged at epoch {epoch}: {reason}")
        self.epoch = epoch


@dataclass(frozen=True)
class TrainConfig:
    conle: ConleConfig = field(default_factory=ConleConfig)
    lr: float = 1e-4
    max_epochs: int = 500
    batch_size: int | None = 256    # None trains full-batch
    seed: int = 0
    convergence_tol: float = 1e-3
    convergence_window: int = 10

    def __post_init__(self):
        if self.lr < 0:
            raise ValueError("lr must be non-negative")
        if self.max_epochs < 1:
            raise ValueError("max_epochs must be >= 1")
        if self.batch_size is not None and self.batch_size < 1:
            raise ValueError("batch_size must be >= 1 or None")
        if self.conle.uses_contrastive and self.batch_size is not None and self.batch_size < 2:
            raise ValueError("the contrastive term needs batch_size >= 2")
        if self.convergence_tol <= 0:
            raise ValueError("convergence_tol must be positive")
        if self.convergence_window < 2:
            raise ValueError("convergence_window must be >= 2")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        d = dict(d)
        conle = ConleConfig(**d.pop("conle", {}))
        return cls(conle=conle, **d)


@dataclass
class TrainReport:
    loss_curve: list[LossBreakdown]
    epochs_run: int
    converged: bool
    wall_time: float
    config_echo: dict

    def to_dict(self) -> dict:
        return {
            "loss_curve": [p.to_dict() for p in self.loss_curve],
            "epochs_run": self.epochs_run,
            "converged": self.converged,
            "wall_time": self.wall_time,
            "config_echo": self.config_echo,
        }

    def write_loss_csv(self, path) -> None:
        write_loss_curve(path, self.loss_curve)


def write_loss_curve(path, curve: list[LossBreakdown]) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["epoch", "l_con", "l_dis", "l_thr", "total"])
        for i, p in enumerate(curve, 1):
            w.writerow([i, repr(p.l_con), repr(p.l_dis), repr(p.l_thr), repr(p.total)])


def has_converged(totals, window: int, tol: float) -> bool:
    """True when each of the last ``window`` epoch-to-epoch relative changes is below ``tol``."""
    if len(totals) < window + 1:
        return False
    tail = np.asarray(totals[-(window + 1):], dtype=float)
    prev = np.maximum(np.abs(tail[:-1]), 1e-12)
    return bool(np.all(np.abs(np.diff(tail)) / prev < tol))


def batches(n: int, batch_size: int | None, rng: np.random.Generator | None) -> list[np.ndarray]:
    """Index batches; a trailing batch of one sample is folded into its predecessor."""
    order = rng.permutation(n) if rng is not None else np.arange(n)
    if batch_size is None or batch_size >= n:
        return [order]
    out = [order[i:i + batch_size] for i in range(0, n, batch_size)]
    if len(out) > 1 and len(out[-1]) < 2:
        tail = out.pop()
        out[-1] = np.concatenate([out[-1], tail])
    return out


def _epoch_loss(model, X, L, config: ConleConfig, parts: list[np.ndarray]) -> LossBreakdown:
    vals = [evaluate_loss(model, X[b], L[b], config) for b in parts]
    mean = {k: float(np.mean([getattr(v, k) for v in vals])) for k in LossBreakdown.__dataclass_fields__}
    return LossBreakdown(**mean)


def train(dataset: LeDataset, config: TrainConfig = TrainConfig(),
          model: ConleModel | None = None) -> tuple[ConleModel, TrainReport]:
    """Fit F1, F2 and F3 on ``dataset`` (features plus logical labels only).

    Each epoch shuffles with a generator keyed on ``(seed, epoch)`` and takes
    one SGD step per batch. The logged epoch loss is measured after the
    epoch's updates over a fixed, unshuffled batch partition, so it depends
    on the parameters alone.
    """
    start = time.perf_counter()
    X = np.asarray(dataset.features, dtype=float)
    L = np.asarray(dataset.logical, dtype=float)
    cc = config.conle
    if model is None:
        model = init_model(dataset.dim1, dataset.c, cc, config.seed)
    eval_parts = batches(dataset.n, config.batch_size, None)
    if cc.uses_contrastive and min(len(b) for b in eval_parts) < 2:
        raise ValueError("the contrastive term needs at least two samples per batch")

    curve: list[LossBreakdown] = []
    converged = False
    nets = (model.f1, model.f2, model.f3)
    for epoch in range(config.max_epochs):
        rng = np.random.default_rng([config.seed, epoch])
        # overflow on the way to a non-finite loss is reported as divergence below
        with np.errstate(over="ignore", invalid="ignore"):
            for idx in batches(dataset.n, config.batch_size, rng):
                try:
                    _, grads = loss_gradients(model, X[idx], L[idx], cc)
                    for net, g in zip(nets, grads):
                        sgd_step(net, g, config.lr)
                except DivergenceError as exc:
                    raise TrainingDiverged(epoch + 1, str(exc)) from None
            parts = _epoch_loss(model, X, L, cc, eval_parts)
        if not np.isfinite(parts.total):
            raise TrainingDiverged(epoch + 1, "non-finite loss")
        curve.append(parts)
        if has_converged([p.total for p in curve], config.convergence_window, config.convergence_tol):
            converged = True
            break
    report = TrainReport(curve, len(curve), converged, time.perf_counter() - start, config.to_dict())
    log.debug("trained %s: %d epochs, converged=%s, final loss %.6g",
              dataset.name, report.epochs_run, converged, curve[-1].total)
    return model, report


def recover_all(model: ConleModel, dataset: LeDataset) -> np.ndarray:
    if dataset.dim1 != model.f1.n_in or dataset.c != model.f2.n_in or dataset.c != model.f3.n_out:
        raise ValueError("model dimensions do not match the dataset")
    emb = embed(model.f1, model.f2, dataset.features, dataset.logical)
    return recover(model.f3, emb.H)


def with_overrides(config: TrainConfig, **conle_overrides) -> TrainConfig:
    return replace(config, conle=replace(config.conle, **conle_overrides))
