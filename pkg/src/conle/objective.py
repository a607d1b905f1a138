"""Contrastive label-enhancement objective and its exact gradients.

Features and logical labels are projected by two networks into a shared
space (``Z`` and ``Q``), pulled together per sample by an instance-level
contrastive loss, concatenated into ``H`` and mapped to a label
distribution by a third network. The distribution is trained to stay
close to the logical label and to rank every relevant label above every
irrelevant one by a margin.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .diffnet import DivergenceError, Gradients, Mlp, backward, forward, init_mlp

VARIANTS = ("full", "ablation_h", "ablation_l")
THRESHOLD_FORMS = ("extreme_pair", "all_pairs")
DISTANCE_TARGETS = ("logical", "softmax_logical")
NORM_FLOOR = 1e-12


@dataclass(frozen=True)
class ConleConfig:
    tau_I: float = 0.5
    lambda1: float = 0.5
    lambda2: float = 1.0
    epsilon: float = 0.01
    dim2: int = 64
    hidden: int = 64
    slope: float = 0.01
    variant: str = "full"
    threshold_form: str = "extreme_pair"
    include_positive_in_denominator: bool = False
    distance_target: str = "logical"

    def __post_init__(self):
        if self.tau_I <= 0:
            raise ValueError("tau_I must be positive")
        if self.lambda1 < 0 or self.lambda2 < 0:
            raise ValueError("lambda1 and lambda2 must be non-negative")
        if self.epsilon < 0:
            raise ValueError("epsilon must be non-negative")
        if self.dim2 < 1 or self.hidden < 1:
            raise ValueError("dim2 and hidden must be >= 1")
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}")
        if self.threshold_form not in THRESHOLD_FORMS:
            raise ValueError(f"unknown threshold form {self.threshold_form!r}")
        if self.distance_target not in DISTANCE_TARGETS:
            raise ValueError(f"unknown distance target {self.distance_target!r}")

    @property
    def uses_contrastive(self) -> bool:
        return self.variant != "ablation_h"

    @property
    def uses_threshold(self) -> bool:
        return self.variant != "ablation_l"

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class Embeddings:
    Z: np.ndarray
    Q: np.ndarray
    H: np.ndarray


@dataclass(frozen=True)
class LossBreakdown:
    l_con: float
    l_dis: float
    l_thr: float
    l_att: float
    total: float

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class ConleModel:
    f1: Mlp
    f2: Mlp
    f3: Mlp

    def to_dict(self) -> dict:
        return {"f1": self.f1.to_dict(), "f2": self.f2.to_dict(), "f3": self.f3.to_dict()}

    @classmethod
    def from_dict(cls, d: dict) -> "ConleModel":
        return cls(Mlp.from_dict(d["f1"]), Mlp.from_dict(d["f2"]), Mlp.from_dict(d["f3"]))


def init_model(dim1: int, c: int, config: ConleConfig, seed) -> ConleModel:
    """F1: dim1 -> hidden -> dim2, F2: c -> hidden -> dim2, F3: 2*dim2 -> hidden -> c (softmax).

    The three networks are drawn in that order from one generator, so variants
    sharing a seed start from identical parameters.
    """
    rng = np.random.default_rng(seed)
    h, d2 = config.hidden, config.dim2
    return ConleModel(
        init_mlp([dim1, h, d2], config.slope, "linear", rng),
        init_mlp([c, h, d2], config.slope, "linear", rng),
        init_mlp([2 * d2, h, c], config.slope, "softmax", rng),
    )


def embed(f1: Mlp, f2: Mlp, features: np.ndarray, logical: np.ndarray) -> Embeddings:
    if f1.n_out != f2.n_out:
        raise ValueError(f"projection dims differ: {f1.n_out} vs {f2.n_out}")
    if len(features) != len(logical):
        raise ValueError("features and logical labels have different row counts")
    Z = forward(f1, features).outputs
    Q = forward(f2, logical).outputs
    return Embeddings(Z, Q, np.concatenate([Z, Q], axis=1))


def recover(f3: Mlp, H: np.ndarray) -> np.ndarray:
    if f3.output_head != "softmax":
        raise ValueError("recovery network needs a softmax head")
    H = np.asarray(H, dtype=float)
    if H.shape[0] == 0:
        if H.ndim != 2 or H.shape[1] != f3.n_in:
            raise ValueError(f"H of shape {H.shape} does not match input dim {f3.n_in}")
        return np.zeros((0, f3.n_out))
    return forward(f3, H).outputs


def cosine_sim(u, v) -> float:
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if u.shape != v.shape:
        raise ValueError("vectors must have equal length")
    nu = max(np.linalg.norm(u), NORM_FLOOR)
    nv = max(np.linalg.norm(v), NORM_FLOOR)
    return float(u @ v / (nu * nv))


def _normalize_rows(X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    norms = np.maximum(np.linalg.norm(X, axis=1, keepdims=True), NORM_FLOOR)
    return X / norms, norms


def _normalize_rows_backward(Xn: np.ndarray, norms: np.ndarray, dXn: np.ndarray) -> np.ndarray:
    floored = norms[:, 0] <= NORM_FLOOR
    dX = (dXn - Xn * np.sum(Xn * dXn, axis=1, keepdims=True)) / norms
    # below the floor the norm is a constant, so only the scaling survives
    dX[floored] = dXn[floored] / NORM_FLOOR
    return dX


def _contrastive_parts(Z, Q, tau_I, include_positive):
    Z = np.asarray(Z, dtype=float)
    Q = np.asarray(Q, dtype=float)
    n = Z.shape[0]
    if n < 2:
        raise ValueError("contrastive loss needs a batch of at least 2 samples")
    if Q.shape != Z.shape:
        raise ValueError(f"Z and Q shapes differ: {Z.shape} vs {Q.shape}")
    Zn, zn = _normalize_rows(Z)
    Qn, qn = _normalize_rows(Q)
    V = np.concatenate([Zn, Qn])
    # einsum (not BLAS) gives every pair the same arithmetic wherever it sits in the batch
    S = np.einsum("ik,jk->ij", V, V) / tau_I
    pos = np.concatenate([np.arange(n, 2 * n), np.arange(n)])
    rows = np.arange(2 * n)
    # denominator: every other view of every other sample (and, optionally, the positive)
    logits = S.copy()
    logits[rows, rows] = -np.inf
    if not include_positive:
        logits[rows, pos] = -np.inf
    top = logits.max(axis=1, keepdims=True)
    # sorting each row and summing anchors exactly makes the value independent of sample order
    terms = np.sort(np.exp(logits - top), axis=1)
    lse = top[:, 0] + np.log(terms.sum(axis=1))
    per_anchor = lse - S[rows, pos]
    loss = math.fsum(per_anchor) / n
    return loss, (n, Zn, zn, Qn, qn, V, logits, lse, pos, rows)


def contrastive_loss(Z, Q, tau_I: float, include_positive: bool = False) -> float:
    """Mean over samples of l_Z + l_Q; each term is -log(exp(pos/tau) / sum over negatives)."""
    return _contrastive_parts(Z, Q, tau_I, include_positive)[0]


def contrastive_loss_grad(Z, Q, tau_I: float, include_positive: bool = False):
    """Returns ``(loss, dZ, dQ)``."""
    loss, (n, Zn, zn, Qn, qn, V, logits, lse, pos, rows) = _contrastive_parts(
        Z, Q, tau_I, include_positive)
    G = np.exp(logits - lse[:, None])
    G[rows, pos] -= 1.0
    G /= n
    dV = (G + G.T) @ V / tau_I
    dZ = _normalize_rows_backward(Zn, zn, dV[:n])
    dQ = _normalize_rows_backward(Qn, qn, dV[n:])
    return loss, dZ, dQ


def distance_loss(recovered: np.ndarray, logical: np.ndarray) -> float:
    """Squared Euclidean distance to the logical labels, summed over the batch."""
    D = np.asarray(recovered, dtype=float)
    L = np.asarray(logical, dtype=float)
    if D.shape != L.shape:
        raise ValueError(f"shape mismatch: {D.shape} vs {L.shape}")
    return float(np.sum((D - L) ** 2))


def distance_loss_grad(recovered, logical) -> tuple[float, np.ndarray]:
    D = np.asarray(recovered, dtype=float)
    L = np.asarray(logical, dtype=float)
    return distance_loss(D, L), 2.0 * (D - L)


def distance_target(logical: np.ndarray, mode: str = "logical") -> np.ndarray:
    """What the recovery is pulled towards: the raw 0/1 rows or their softmax."""
    L = np.asarray(logical, dtype=float)
    if mode == "logical":
        return L
    if mode == "softmax_logical":
        e = np.exp(L - L.max(axis=1, keepdims=True))
        return e / e.sum(axis=1, keepdims=True)
    raise ValueError(f"unknown distance target {mode!r}")


def _threshold(D, L, epsilon, form):
    D = np.asarray(D, dtype=float)
    L = np.asarray(L, dtype=float)
    if D.shape != L.shape:
        raise ValueError(f"shape mismatch: {D.shape} vs {L.shape}")
    if form not in THRESHOLD_FORMS:
        raise ValueError(f"unknown threshold form {form!r}")
    n = D.shape[0]
    grad = np.zeros_like(D)
    if n == 0:
        return 0.0, grad, 0
    relevant = L > 0.5
    valid = relevant.any(axis=1) & (~relevant).any(axis=1)
    rows = np.flatnonzero(valid)
    total = 0.0
    if form == "extreme_pair":
        # argmax/argmin resolve ties to the lowest label index
        neg_idx = np.argmax(np.where(relevant, -np.inf, D), axis=1)[rows]
        pos_idx = np.argmin(np.where(relevant, D, np.inf), axis=1)[rows]
        margin = D[rows, neg_idx] - D[rows, pos_idx] + epsilon
        active = margin > 0
        total = float(np.sum(margin[active]))
        grad[rows[active], neg_idx[active]] += 1.0
        grad[rows[active], pos_idx[active]] -= 1.0
    else:
        for m in rows:
            d = D[m]
            pos, neg = np.flatnonzero(relevant[m]), np.flatnonzero(~relevant[m])
            margin = d[neg][None, :] - d[pos][:, None] + epsilon
            active = margin > 0
            total += float(np.sum(margin[active]))
            grad[m, neg] += active.sum(axis=0)
            grad[m, pos] -= active.sum(axis=1)
    return total / n, grad / n, int(n - rows.size)


def threshold_loss(recovered, logical, epsilon: float, form: str = "extreme_pair") -> float:
    """Margin hinge ranking relevant labels above irrelevant ones, averaged over the batch.

    Rows without at least one relevant and one irrelevant label contribute 0.
    """
    return _threshold(recovered, logical, epsilon, form)[0]


def threshold_loss_grad(recovered, logical, epsilon: float, form: str = "extreme_pair"):
    """Returns ``(loss, dD, skipped_rows)``."""
    return _threshold(recovered, logical, epsilon, form)


def total_loss(l_con: float, l_dis: float, l_thr: float, config: ConleConfig) -> LossBreakdown:
    if not config.uses_contrastive:
        l_con = 0.0
    if not config.uses_threshold:
        l_thr = 0.0
    l_att = config.lambda1 * l_dis + config.lambda2 * l_thr
    return LossBreakdown(float(l_con), float(l_dis), float(l_thr), float(l_att), float(l_con + l_att))


def evaluate_loss(model: ConleModel, features, logical, config: ConleConfig) -> LossBreakdown:
    emb = embed(model.f1, model.f2, features, logical)
    D = recover(model.f3, emb.H)
    l_con = (contrastive_loss(emb.Z, emb.Q, config.tau_I, config.include_positive_in_denominator)
             if config.uses_contrastive else 0.0)
    l_thr = (threshold_loss(D, logical, config.epsilon, config.threshold_form)
             if config.uses_threshold else 0.0)
    l_dis = distance_loss(D, distance_target(logical, config.distance_target))
    return total_loss(l_con, l_dis, l_thr, config)


def loss_gradients(model: ConleModel, features, logical, config: ConleConfig,
                   weights: tuple[float, float, float] | None = None):
    """Loss breakdown and parameter gradients for (F1, F2, F3).

    ``weights`` overrides the coefficients on (l_con, l_dis, l_thr); by default
    they follow ``config`` and its variant. Used to check each term alone.
    """
    features = np.asarray(features, dtype=float)
    logical = np.asarray(logical, dtype=float)
    if weights is None:
        weights = (
            1.0 if config.uses_contrastive else 0.0,
            config.lambda1,
            config.lambda2 if config.uses_threshold else 0.0,
        )
    w_con, w_dis, w_thr = weights

    t1 = forward(model.f1, features)
    t2 = forward(model.f2, logical)
    Z, Q = t1.outputs, t2.outputs
    H = np.concatenate([Z, Q], axis=1)
    t3 = forward(model.f3, H)
    D = t3.outputs

    l_dis, dD = distance_loss_grad(D, distance_target(logical, config.distance_target))
    dD = w_dis * dD
    l_thr = 0.0
    if config.uses_threshold:
        l_thr, dthr, _ = threshold_loss_grad(D, logical, config.epsilon, config.threshold_form)
        dD = dD + w_thr * dthr
    g3 = backward(model.f3, t3, dD)
    d2 = model.f1.n_out
    dZ = g3.inputs[:, :d2].copy()
    dQ = g3.inputs[:, d2:].copy()

    l_con = 0.0
    if config.uses_contrastive:
        l_con, cz, cq = contrastive_loss_grad(Z, Q, config.tau_I,
                                              config.include_positive_in_denominator)
        dZ += w_con * cz
        dQ += w_con * cq
    g1 = backward(model.f1, t1, dZ)
    g2 = backward(model.f2, t2, dQ)
    parts = total_loss(l_con, l_dis, l_thr, config)
    if not np.isfinite(parts.total):
        raise DivergenceError("non-finite loss")
    return parts, (g1, g2, g3)


def weighted_total(model: ConleModel, features, logical, config: ConleConfig,
                   weights: tuple[float, float, float]) -> float:
    """Scalar objective matching ``loss_gradients(..., weights=weights)``."""
    emb = embed(model.f1, model.f2, features, logical)
    D = recover(model.f3, emb.H)
    value = weights[1] * distance_loss(D, distance_target(logical, config.distance_target))
    if config.uses_contrastive:
        value += weights[0] * contrastive_loss(emb.Z, emb.Q, config.tau_I,
                                               config.include_positive_in_denominator)
    if config.uses_threshold:
        value += weights[2] * threshold_loss(D, logical, config.epsilon, config.threshold_form)
    return float(value)


def gradients_as_list(grads: tuple[Gradients, Gradients, Gradients]) -> list[np.ndarray]:
    return [p for g in grads for p in g.parameters()]
