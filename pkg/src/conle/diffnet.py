"""Small feed-forward networks with hand-written backpropagation.

Only what the label-enhancement objective needs: dense layers, LeakyReLU
hidden activations, an optional softmax head, plain SGD and a central
difference gradient checker.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

OUTPUT_HEADS = ("linear", "softmax")


class DivergenceError(FloatingPointError):
    """Raised when a gradient or loss stops being finite."""


def leaky_relu(x, slope: float):
    x = np.asarray(x, dtype=float)
    out = np.where(x >= 0, x, slope * x)
    return out.item() if out.ndim == 0 else out


def softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


@dataclass
class Mlp:
    layer_dims: list[int]
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    slope: float = 0.01
    output_head: str = "linear"

    @property
    def n_in(self) -> int:
        return self.layer_dims[0]

    @property
    def n_out(self) -> int:
        return self.layer_dims[-1]

    def parameters(self) -> list[np.ndarray]:
        """Weights then biases, layer by layer (the arrays themselves, not copies)."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out.extend((w, b))
        return out

    def copy(self) -> "Mlp":
        return Mlp(
            list(self.layer_dims),
            [w.copy() for w in self.weights],
            [b.copy() for b in self.biases],
            self.slope,
            self.output_head,
        )

    def zero_(self) -> "Mlp":
        for p in self.parameters():
            p[...] = 0.0
        return self

    # checkpoint format: plain JSON; python floats serialise with repr, which round-trips exactly
    def to_dict(self) -> dict:
        return {
            "layer_dims": list(self.layer_dims),
            "slope": self.slope,
            "output_head": self.output_head,
            "weights": [w.tolist() for w in self.weights],
            "biases": [b.tolist() for b in self.biases],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Mlp":
        mlp = cls(
            list(d["layer_dims"]),
            [np.asarray(w, dtype=float).reshape(o, i)
             for w, i, o in zip(d["weights"], d["layer_dims"][:-1], d["layer_dims"][1:])],
            [np.asarray(b, dtype=float) for b in d["biases"]],
            float(d["slope"]),
            d["output_head"],
        )
        _validate(mlp)
        return mlp

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()))

    @classmethod
    def load(cls, path) -> "Mlp":
        return cls.from_dict(json.loads(Path(path).read_text()))


@dataclass
class ForwardTrace:
    inputs: np.ndarray
    pre: list[np.ndarray] = field(default_factory=list)
    post: list[np.ndarray] = field(default_factory=list)

    @property
    def outputs(self) -> np.ndarray:
        return self.post[-1]


@dataclass
class Gradients:
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    # gradient w.r.t. the batch fed to forward(); lets callers chain networks
    inputs: np.ndarray | None = None

    def parameters(self) -> list[np.ndarray]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out.extend((w, b))
        return out

    def __add__(self, other: "Gradients") -> "Gradients":
        return Gradients(
            [a + b for a, b in zip(self.weights, other.weights)],
            [a + b for a, b in zip(self.biases, other.biases)],
        )

    def scaled(self, factor: float) -> "Gradients":
        return Gradients([factor * w for w in self.weights], [factor * b for b in self.biases])

    @classmethod
    def zeros_like(cls, mlp: Mlp) -> "Gradients":
        return cls([np.zeros_like(w) for w in mlp.weights], [np.zeros_like(b) for b in mlp.biases])


def _validate(mlp: Mlp) -> None:
    dims = mlp.layer_dims
    if len(dims) < 2:
        raise ValueError("need at least two layer dims")
    if len(mlp.weights) != len(dims) - 1 or len(mlp.biases) != len(dims) - 1:
        raise ValueError("parameter list length does not match layer dims")
    for i, (w, b) in enumerate(zip(mlp.weights, mlp.biases)):
        if w.shape != (dims[i + 1], dims[i]):
            raise ValueError(f"weights[{i}] has shape {w.shape}, expected {(dims[i + 1], dims[i])}")
        if b.shape != (dims[i + 1],):
            raise ValueError(f"biases[{i}] has shape {b.shape}, expected {(dims[i + 1],)}")
    if mlp.output_head not in OUTPUT_HEADS:
        raise ValueError(f"unknown output head {mlp.output_head!r}")


def init_mlp(layer_dims: Sequence[int], slope: float = 0.01, output_head: str = "linear",
             seed: int | np.random.Generator = 0) -> Mlp:
    """Glorot-uniform weights, zero biases.

    ``seed`` may be an integer or an existing generator; the latter lets a
    caller draw several networks from one stream.
    """
    dims = [int(d) for d in layer_dims]
    if len(dims) < 2:
        raise ValueError("need at least two layer dims")
    if any(d < 1 for d in dims):
        raise ValueError(f"layer dims must be >= 1, got {dims}")
    if not 0 < slope < 1:
        raise ValueError(f"LeakyReLU slope must lie in (0, 1), got {slope}")
    if output_head not in OUTPUT_HEADS:
        raise ValueError(f"unknown output head {output_head!r}")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-bound, bound, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    return Mlp(dims, weights, biases, float(slope), output_head)


def forward(mlp: Mlp, batch: np.ndarray) -> ForwardTrace:
    x = np.asarray(batch, dtype=float)
    if x.ndim != 2 or x.shape[1] != mlp.n_in:
        raise ValueError(f"batch of shape {x.shape} does not match input dim {mlp.n_in}")
    trace = ForwardTrace(inputs=x)
    a = x
    last = len(mlp.weights) - 1
    for i, (w, b) in enumerate(zip(mlp.weights, mlp.biases)):
        z = a @ w.T + b
        if i < last:
            a = np.where(z >= 0, z, mlp.slope * z)
        elif mlp.output_head == "softmax":
            a = softmax(z)
        else:
            a = z
        trace.pre.append(z)
        trace.post.append(a)
    return trace


def backward(mlp: Mlp, trace: ForwardTrace, output_grad: np.ndarray) -> Gradients:
    g = np.asarray(output_grad, dtype=float)
    if g.shape != trace.outputs.shape:
        raise ValueError(f"output grad shape {g.shape} != output shape {trace.outputs.shape}")
    if mlp.output_head == "softmax":
        s = trace.outputs
        g = s * (g - np.sum(g * s, axis=1, keepdims=True))
    n_layers = len(mlp.weights)
    dW: list[np.ndarray] = [None] * n_layers  # type: ignore[list-item]
    db: list[np.ndarray] = [None] * n_layers  # type: ignore[list-item]
    for i in range(n_layers - 1, -1, -1):
        a_prev = trace.post[i - 1] if i > 0 else trace.inputs
        dW[i] = g.T @ a_prev
        db[i] = g.sum(axis=0)
        g = g @ mlp.weights[i]
        if i > 0:
            # subgradient at exactly 0 follows the positive branch
            g = np.where(trace.pre[i - 1] >= 0, g, mlp.slope * g)
    return Gradients(dW, db, inputs=g)


def sgd_step(mlp: Mlp, grads: Gradients, lr: float) -> Mlp:
    """In-place ``p <- p - lr * g``; returns the same network."""
    if lr < 0:
        raise ValueError("learning rate must be non-negative")
    for p, g in zip(mlp.parameters(), grads.parameters()):
        if p.shape != g.shape:
            raise ValueError(f"gradient shape {g.shape} != parameter shape {p.shape}")
        if not np.all(np.isfinite(g)):
            raise DivergenceError("non-finite gradient")
    for p, g in zip(mlp.parameters(), grads.parameters()):
        p -= lr * g
    return mlp


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    a = np.asarray(analytic, dtype=float).ravel()
    f = np.asarray(numeric, dtype=float).ravel()
    if a.size == 0:
        return 0.0
    denom = np.maximum(np.maximum(np.abs(a), np.abs(f)), 1e-8)
    return float(np.max(np.abs(a - f) / denom))


def numeric_gradients(params: Sequence[np.ndarray], loss_fn: Callable[[], float],
                      h: float = 1e-5) -> list[np.ndarray]:
    """Central differences of ``loss_fn`` w.r.t. each array in ``params``.

    ``params`` are perturbed in place and restored afterwards.
    """
    if h <= 0:
        raise ValueError("step h must be positive")
    out = []
    for p in params:
        num = np.zeros_like(p)
        flat, nflat = p.reshape(-1), num.reshape(-1)
        for j in range(flat.size):
            orig = flat[j]
            flat[j] = orig + h
            up = loss_fn()
            flat[j] = orig - h
            down = loss_fn()
            flat[j] = orig
            nflat[j] = (up - down) / (2 * h)
        out.append(num)
    return out


def compare_gradients(params: Sequence[np.ndarray], loss_fn: Callable[[], float],
                      analytic: Sequence[np.ndarray], h: float = 1e-5) -> float:
    numeric = numeric_gradients(params, loss_fn, h)
    return max((relative_error(a, f) for a, f in zip(analytic, numeric)), default=0.0)


def grad_check(mlp: Mlp, scalar_loss: Callable[[np.ndarray], tuple[float, np.ndarray]],
               batch: np.ndarray, h: float = 1e-5) -> float:
    """Max relative error between backprop and central differences.

    ``scalar_loss(outputs)`` returns ``(value, d value / d outputs)``.
    """
    trace = forward(mlp, batch)
    _, out_grad = scalar_loss(trace.outputs)
    grads = backward(mlp, trace, out_grad)
    return compare_gradients(
        mlp.parameters(),
        lambda: float(scalar_loss(forward(mlp, batch).outputs)[0]),
        grads.parameters(),
        h,
    )
