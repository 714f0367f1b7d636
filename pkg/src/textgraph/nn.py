"""Minimal dense NN core: MLPs, reverse-mode autodiff over a fixed op set,
binary cross-entropy, SGD with momentum and weight decay, gradient checking,
and a binary checkpoint format.

Everything runs in float64. The op set (matmul, add, add-bias, relu, sigmoid,
column concat, row gather, mean BCE) is exactly what the link-prediction
compute graph needs; there is no general autograd beyond it.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import InvalidArchitecture, ShapeError

PROB_EPS = 1e-7  # clamp for probabilities entering the log

Matrix = np.ndarray  # 2-D float64, row-major


class Var:
    """A node in the tape: a value and (after backward) its gradient."""

    __slots__ = ("value", "grad", "const")

    def __init__(self, value: np.ndarray, const: bool = False):
        self.value = value
        self.grad: np.ndarray | None = None
        self.const = const

    def add_grad(self, g: np.ndarray) -> None:
        if self.const:
            return
        if self.grad is None:
            self.grad = np.zeros_like(self.value)
        self.grad += g


class Tape:
    """Explicit tape: ops append backward closures, replayed in reverse.

    With grad_enabled=False nothing is recorded and the same code path acts
    as a plain forward evaluator.
    """

    def __init__(self, grad_enabled: bool = True):
        self.grad_enabled = grad_enabled
        self._steps: list[Callable[[], None]] = []

    def record(self, fn: Callable[[], None]) -> None:
        if self.grad_enabled:
            self._steps.append(fn)

    def leaf(self, value: np.ndarray, const: bool = False) -> Var:
        return Var(np.asarray(value, dtype=np.float64), const=const)

    def backward(self, loss: Var) -> None:
        if not self.grad_enabled:
            raise ShapeError("backward on a disabled tape")
        loss.grad = np.ones_like(loss.value)
        for fn in reversed(self._steps):
            fn()


def matmul(tape: Tape, a: Var, b: Var) -> Var:
    if a.value.shape[1] != b.value.shape[0]:
        raise ShapeError(f"matmul {a.value.shape} @ {b.value.shape}")
    out = Var(a.value @ b.value)

    def back():
        if out.grad is None:
            return
        if not a.const:
            a.add_grad(out.grad @ b.value.T)
        if not b.const:
            b.add_grad(a.value.T @ out.grad)

    tape.record(back)
    return out


def add(tape: Tape, a: Var, b: Var) -> Var:
    if a.value.shape != b.value.shape:
        raise ShapeError(f"add {a.value.shape} vs {b.value.shape}")
    out = Var(a.value + b.value)

    def back():
        if out.grad is None:
            return
        a.add_grad(out.grad)
        b.add_grad(out.grad)

    tape.record(back)
    return out


def add_bias(tape: Tape, x: Var, b: Var) -> Var:
    if b.value.shape != (1, x.value.shape[1]):
        raise ShapeError(f"bias {b.value.shape} for input {x.value.shape}")
    out = Var(x.value + b.value)

    def back():
        if out.grad is None:
            return
        x.add_grad(out.grad)
        b.add_grad(out.grad.sum(axis=0, keepdims=True))

    tape.record(back)
    return out


def relu(tape: Tape, x: Var) -> Var:
    out = Var(np.maximum(x.value, 0.0))

    def back():
        if out.grad is None:
            return
        x.add_grad(out.grad * (x.value > 0.0))

    tape.record(back)
    return out


def sigmoid(tape: Tape, x: Var) -> Var:
    out = Var(1.0 / (1.0 + np.exp(-x.value)))

    def back():
        if out.grad is None:
            return
        x.add_grad(out.grad * out.value * (1.0 - out.value))

    tape.record(back)
    return out


def concat_cols(tape: Tape, parts: Sequence[Var]) -> Var:
    rows = {p.value.shape[0] for p in parts}
    if len(rows) != 1:
        raise ShapeError(f"concat with mismatched row counts {rows}")
    out = Var(np.concatenate([p.value for p in parts], axis=1))
    offsets = np.cumsum([0] + [p.value.shape[1] for p in parts])

    def back():
        if out.grad is None:
            return
        for p, lo, hi in zip(parts, offsets[:-1], offsets[1:]):
            p.add_grad(out.grad[:, lo:hi])

    tape.record(back)
    return out


def gather_rows(tape: Tape, x: Var, idx: np.ndarray) -> Var:
    idx = np.asarray(idx, dtype=np.intp)
    out = Var(x.value[idx])

    def back():
        if out.grad is None or x.const:
            return
        g = np.zeros_like(x.value)
        np.add.at(g, idx, out.grad)
        x.add_grad(g)

    tape.record(back)
    return out


def bce_mean(tape: Tape, pred: Var, target: np.ndarray) -> Var:
    """Mean binary cross-entropy of predicted probabilities against 0/1 targets.

    Probabilities are clamped to [PROB_EPS, 1-PROB_EPS]; the gradient is zero
    where the clamp is active, consistent with the clamped loss definition.
    """
    t = np.asarray(target, dtype=np.float64)
    if t.shape != pred.value.shape:
        raise ShapeError(f"bce targets {t.shape} vs predictions {pred.value.shape}")
    p = np.clip(pred.value, PROB_EPS, 1.0 - PROB_EPS)
    n = p.size
    out = Var(np.asarray(-(t * np.log(p) + (1.0 - t) * np.log1p(-p)).sum() / n))

    def back():
        if out.grad is None:
            return
        inside = (pred.value > PROB_EPS) & (pred.value < 1.0 - PROB_EPS)
        g = (-(t / p) + (1.0 - t) / (1.0 - p)) / n
        pred.add_grad(out.grad * g * inside)

    tape.record(back)
    return out


def bce_loss(pred: np.ndarray, target: np.ndarray) -> float:
    """Plain-array mean BCE (same clamping as the taped op)."""
    p = np.clip(np.asarray(pred, dtype=np.float64), PROB_EPS, 1.0 - PROB_EPS)
    t = np.asarray(target, dtype=np.float64)
    return float(-(t * np.log(p) + (1.0 - t) * np.log1p(-p)).mean())


_ACTIVATIONS = ("linear", "relu", "sigmoid")


@dataclass
class Mlp:
    """Fully connected stack with ReLU between layers and a configurable
    output activation."""

    dims: list[int]
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    output_activation: str = "linear"

    @property
    def depth(self) -> int:
        return len(self.weights)

    def forward(self, tape: Tape, x: Var) -> Var:
        if x.value.ndim != 2 or x.value.shape[1] != self.dims[0]:
            raise ShapeError(f"input {x.value.shape} for dims {self.dims}")
        h = x
        last = self.depth - 1
        for k, (w, b) in enumerate(zip(self.weights, self.biases)):
            h = add_bias(tape, matmul(tape, h, Var(w)), Var(b))
            if k < last:
                h = relu(tape, h)
        if self.output_activation == "relu":
            h = relu(tape, h)
        elif self.output_activation == "sigmoid":
            h = sigmoid(tape, h)
        return h

    def forward_vars(self, tape: Tape, x: Var, params: list[Var]) -> Var:
        """Forward pass reusing caller-held parameter Vars (for training)."""
        if x.value.ndim != 2 or x.value.shape[1] != self.dims[0]:
            raise ShapeError(f"input {x.value.shape} for dims {self.dims}")
        if len(params) != 2 * self.depth:
            raise ShapeError("parameter var count mismatch")
        h = x
        last = self.depth - 1
        for k in range(self.depth):
            h = add_bias(tape, matmul(tape, h, params[2 * k]), params[2 * k + 1])
            if k < last:
                h = relu(tape, h)
        if self.output_activation == "relu":
            h = relu(tape, h)
        elif self.output_activation == "sigmoid":
            h = sigmoid(tape, h)
        return h

    def apply(self, x: np.ndarray) -> np.ndarray:
        tape = Tape(grad_enabled=False)
        return self.forward(tape, tape.leaf(x, const=True)).value

    def named_params(self, prefix: str) -> list[tuple[str, np.ndarray, bool]]:
        """(name, array, is_bias) triples in a stable order."""
        out = []
        for k in range(self.depth):
            out.append((f"{prefix}.w{k}", self.weights[k], False))
            out.append((f"{prefix}.b{k}", self.biases[k], True))
        return out


def mlp_init(
    dims: Sequence[int],
    output_activation: str = "linear",
    seed: int | np.random.Generator = 0,
    init_std: float = 0.01,
) -> Mlp:
    """Weights ~ N(0, init_std²), biases zero."""
    dims = list(int(d) for d in dims)
    if len(dims) < 2 or any(d <= 0 for d in dims):
        raise InvalidArchitecture(f"bad layer dims {dims}")
    if output_activation not in _ACTIVATIONS:
        raise InvalidArchitecture(f"unknown output activation {output_activation!r}")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    weights = [rng.normal(0.0, init_std, size=(a, b)) for a, b in zip(dims[:-1], dims[1:])]
    biases = [np.zeros((1, b)) for b in dims[1:]]
    return Mlp(dims=dims, weights=weights, biases=biases, output_activation=output_activation)


@dataclass
class SgdState:
    """SGD with momentum; weight decay applies to weights only, never biases."""

    learning_rate: float
    momentum: float = 0.9
    weight_decay: float = 0.0005
    velocities: dict[str, np.ndarray] = field(default_factory=dict)

    def step(self, params: Iterable[tuple[str, np.ndarray, np.ndarray, bool]]) -> None:
        """params: (name, value, grad, is_bias); values are updated in place."""
        for name, value, grad, is_bias in params:
            if grad.shape != value.shape:
                raise ShapeError(f"grad shape {grad.shape} vs param {value.shape} for {name}")
            g = grad if is_bias or self.weight_decay == 0.0 else grad + self.weight_decay * value
            v = self.velocities.get(name)
            if v is None:
                v = np.zeros_like(value)
                self.velocities[name] = v
            v *= self.momentum
            v -= self.learning_rate * g
            value += v


def sgd_step(
    state: SgdState, params: Iterable[tuple[str, np.ndarray, np.ndarray, bool]]
) -> None:
    state.step(params)


def gradcheck(
    loss_fn: Callable[[], float],
    params: dict[str, np.ndarray],
    grads: dict[str, np.ndarray],
    h: float = 1e-4,
    max_entries: int | None = None,
    rng: np.random.Generator | None = None,
) -> float:
    """Max relative error between analytic grads and central finite differences.

    loss_fn must recompute the scalar loss from the current (perturbed in
    place) parameter arrays. With max_entries set, a seeded random subset of
    entries per parameter is checked instead of every entry.
    """
    if not (1e-6 <= h <= 1e-3):
        raise ValueError(f"step h={h} outside [1e-6, 1e-3]")
    worst = 0.0
    for name, arr in params.items():
        flat = arr.reshape(-1)
        g_flat = grads[name].reshape(-1)
        idxs = np.arange(flat.size)
        if max_entries is not None and flat.size > max_entries:
            if rng is None:
                rng = np.random.default_rng(0)
            idxs = rng.choice(flat.size, size=max_entries, replace=False)
        for i in idxs:
            old = flat[i]
            flat[i] = old + h
            lp = loss_fn()
            flat[i] = old - h
            lm = loss_fn()
            flat[i] = old
            fd = (lp - lm) / (2.0 * h)
            an = g_flat[i]
            err = abs(an - fd) / max(abs(an), abs(fd), 1e-8)
            if err > worst:
                worst = err
    return worst


CHECKPOINT_MAGIC = "textgraph-checkpoint v1"


def save_checkpoint(
    path: str,
    manifest: dict[str, str],
    params: Sequence[tuple[str, np.ndarray]],
) -> None:
    """Structured-text header plus a flat little-endian float64 block."""
    lines = [CHECKPOINT_MAGIC]
    for key in sorted(manifest):
        lines.append(f"meta {key} {manifest[key]}")
    blobs = []
    for name, arr in params:
        if arr.ndim != 2:
            raise ShapeError(f"checkpoint params must be 2-D, got {arr.shape} for {name}")
        lines.append(f"param {name} {arr.shape[0]} {arr.shape[1]}")
        blobs.append(np.ascontiguousarray(arr, dtype="<f8").tobytes())
    header = ("\n".join(lines) + "\nend\n").encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(header)
        for blob in blobs:
            fh.write(blob)


def load_checkpoint(path: str) -> tuple[dict[str, str], dict[str, np.ndarray]]:
    with open(path, "rb") as fh:
        raw = fh.read()
    nl = raw.index(b"\nend\n")
    header = raw[:nl].decode("utf-8").splitlines()
    blob = raw[nl + len(b"\nend\n"):]
    if header[0] != CHECKPOINT_MAGIC:
        raise ValueError(f"not a checkpoint file: {header[0]!r}")
    manifest: dict[str, str] = {}
    specs: list[tuple[str, int, int]] = []
    for line in header[1:]:
        kind, rest = line.split(" ", 1)
        if kind == "meta":
            key, value = rest.split(" ", 1)
            manifest[key] = value
        elif kind == "param":
            name, rows, cols = rest.rsplit(" ", 2)
            specs.append((name, int(rows), int(cols)))
        else:
            raise ValueError(f"unknown header line {line!r}")
    params: dict[str, np.ndarray] = {}
    offset = 0
    for name, rows, cols in specs:
        count = rows * cols
        arr = np.frombuffer(blob, dtype="<f8", count=count, offset=offset)
        params[name] = arr.reshape(rows, cols).astype(np.float64)
        offset += count * 8
    if offset != len(blob):
        raise ValueError("checkpoint parameter block has trailing bytes")
    return manifest, params
