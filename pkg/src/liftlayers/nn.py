"""A small double-precision feedforward network engine.

Layers act on row-major batches of shape ``(batch, features)``. Besides the
usual fully connected and ReLU layers there are maxout units and the
coordinate-wise lifting activation, in standard or scaled form. A lifting
layer maps each input coordinate to a block of lifted coefficients and
concatenates the blocks in coordinate order.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

from .core import STANDARD, SCALED, KnotSequence, lift_jacobian_many, lift_many, scaled_lift_many
from .errors import RetryExhaustedError, ShapeError, StateError
from .losses import LossSpec, batch_loss

log = logging.getLogger(__name__)

CHECKPOINT_MAGIC = "liftlayers-checkpoint 1"


def _as_batch(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if x.ndim != 2:
        raise ShapeError(f"expected a 2-D batch, got shape {x.shape}")
    return x


class Layer:
    """Base layer. Subclasses fill ``params``/``grads`` and implement the passes."""

    kind = "layer"

    def __init__(self):
        self.params: dict[str, np.ndarray] = {}
        self.grads: dict[str, np.ndarray] = {}
        self._cache = None

    def out_width(self, in_width: int) -> int:
        return in_width

    def forward(self, x: np.ndarray, cache: bool = True) -> np.ndarray:
        raise NotImplementedError

    def backward(self, grad: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def kink_distance(self, x: np.ndarray) -> float:
        """Distance of the layer input to the nearest non-differentiable point."""
        return np.inf

    def describe(self) -> str:
        return self.kind

    def _cached(self):
        if self._cache is None:
            raise StateError(f"{self.kind}: backward called without a cached forward pass")
        return self._cache


class Dense(Layer):
    """Fully connected layer ``x @ W.T + b`` with ``W`` of shape ``(out, in)``."""

    kind = "dense"

    def __init__(self, in_features: int, out_features: int, bias: bool = True,
                 rng: np.random.Generator | None = None):
        super().__init__()
        self.in_features = in_features
        self.out_features = out_features
        self.has_bias = bias
        rng = rng if rng is not None else np.random.default_rng(0)
        bound = 1.0 / np.sqrt(in_features)
        self.params["weight"] = rng.uniform(-bound, bound, size=(out_features, in_features))
        if bias:
            self.params["bias"] = np.zeros(out_features)
        self.grads = {k: np.zeros_like(v) for k, v in self.params.items()}

    def out_width(self, in_width: int) -> int:
        if in_width != self.in_features:
            raise ShapeError(f"dense layer expects width {self.in_features}, got {in_width}")
        return self.out_features

    def forward(self, x, cache=True):
        if x.shape[1] != self.in_features:
            raise ShapeError(f"dense layer expects width {self.in_features}, got {x.shape[1]}")
        out = x @ self.params["weight"].T
        if self.has_bias:
            out = out + self.params["bias"]
        self._cache = x if cache else None
        return out

    def backward(self, grad):
        x = self._cached()
        self.grads["weight"] = grad.T @ x
        if self.has_bias:
            self.grads["bias"] = grad.sum(axis=0)
        return grad @ self.params["weight"]

    def describe(self) -> str:
        return f"dense in={self.in_features} out={self.out_features} bias={int(self.has_bias)}"


class ReLU(Layer):
    kind = "relu"

    def forward(self, x, cache=True):
        self._cache = x if cache else None
        return np.maximum(x, 0.0)

    def backward(self, grad):
        # derivative 0 at the kink
        return grad * (self._cached() > 0)

    def kink_distance(self, x):
        return float(np.min(np.abs(x))) if x.size else np.inf


class Maxout(Layer):
    """Maximum over consecutive groups of ``group_size`` columns.

    The affine pieces live in a preceding Dense layer. Ties go to the lowest
    column within a group.
    """

    kind = "maxout"

    def __init__(self, group_size: int):
        super().__init__()
        if group_size < 1:
            raise ValueError("group_size must be positive")
        self.group_size = group_size

    def out_width(self, in_width):
        if in_width % self.group_size:
            raise ShapeError(f"width {in_width} not divisible by maxout group size {self.group_size}")
        return in_width // self.group_size

    def forward(self, x, cache=True):
        out, arg = maxout_forward(x, self.group_size)
        self._cache = (x.shape, arg) if cache else None
        return out

    def backward(self, grad):
        shape, arg = self._cached()
        k = self.group_size
        g = np.zeros((shape[0], shape[1] // k, k))
        np.put_along_axis(g, arg[..., None], grad[..., None], axis=2)
        return g.reshape(shape)

    def kink_distance(self, x):
        if self.group_size == 1 or not x.size:
            return np.inf
        top2 = np.sort(x.reshape(x.shape[0], -1, self.group_size), axis=2)[..., -2:]
        return float(np.min(top2[..., 1] - top2[..., 0]))

    def describe(self):
        return f"maxout k={self.group_size}"


def maxout_forward(pre_activations, group_size: int):
    """Group-wise maximum and the (lowest) argmax inside each group."""
    x = _as_batch(pre_activations)
    if x.shape[1] % group_size:
        raise ShapeError(f"width {x.shape[1]} not divisible by maxout group size {group_size}")
    groups = x.reshape(x.shape[0], -1, group_size)
    arg = np.argmax(groups, axis=2)
    return np.take_along_axis(groups, arg[..., None], axis=2)[..., 0], arg


class Lifting(Layer):
    """Coordinate-wise lifting activation.

    ``mode="standard"`` clamps out-of-range inputs by default (with a single
    logged warning); ``mode="scaled"`` extrapolates linearly by default. In
    scaled mode the column of a zero knot is structurally zero and dropped
    unless ``drop_zero=False``.
    """

    kind = "lifting"

    def __init__(self, knots, mode: str = STANDARD, clamp: bool = True,
                 extend: bool = True, drop_zero: bool = True):
        super().__init__()
        if mode not in (STANDARD, SCALED):
            raise ValueError(f"unknown lifting mode {mode!r}")
        self.knots = knots if isinstance(knots, KnotSequence) else KnotSequence(knots)
        self.mode = mode
        self.clamp = clamp
        self.extend = extend
        self.drop_zero = drop_zero
        keep = np.ones(len(self.knots), dtype=bool)
        if mode == SCALED and drop_zero:
            keep &= self.knots.values != 0.0
        self._keep = keep
        self._warned = False

    @property
    def block(self) -> int:
        return int(self._keep.sum())

    def out_width(self, in_width):
        return in_width * self.block

    def _lift(self, flat):
        if self.mode == STANDARD:
            if self.clamp and not self._warned and not np.all(self.knots.contains(flat)):
                log.warning("lifting layer clamps inputs outside [%g, %g]",
                            self.knots.lower, self.knots.upper)
                self._warned = True
            return lift_many(flat, self.knots, clamp=self.clamp)
        return scaled_lift_many(flat, self.knots, extend=self.extend)

    def forward(self, x, cache=True):
        n, w = x.shape
        z = self._lift(x.ravel())[:, self._keep]
        self._cache = x if cache else None
        return z.reshape(n, w * self.block)

    def backward(self, grad):
        x = self._cached()
        n, w = x.shape
        jac = lift_jacobian_many(x.ravel(), self.knots, self.mode,
                                 extend=self.extend, clamp=self.clamp)[:, self._keep]
        g = grad.reshape(n * w, self.block)
        return np.einsum("ij,ij->i", g, jac).reshape(n, w)

    def kink_distance(self, x):
        if not x.size:
            return np.inf
        t = self.knots.values
        return float(np.min(np.abs(x.ravel()[:, None] - t[None, :])))

    def describe(self):
        knots = ",".join(repr(float(v)) for v in self.knots.values)
        return (f"lifting mode={self.mode} clamp={int(self.clamp)} extend={int(self.extend)} "
                f"drop_zero={int(self.drop_zero)} knots={knots}")


class Network:
    """Ordered stack of layers with a fixed input width."""

    def __init__(self, layers: Sequence[Layer], in_features: int):
        self.layers = list(layers)
        self.in_features = in_features
        width = in_features
        for layer in self.layers:
            width = layer.out_width(width)
        self.out_features = width
        self._forwarded = False

    def __repr__(self):
        inner = ", ".join(l.describe().split(" knots=")[0] for l in self.layers)
        return f"Network(in={self.in_features}, [{inner}])"

    def forward(self, x, cache: bool = True) -> np.ndarray:
        x = _as_batch(x)
        if x.shape[1] != self.in_features:
            raise ShapeError(f"network expects input width {self.in_features}, got {x.shape[1]}")
        for layer in self.layers:
            x = layer.forward(x, cache)
        self._forwarded = cache
        return x

    __call__ = forward

    def predict(self, x) -> np.ndarray:
        return self.forward(x, cache=False)

    def backward(self, grad_output) -> np.ndarray:
        """Backpropagate ``dLoss/dOutput``; fills every layer's ``grads``, returns ``dLoss/dInput``."""
        if not self._forwarded:
            raise StateError("backward called without a cached forward pass")
        g = _as_batch(grad_output)
        for layer in reversed(self.layers):
            g = layer.backward(g)
        return g

    def parameters(self) -> Iterator[tuple[int, str, np.ndarray]]:
        for i, layer in enumerate(self.layers):
            for name, value in layer.params.items():
                yield i, name, value

    def gradients(self) -> Iterator[tuple[int, str, np.ndarray]]:
        for i, layer in enumerate(self.layers):
            for name in layer.params:
                yield i, name, layer.grads[name]

    def n_parameters(self) -> int:
        return sum(p.size for _, _, p in self.parameters())

    def loss_and_backward(self, x, y, loss: LossSpec) -> float:
        value, grad = batch_loss(loss, self.forward(x), y)
        self.backward(grad)
        return value

    def pre_activation_margin(self, x) -> float:
        """Smallest distance of any layer input to that layer's kinks."""
        x = _as_batch(x)
        margin = np.inf
        for layer in self.layers:
            margin = min(margin, layer.kink_distance(x))
            x = layer.forward(x, cache=False)
        return margin

    def save(self, path) -> None:
        Path(path).write_text(checkpoint_text(self))

    @classmethod
    def load(cls, path) -> "Network":
        return parse_checkpoint(Path(path).read_text())


class SGD:
    """Stochastic gradient descent with heavy-ball momentum and L2 weight decay.

    Per step: ``g += weight_decay * p``; ``v = momentum * v + g``; ``p -= lr * v``.
    """

    def __init__(self, net: Network, lr: float = 0.1, momentum: float = 0.9,
                 weight_decay: float = 1e-4):
        if not 0 <= momentum < 1:
            raise ValueError("momentum must lie in [0, 1)")
        self.net = net
        self.lr = lr
        self.momentum = momentum
        self.weight_decay = weight_decay
        self._velocity = {(i, n): np.zeros_like(p) for i, n, p in net.parameters()}

    def step(self) -> None:
        for i, name, p in self.net.parameters():
            g = self.net.layers[i].grads[name]
            if self.weight_decay:
                g = g + self.weight_decay * p
            v = self._velocity[(i, name)]
            v *= self.momentum
            v += g
            p -= self.lr * v


def l2_penalty(net: Network, weight_decay: float) -> float:
    """The ``weight_decay / 2 * ||params||^2`` term implied by SGD weight decay."""
    return 0.5 * weight_decay * sum(float(np.sum(p * p)) for _, _, p in net.parameters())


def train_epoch(net: Network, x, y, loss: LossSpec, opt: SGD, batch_size: int,
                rng: np.random.Generator) -> None:
    x = _as_batch(x)
    y = _as_batch(y)
    order = rng.permutation(len(x))
    for start in range(0, len(x), batch_size):
        idx = order[start:start + batch_size]
        net.loss_and_backward(x[idx], y[idx], loss)
        opt.step()


# -- gradient verification -------------------------------------------------

@dataclass
class GradCheckResult:
    max_rel_error: float
    errors: dict = field(default_factory=dict)
    attempts: int = 1


def _rel_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    scale = max(np.max(np.abs(analytic)), np.max(np.abs(numeric)), 1e-12)
    return float(np.max(np.abs(analytic - numeric)) / scale)


def _numeric_grad(f, p: np.ndarray, h: float) -> np.ndarray:
    g = np.zeros_like(p)
    flat, gflat = p.reshape(-1), g.reshape(-1)
    for k in range(flat.size):
        orig = flat[k]
        flat[k] = orig + h
        fp = f()
        flat[k] = orig - h
        fm = f()
        flat[k] = orig
        gflat[k] = (fp - fm) / (2 * h)
    return g


def gradient_check(net: Network, x, y, loss: LossSpec | None = None, h: float = 1e-6,
                   margin: float = 1e-3, rng: np.random.Generator | None = None,
                   max_retries: int = 10, include_input: bool = True) -> GradCheckResult:
    """Compare backprop gradients with central differences.

    The error of each parameter tensor is ``max|analytic - numeric|`` divided
    by the larger of the two max-magnitudes; the worst tensor is reported.
    If some layer input sits within ``margin`` of a kink (ReLU zero, maxout
    tie, lifting knot) the input batch is perturbed and the check retried.
    """
    loss = loss or LossSpec("squared")
    rng = rng if rng is not None else np.random.default_rng(0)
    x = _as_batch(x).copy()
    y = _as_batch(y)
    attempts = 0
    while net.pre_activation_margin(x) <= margin:
        attempts += 1
        if attempts > max_retries:
            raise RetryExhaustedError(f"inputs stay within {margin} of a kink after {max_retries} perturbations")
        x = x + rng.normal(scale=1e-2, size=x.shape) * (1.0 + np.abs(x))

    def objective():
        return batch_loss(loss, net.forward(x, cache=False), y)[0]

    value, grad = batch_loss(loss, net.forward(x), y)
    grad_in = net.backward(grad)
    errors = {}
    for i, name, p in net.parameters():
        analytic = net.layers[i].grads[name].copy()
        errors[(i, name)] = _rel_error(analytic, _numeric_grad(objective, p, h))
    if include_input:
        errors["input"] = _rel_error(grad_in, _numeric_grad(objective, x, h))
    return GradCheckResult(max(errors.values(), default=0.0), errors, attempts + 1)


# -- plain-text checkpoints ------------------------------------------------

def checkpoint_text(net: Network) -> str:
    lines = [CHECKPOINT_MAGIC, f"in_features {net.in_features}", f"layers {len(net.layers)}"]
    lines += [f"layer {i} {layer.describe()}" for i, layer in enumerate(net.layers)]
    for i, name, p in net.parameters():
        arr = np.atleast_2d(p) if p.ndim < 2 else p
        lines.append(f"param {i} {name} {p.ndim} {arr.shape[0]} {arr.shape[1]}")
        lines += [" ".join(repr(float(v)) for v in row) for row in arr]
    lines.append("end")
    return "\n".join(lines) + "\n"


def _layer_from_descriptor(tokens: list[str]) -> Layer:
    kind, opts = tokens[0], dict(t.split("=", 1) for t in tokens[1:])
    if kind == "dense":
        return Dense(int(opts["in"]), int(opts["out"]), bias=bool(int(opts["bias"])))
    if kind == "relu":
        return ReLU()
    if kind == "maxout":
        return Maxout(int(opts["k"]))
    if kind == "lifting":
        knots = [float(v) for v in opts["knots"].split(",")]
        return Lifting(knots, mode=opts["mode"], clamp=bool(int(opts["clamp"])),
                       extend=bool(int(opts["extend"])), drop_zero=bool(int(opts["drop_zero"])))
    raise ValueError(f"unknown layer kind {kind!r} in checkpoint")


def parse_checkpoint(text: str) -> Network:
    lines = text.splitlines()
    if not lines or lines[0].strip() != CHECKPOINT_MAGIC:
        raise ValueError("not a liftlayers checkpoint")
    in_features = int(lines[1].split()[1])
    n_layers = int(lines[2].split()[1])
    layers = []
    for k in range(n_layers):
        tokens = lines[3 + k].split()
        if tokens[0] != "layer" or int(tokens[1]) != k:
            raise ValueError(f"bad layer line: {lines[3 + k]!r}")
        layers.append(_layer_from_descriptor(tokens[2:]))
    net = Network(layers, in_features)
    pos = 3 + n_layers
    while lines[pos].strip() != "end":
        _, idx, name, ndim, rows, cols = lines[pos].split()
        rows, cols = int(rows), int(cols)
        block = np.array([[float(v) for v in lines[pos + 1 + r].split()] for r in range(rows)])
        target = net.layers[int(idx)].params[name]
        target[...] = block.reshape(target.shape) if int(ndim) > 1 else block.ravel()
        pos += 1 + rows
    return net
