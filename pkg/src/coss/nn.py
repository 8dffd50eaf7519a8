"""Minimal tensor math with reverse-mode gradients for the fixed op set the
gated multi-branch classifier needs, plus SGD with momentum and weight decay.

Design notes:

* Values are float64 by default so finite-difference gradient checks are
  meaningful; call ``set_default_dtype(np.float32)`` to trade precision for
  speed.
* Every op validates that its output is finite and raises ``NumericError``
  otherwise, so NaN/Inf cannot propagate silently.
* Graphs are built per forward pass out of closures (one ``_backward`` per
  node) and freed with the tensors; parameters are the only long-lived nodes.
* A model instance is single-writer: training mutates parameters and
  batch-norm running statistics.  Inference inside ``no_grad()`` on a model
  in eval mode is read-only and safe to share across threads.
"""

from __future__ import annotations

import contextlib
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, InputError, NumericError, ShapeError, StateError

__all__ = [
    "Tensor",
    "Parameter",
    "BatchNormState",
    "SgdConfig",
    "no_grad",
    "set_default_dtype",
    "conv1d",
    "relu",
    "batch_norm",
    "global_max_pool",
    "dense",
    "softmax",
    "select",
    "weighted_sum",
    "cross_entropy",
    "backward",
    "sgd_step",
    "zero_grad",
]

_DEFAULT_DTYPE = np.float64
_GRAD_ENABLED = True


def set_default_dtype(dtype) -> None:
    """Set the dtype new tensors are coerced to (float32 or float64)."""
    global _DEFAULT_DTYPE
    dtype = np.dtype(dtype)
    if dtype not in (np.dtype(np.float32), np.dtype(np.float64)):
        raise ConfigError(f"default dtype must be float32 or float64, got {dtype}")
    _DEFAULT_DTYPE = dtype.type


def default_dtype():
    return _DEFAULT_DTYPE


@contextlib.contextmanager
def no_grad():
    """Disable graph construction inside the block (inference paths)."""
    global _GRAD_ENABLED
    prev = _GRAD_ENABLED
    _GRAD_ENABLED = False
    try:
        yield
    finally:
        _GRAD_ENABLED = prev


def _check_finite(arr: np.ndarray, op: str) -> None:
    if not np.all(np.isfinite(arr)):
        raise NumericError(f"non-finite values produced by {op}")


class Tensor:
    """Dense n-d array with an optional backward closure.

    ``data`` is always C-contiguous; ``grad`` is lazily allocated during
    backpropagation and has the same shape as ``data``.
    """

    __slots__ = ("data", "grad", "_parents", "_backward", "_done")

    def __init__(self, data, _parents=(), _backward=None):
        arr = np.asarray(data)
        if arr.dtype not in (np.float32, np.float64):
            arr = arr.astype(_DEFAULT_DTYPE)
        if not arr.flags["C_CONTIGUOUS"]:  # ascontiguousarray would promote 0-d to 1-d
            arr = np.ascontiguousarray(arr)
        self.data = arr
        self.grad = None
        self._parents = _parents
        self._backward = _backward
        self._done = False

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    def item(self) -> float:
        return float(self.data)

    def numpy(self) -> np.ndarray:
        return self.data

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, dtype={self.data.dtype})"


class Parameter(Tensor):
    """Trainable leaf: value plus persistent grad and momentum buffers."""

    __slots__ = ("momentum_buffer", "name")

    def __init__(self, data, name: str = ""):
        super().__init__(data)
        self.grad = np.zeros_like(self.data)
        self.momentum_buffer = np.zeros_like(self.data)
        self.name = name

    def __repr__(self):
        return f"Parameter({self.name!r}, shape={self.data.shape})"


def _accum(t: Tensor, g: np.ndarray) -> None:
    if t.grad is None:
        t.grad = np.zeros_like(t.data)
    t.grad += g


def _node(data: np.ndarray, op: str, parents, backward_fn) -> Tensor:
    _check_finite(data, op)
    if _GRAD_ENABLED:
        return Tensor(data, _parents=tuple(parents), _backward=backward_fn)
    return Tensor(data)


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


# ---------------------------------------------------------------------------
# ops
# ---------------------------------------------------------------------------


def conv1d(x: Tensor, weight: Tensor, bias: Tensor) -> Tensor:
    """Valid (no padding), stride-1 1-D convolution.

    x: [batch, ch_in, len], weight: [ch_out, ch_in, ks], bias: [ch_out]
    -> [batch, ch_out, len - ks + 1]
    """
    x, weight, bias = _as_tensor(x), _as_tensor(weight), _as_tensor(bias)
    if x.ndim != 3 or weight.ndim != 3:
        raise ShapeError(f"conv1d expects 3-d input and weight, got {x.shape} and {weight.shape}")
    b, c_in, n = x.shape
    c_out, c_in_w, ks = weight.shape
    if c_in != c_in_w:
        raise ShapeError(f"conv1d channel mismatch: input has {c_in}, weight expects {c_in_w}")
    if bias.shape != (c_out,):
        raise ShapeError(f"conv1d bias must have shape ({c_out},), got {bias.shape}")
    if n < ks:
        raise ShapeError(f"conv1d input length {n} shorter than kernel {ks}")

    windows = np.lib.stride_tricks.sliding_window_view(x.data, ks, axis=2)  # [b, c, l_out, ks]
    out = np.einsum("bclk,ock->bol", windows, weight.data, optimize=True)
    out += bias.data[None, :, None]

    def backward_fn(g):
        _accum(bias, g.sum(axis=(0, 2)))
        _accum(weight, np.einsum("bol,bclk->ock", g, windows, optimize=True))
        dx = np.zeros_like(x.data)
        for k in range(ks):
            # dx[b,c,t] += sum_o g[b,o,t-k] w[o,c,k]
            dx[:, :, k : k + g.shape[2]] += np.einsum(
                "bol,oc->bcl", g, weight.data[:, :, k], optimize=True
            )
        _accum(x, dx)

    return _node(out, "conv1d", (x, weight, bias), backward_fn)


def relu(x: Tensor) -> Tensor:
    x = _as_tensor(x)
    out = np.maximum(x.data, 0.0)
    mask = x.data > 0

    def backward_fn(g):
        _accum(x, g * mask)

    return _node(out, "relu", (x,), backward_fn)


def dense(x: Tensor, weight: Tensor, bias: Tensor) -> Tensor:
    """Affine layer: x [batch, d_in] @ weight.T [d_in, d_out] + bias."""
    x, weight, bias = _as_tensor(x), _as_tensor(weight), _as_tensor(bias)
    if x.ndim != 2 or weight.ndim != 2:
        raise ShapeError(f"dense expects 2-d input and weight, got {x.shape} and {weight.shape}")
    d_out, d_in = weight.shape
    if x.shape[1] != d_in:
        raise ShapeError(f"dense input width {x.shape[1]} != weight fan-in {d_in}")
    if bias.shape != (d_out,):
        raise ShapeError(f"dense bias must have shape ({d_out},), got {bias.shape}")
    out = x.data @ weight.data.T + bias.data

    def backward_fn(g):
        _accum(x, g @ weight.data)
        _accum(weight, g.T @ x.data)
        _accum(bias, g.sum(axis=0))

    return _node(out, "dense", (x, weight, bias), backward_fn)


def global_max_pool(x: Tensor) -> Tensor:
    """Max over the temporal axis: [batch, ch, len] -> [batch, ch]."""
    x = _as_tensor(x)
    if x.ndim != 3:
        raise ShapeError(f"global_max_pool expects [batch, ch, len], got {x.shape}")
    arg = x.data.argmax(axis=2)
    out = np.take_along_axis(x.data, arg[:, :, None], axis=2)[:, :, 0]

    def backward_fn(g):
        dx = np.zeros_like(x.data)
        np.put_along_axis(dx, arg[:, :, None], g[:, :, None], axis=2)
        _accum(x, dx)

    return _node(out, "global_max_pool", (x,), backward_fn)


class BatchNormState:
    """Per-channel batch normalization: trainable scale/shift plus running stats.

    In training mode the batch statistics normalize and the running stats are
    updated (exponential moving average, unbiased variance).  In inference
    mode only the running stats are used.
    """

    def __init__(self, channels: int, epsilon: float = 1e-5, momentum: float = 0.1, name: str = ""):
        if channels < 1:
            raise ConfigError(f"batch norm needs >= 1 channel, got {channels}")
        if not 0.0 < momentum < 1.0:
            raise ConfigError(f"batch norm momentum must be in (0,1), got {momentum}")
        self.gamma = Parameter(np.ones(channels, dtype=_DEFAULT_DTYPE), name + ".gamma")
        self.beta = Parameter(np.zeros(channels, dtype=_DEFAULT_DTYPE), name + ".beta")
        self.running_mean = np.zeros(channels, dtype=_DEFAULT_DTYPE)
        self.running_var = np.ones(channels, dtype=_DEFAULT_DTYPE)
        self.epsilon = float(epsilon)
        self.momentum = float(momentum)
        self.training = True
        self.name = name

    @property
    def channels(self) -> int:
        return self.gamma.data.shape[0]

    def parameters(self):
        return [self.gamma, self.beta]


def batch_norm(x: Tensor, state: BatchNormState) -> Tensor:
    """Normalize per channel (axis 1) over batch and, if present, time."""
    x = _as_tensor(x)
    if x.ndim not in (2, 3):
        raise ShapeError(f"batch_norm expects [batch, ch] or [batch, ch, len], got {x.shape}")
    if x.shape[1] != state.channels:
        raise ShapeError(f"batch_norm channel mismatch: {x.shape[1]} vs {state.channels}")
    axes = (0,) if x.ndim == 2 else (0, 2)
    cshape = (1, -1) if x.ndim == 2 else (1, -1, 1)
    gamma, beta = state.gamma, state.beta

    if state.training:
        if x.shape[0] < 2:
            raise NumericError("batch_norm in training mode needs batch size >= 2")
        n = x.shape[0] if x.ndim == 2 else x.shape[0] * x.shape[2]
        mean = x.data.mean(axis=axes)
        var = x.data.var(axis=axes)
        inv_std = 1.0 / np.sqrt(var + state.epsilon)
        xhat = (x.data - mean.reshape(cshape)) * inv_std.reshape(cshape)
        out = gamma.data.reshape(cshape) * xhat + beta.data.reshape(cshape)
        m = state.momentum
        state.running_mean = (1 - m) * state.running_mean + m * mean
        state.running_var = (1 - m) * state.running_var + m * var * (n / (n - 1))

        def backward_fn(g):
            _accum(beta, g.sum(axis=axes))
            _accum(gamma, (g * xhat).sum(axis=axes))
            dxhat = g * gamma.data.reshape(cshape)
            dx = (
                dxhat
                - dxhat.mean(axis=axes).reshape(cshape)
                - xhat * (dxhat * xhat).mean(axis=axes).reshape(cshape)
            ) * inv_std.reshape(cshape)
            _accum(x, dx)

        return _node(out, "batch_norm", (x, gamma, beta), backward_fn)

    inv_std = 1.0 / np.sqrt(state.running_var + state.epsilon)
    xhat = (x.data - state.running_mean.reshape(cshape)) * inv_std.reshape(cshape)
    out = gamma.data.reshape(cshape) * xhat + beta.data.reshape(cshape)

    def backward_fn(g):
        _accum(beta, g.sum(axis=axes))
        _accum(gamma, (g * xhat).sum(axis=axes))
        _accum(x, g * (gamma.data * inv_std).reshape(cshape))

    return _node(out, "batch_norm", (x, gamma, beta), backward_fn)


def softmax(x: Tensor) -> Tensor:
    """Softmax over the last axis, computed with max subtraction."""
    x = _as_tensor(x)
    shifted = x.data - x.data.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=-1, keepdims=True)

    def backward_fn(g):
        _accum(x, out * (g - (g * out).sum(axis=-1, keepdims=True)))

    return _node(out, "softmax", (x,), backward_fn)


def select(x: Tensor, indices) -> Tensor:
    """Gather entries of a 1-D tensor (used to mask gate scores)."""
    x = _as_tensor(x)
    if x.ndim != 1:
        raise ShapeError(f"select expects a 1-d tensor, got {x.shape}")
    idx = np.asarray(indices, dtype=np.intp)
    if idx.size == 0:
        raise StateError("select with an empty index set")
    out = x.data[idx]

    def backward_fn(g):
        dx = np.zeros_like(x.data)
        np.add.at(dx, idx, g)
        _accum(x, dx)

    return _node(out, "select", (x,), backward_fn)


def weighted_sum(tensors: list[Tensor], weights: Tensor) -> Tensor:
    """Convex-combination style fusion: sum_j weights[j] * tensors[j].

    All tensors must share one shape; ``weights`` is 1-D with one entry per
    tensor.  This is the differentiable core of the rate and sensor
    selection layers.
    """
    if len(tensors) == 0:
        raise StateError("weighted_sum over an empty tensor list")
    tensors = [_as_tensor(t) for t in tensors]
    weights = _as_tensor(weights)
    if weights.ndim != 1 or weights.shape[0] != len(tensors):
        raise ShapeError(
            f"weighted_sum needs one weight per tensor: {weights.shape} vs {len(tensors)} tensors"
        )
    shape = tensors[0].shape
    for t in tensors[1:]:
        if t.shape != shape:
            raise ShapeError(f"weighted_sum shape mismatch: {t.shape} vs {shape}")
    stacked = np.stack([t.data for t in tensors])  # [n, ...]
    out = np.tensordot(weights.data, stacked, axes=(0, 0))

    def backward_fn(g):
        for j, t in enumerate(tensors):
            _accum(t, weights.data[j] * g)
        _accum(weights, np.array([(g * t.data).sum() for t in tensors]))

    return _node(out, "weighted_sum", (*tensors, weights), backward_fn)


def cross_entropy(logits: Tensor, labels: np.ndarray) -> Tensor:
    """Mean negative log-likelihood of integer labels under softmax(logits)."""
    logits = _as_tensor(logits)
    if logits.ndim != 2:
        raise ShapeError(f"cross_entropy expects [batch, classes] logits, got {logits.shape}")
    b, c = logits.shape
    if c < 2:
        raise ShapeError(f"cross_entropy needs >= 2 classes, got {c}")
    labels = np.asarray(labels)
    if labels.shape != (b,):
        raise ShapeError(f"labels must have shape ({b},), got {labels.shape}")
    if not np.issubdtype(labels.dtype, np.integer):
        raise InputError(f"labels must be integers, got dtype {labels.dtype}")
    if labels.min() < 0 or labels.max() >= c:
        raise InputError(f"labels out of range [0, {c})")

    m = logits.data.max(axis=1, keepdims=True)
    shifted = logits.data - m
    lse = np.log(np.exp(shifted).sum(axis=1)) + m[:, 0]
    picked = logits.data[np.arange(b), labels]
    out = np.asarray((lse - picked).mean())

    def backward_fn(g):
        probs = np.exp(shifted)
        probs /= probs.sum(axis=1, keepdims=True)
        probs[np.arange(b), labels] -= 1.0
        _accum(logits, (float(g) / b) * probs)

    return _node(out, "cross_entropy", (logits,), backward_fn)


# ---------------------------------------------------------------------------
# backward pass and optimizer
# ---------------------------------------------------------------------------


def backward(loss: Tensor) -> None:
    """Populate ``grad`` of every parameter reachable from a scalar loss.

    Grads accumulate across calls on *different* graphs (until ``zero_grad``
    or ``sgd_step``); calling backward twice on the same loss is an error.
    """
    if loss.shape != ():
        raise InputError(f"backward needs a scalar loss, got shape {loss.shape}")
    if loss._done:
        raise StateError("backward already ran on this loss; build a new graph or reset")
    loss._done = True

    topo: list[Tensor] = []
    visited: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(loss, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            topo.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if id(p) not in visited:
                stack.append((p, False))

    loss.grad = np.ones_like(loss.data)
    for node in reversed(topo):
        if node._backward is not None and node.grad is not None:
            node._backward(node.grad)


@dataclass(frozen=True)
class SgdConfig:
    """SGD with momentum and L2 weight decay applied to the gradient."""

    learning_rate: float = 1e-2
    momentum: float = 0.9
    weight_decay: float = 1e-4

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ConfigError(f"learning_rate must be > 0, got {self.learning_rate}")
        if not 0.0 <= self.momentum < 1.0:
            raise ConfigError(f"momentum must be in [0, 1), got {self.momentum}")
        if self.weight_decay < 0:
            raise ConfigError(f"weight_decay must be >= 0, got {self.weight_decay}")


def sgd_step(params: list[Parameter], cfg: SgdConfig) -> None:
    """g <- grad + wd*value; buf <- mom*buf + g; value -= lr*buf; grad <- 0."""
    for p in params:
        g = p.grad + cfg.weight_decay * p.data
        p.momentum_buffer *= cfg.momentum
        p.momentum_buffer += g
        p.data -= cfg.learning_rate * p.momentum_buffer
        p.grad[...] = 0.0


def zero_grad(params: list[Parameter]) -> None:
    for p in params:
        p.grad[...] = 0.0
