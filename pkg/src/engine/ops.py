"""
Layer primitives with forward and reverse-mode backward rules.

Every op computes its forward pass with numpy and, when a ``Tape`` is active,
records a backward closure on it. Most rules are short lambdas next to the
forward pass; conv1d and batchnorm1d keep theirs in module-level
``_conv1d_backward`` and ``_batchnorm1d_backward``, looked up at call time.
Shapes are never broadcast: mismatches raise ``DimensionError``.
"""

from dataclasses import dataclass
from enum import Enum
from typing import Callable, Dict, Optional, Sequence, Union

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from src.engine.rng import RngState
from src.engine.tensor import BackwardFn, Tensor, active_tape
from src.exceptions import (
    DegenerateBatchError,
    DimensionError,
    LengthError,
    ParameterError,
    TargetIndexError,
)

BN_EPS = 1e-5
BN_MOMENTUM = 0.1

DIFFERENTIABLE_OPS: Dict[str, Callable[..., Tensor]] = {}


class Mode(str, Enum):
    """Execution mode of mode-dependent layers (batch norm, dropout)."""
    TRAIN = "train"
    EVAL = "eval"


def differentiable(name: str):
    """Register an op under ``name`` so the gradient checker can cover it."""
    def register(fn):
        DIFFERENTIABLE_OPS[name] = fn
        return fn
    return register


def record(op: str, inputs: Sequence[Tensor], out_data: np.ndarray, backward: BackwardFn) -> Tensor:
    out = Tensor(out_data)
    tape = active_tape()
    if tape is not None:
        tape.record(op, inputs, out, backward)
    return out


def _require_ndim(t: Tensor, ndim: int, what: str) -> None:
    if t.data.ndim != ndim:
        raise DimensionError(f"{what} must have {ndim} dimensions, got shape {t.shape}",
                             {"shape": list(t.shape)})


@differentiable("add")
def add(a: Tensor, b: Tensor) -> Tensor:
    if a.shape != b.shape:
        raise DimensionError(f"add needs equal shapes, got {a.shape} and {b.shape}")
    return record("add", (a, b), a.data + b.data, lambda g: (g, g))


@differentiable("sum")
def tensor_sum(x: Tensor, weights: Optional[np.ndarray] = None) -> Tensor:
    """Σx, or Σ weights·x for a constant same-shape ``weights`` array."""
    if weights is None:
        weights = np.ones(x.shape)
    weights = np.asarray(weights, dtype=np.float64)
    if weights.shape != x.shape:
        raise DimensionError(f"sum weights {weights.shape} do not match input {x.shape}")
    return record("sum", (x,), np.array((weights * x.data).sum()), lambda g: (weights * float(g),))


@differentiable("relu")
def relu(x: Tensor) -> Tensor:
    mask = x.data > 0
    return record("relu", (x,), np.where(mask, x.data, 0.0), lambda g: (g * mask,))


@differentiable("conv1d")
def conv1d(x: Tensor, w: Tensor, b: Tensor, stride: int = 1, padding: int = 0) -> Tensor:
    """
    1-D cross-correlation with zero padding.

    Args:
        x: Input (B, Cin, L)
        w: Kernel (Cout, Cin, k), k odd
        b: Bias (Cout,)
        stride: Step between output positions
        padding: Zeros added on each side of the length axis

    Returns:
        Tensor: (B, Cout, floor((L + 2*padding - k) / stride) + 1)
    """
    _require_ndim(x, 3, "conv1d input")
    _require_ndim(w, 3, "conv1d kernel")
    batch, cin, length = x.shape
    cout, w_cin, k = w.shape
    if w_cin != cin:
        raise DimensionError(f"conv1d kernel expects {w_cin} input channels, input has {cin}",
                             {"input_channels": cin, "kernel_channels": w_cin})
    if b.shape != (cout,):
        raise DimensionError(f"conv1d bias must have shape ({cout},), got {b.shape}")
    if k % 2 == 0:
        raise ParameterError(f"conv1d kernel size must be odd, got {k}")
    if stride < 1 or padding < 0:
        raise ParameterError(f"invalid conv1d stride={stride} padding={padding}")
    if length + 2 * padding < k:
        raise LengthError(f"conv1d input length {length} with padding {padding} is shorter than kernel {k}")

    padded = np.pad(x.data, ((0, 0), (0, 0), (padding, padding)))
    cols = sliding_window_view(padded, k, axis=2)[:, :, ::stride, :]
    out = np.einsum("bclk,ock->bol", cols, w.data, optimize=True) + b.data[None, :, None]
    saved = (x.shape, padding, stride, cols, w.data)
    return record("conv1d", (x, w, b), out, lambda g: _conv1d_backward(saved, g))


def _conv1d_backward(saved, g: np.ndarray):
    (batch, cin, length), padding, stride, cols, w = saved
    k = w.shape[2]
    out_len = g.shape[2]
    dw = np.einsum("bol,bclk->ock", g, cols, optimize=True)
    db = g.sum(axis=(0, 2))
    dcols = np.einsum("bol,ock->bclk", g, w, optimize=True)
    dpadded = np.zeros((batch, cin, length + 2 * padding))
    span = stride * (out_len - 1) + 1
    for j in range(k):
        dpadded[:, :, j:j + span:stride] += dcols[..., j]
    return dpadded[:, :, padding:padding + length], dw, db


@dataclass
class BatchNormState:
    """Per-channel running statistics of one batch-norm layer."""
    running_mean: np.ndarray
    running_var: np.ndarray
    momentum: float = BN_MOMENTUM
    eps: float = BN_EPS

    @classmethod
    def fresh(cls, channels: int) -> "BatchNormState":
        return cls(np.zeros(channels), np.ones(channels))


@differentiable("batchnorm1d")
def batchnorm1d(x: Tensor, gamma: Tensor, beta: Tensor, state: BatchNormState,
                mode: Union[Mode, str] = Mode.TRAIN) -> Tensor:
    """
    Batch normalization over (B, L) per channel.

    In train mode the batch statistics normalize the input and the running
    statistics are updated with ``state.momentum`` (variance unbiased). In
    eval mode the running statistics are used.
    """
    _require_ndim(x, 3, "batchnorm1d input")
    batch, channels, length = x.shape
    if gamma.shape != (channels,) or beta.shape != (channels,):
        raise DimensionError(f"batchnorm1d affine parameters must have shape ({channels},)")
    mode = Mode(mode)

    if mode is Mode.TRAIN:
        n = batch * length
        if n < 2:
            raise DegenerateBatchError(f"batchnorm1d needs at least 2 values per channel, got {n}",
                                       {"batch": batch, "length": length})
        mean = x.data.mean(axis=(0, 2))
        var = x.data.var(axis=(0, 2))
        m = state.momentum
        state.running_mean = (1 - m) * state.running_mean + m * mean
        state.running_var = (1 - m) * state.running_var + m * var * n / (n - 1)
    else:
        n = None
        mean = state.running_mean
        var = state.running_var

    invstd = 1.0 / np.sqrt(var + state.eps)
    xhat = (x.data - mean[None, :, None]) * invstd[None, :, None]
    out = gamma.data[None, :, None] * xhat + beta.data[None, :, None]
    saved = (xhat, invstd, gamma.data, n)
    return record("batchnorm1d", (x, gamma, beta), out, lambda g: _batchnorm1d_backward(saved, g))


def _batchnorm1d_backward(saved, g: np.ndarray):
    xhat, invstd, gamma, n = saved
    dgamma = (g * xhat).sum(axis=(0, 2))
    dbeta = g.sum(axis=(0, 2))
    dxhat = g * gamma[None, :, None]
    if n is None:
        return dxhat * invstd[None, :, None], dgamma, dbeta
    dx = (invstd[None, :, None] / n) * (
        n * dxhat
        - dxhat.sum(axis=(0, 2), keepdims=True)
        - xhat * (dxhat * xhat).sum(axis=(0, 2), keepdims=True)
    )
    return dx, dgamma, dbeta


@differentiable("linear")
def linear(x: Tensor, w: Tensor, b: Tensor) -> Tensor:
    """y = x·wᵀ + b for x (B, Fin), w (Fout, Fin), b (Fout,)."""
    _require_ndim(x, 2, "linear input")
    _require_ndim(w, 2, "linear weight")
    if x.shape[1] != w.shape[1]:
        raise DimensionError(f"linear weight expects {w.shape[1]} features, input has {x.shape[1]}",
                             {"input_features": x.shape[1], "weight_features": w.shape[1]})
    if b.shape != (w.shape[0],):
        raise DimensionError(f"linear bias must have shape ({w.shape[0]},), got {b.shape}")
    xd, wd = x.data, w.data
    return record("linear", (x, w, b), xd @ wd.T + b.data,
                  lambda g: (g @ wd, g.T @ xd, g.sum(axis=0)))


@differentiable("dropout")
def dropout(x: Tensor, p: float, rng: RngState, mode: Union[Mode, str] = Mode.TRAIN) -> Tensor:
    """Inverted dropout; identity in eval mode or when p == 0."""
    if not 0.0 <= p < 1.0:
        raise ParameterError(f"dropout probability must lie in [0, 1), got {p}", {"p": p})
    if Mode(mode) is Mode.EVAL or p == 0.0:
        return record("dropout", (x,), x.data.copy(), lambda g: (g,))
    mask = (rng.random(x.shape) >= p) / (1.0 - p)
    return record("dropout", (x,), x.data * mask, lambda g: (g * mask,))


@differentiable("concat_channels")
def concat_channels(a: Tensor, b: Tensor) -> Tensor:
    """Stack (B, Ca, L) and (B, Cb, L) into (B, Ca + Cb, L)."""
    _require_ndim(a, 3, "concat_channels input")
    _require_ndim(b, 3, "concat_channels input")
    if a.shape[0] != b.shape[0] or a.shape[2] != b.shape[2]:
        raise DimensionError(f"concat_channels needs equal batch and length, got {a.shape} and {b.shape}",
                             {"left": list(a.shape), "right": list(b.shape)})
    split = a.shape[1]
    return record("concat_channels", (a, b), np.concatenate([a.data, b.data], axis=1),
                  lambda g: (g[:, :split], g[:, split:]))


@differentiable("reshape")
def reshape(x: Tensor, shape: Sequence[int]) -> Tensor:
    shape = tuple(shape)
    if int(np.prod(shape)) != x.size:
        raise DimensionError(f"cannot reshape {x.shape} into {shape}")
    in_shape = x.shape
    return record("reshape", (x,), x.data.reshape(shape), lambda g: (g.reshape(in_shape),))


@differentiable("flatten")
def flatten(x: Tensor) -> Tensor:
    """(B, C, L) → (B, C·L), row-major."""
    _require_ndim(x, 3, "flatten input")
    in_shape = x.shape
    out = x.data.reshape(in_shape[0], -1)
    return record("flatten", (x,), out, lambda g: (g.reshape(in_shape),))


def unflatten(x: Tensor, channels: int) -> Tensor:
    """(B, C·L) → (B, C, L)."""
    _require_ndim(x, 2, "unflatten input")
    if channels <= 0 or x.shape[1] % channels:
        raise DimensionError(f"cannot split {x.shape[1]} features into {channels} channels")
    return reshape(x, (x.shape[0], channels, x.shape[1] // channels))


def log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def softmax(logits: np.ndarray) -> np.ndarray:
    return np.exp(log_softmax(logits))


@differentiable("softmax_cross_entropy")
def softmax_cross_entropy(logits: Tensor, targets) -> Tensor:
    """Mean categorical cross-entropy of integer ``targets`` under softmax(logits)."""
    _require_ndim(logits, 2, "softmax_cross_entropy logits")
    batch, classes = logits.shape
    targets = np.asarray(targets, dtype=np.int64).reshape(-1)
    if targets.shape[0] != batch:
        raise DimensionError(f"got {targets.shape[0]} targets for a batch of {batch}")
    bad = (targets < 0) | (targets >= classes)
    if bad.any():
        raise TargetIndexError(f"target {int(targets[bad][0])} outside [0, {classes})",
                               {"num_classes": classes})

    logp = log_softmax(logits.data)
    rows = np.arange(batch)
    loss = -logp[rows, targets].mean()

    def _backward(g):
        dlogits = np.exp(logp)
        dlogits[rows, targets] -= 1.0
        return (dlogits * (float(g) / batch),)

    return record("softmax_cross_entropy", (logits,), np.array(loss), _backward)
