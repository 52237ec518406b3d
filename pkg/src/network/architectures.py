"""
Naive CNN and WaDeNet forward passes.

Both map (B, 1, l) waveforms to (B, K) logits. Softmax is never applied
here: it lives in the loss and in ``predict``.
"""

from typing import List, Optional, Tuple, Union

import numpy as np

from src.engine.ops import Mode, concat_channels, flatten, softmax
from src.engine.rng import RngState
from src.engine.tensor import Tensor
from src.exceptions import ConfigurationError, DimensionError
from src.network.blocks import (
    conv_block_forward,
    dwt_gate_forward,
    fc_block_forward,
    inception_residual_forward,
)
from src.network.params import Network
from src.wavelet import dwt_level_op

Trace = List[Tuple[str, Tuple[int, ...]]]


def _check_input(x: Tensor, net: Network, kind: str) -> None:
    config = net.config
    if config.kind != kind:
        raise ConfigurationError(f"{kind} forward called with a {config.kind} config")
    if x.data.ndim != 3 or x.shape[1] != 1 or x.shape[2] != config.window_len:
        raise DimensionError(f"expected input (B, 1, {config.window_len}), got {x.shape}",
                             {"window_len": config.window_len})


def _note(trace: Optional[Trace], stage: str, t: Tensor) -> None:
    if trace is not None:
        trace.append((stage, t.shape[1:]))


def wadenet_forward(x: Tensor, net: Network, mode: Union[Mode, str] = Mode.EVAL,
                    rng: Optional[RngState] = None, trace: Optional[Trace] = None) -> Tensor:
    """
    WaDeNet: every block's output is fused with the DWT Gate of the same level.

    For n = 1..N the Inception-Residual output of block n is concatenated with
    gate n applied to level-n Haar coefficients of the raw input; the result
    feeds block n + 1, and after block N it is flattened.
    """
    _check_input(x, net, "wadenet")
    h = x
    for n in range(1, net.config.N + 1):
        _note(trace, f"block{n}.input", h)
        y = inception_residual_forward(conv_block_forward(h, n, net, mode), n, net, mode)
        _note(trace, f"block{n}.output", y)
        gate = dwt_gate_forward(dwt_level_op(x, n), n, net, mode)
        _note(trace, f"gate{n}.output", gate)
        h = concat_channels(y, gate)
    _note(trace, "trunk", h)
    features = flatten(h)
    _note(trace, "flatten", features)
    return fc_block_forward(features, net, mode, rng)


def naive_forward(x: Tensor, net: Network, mode: Union[Mode, str] = Mode.EVAL,
                  rng: Optional[RngState] = None, trace: Optional[Trace] = None) -> Tensor:
    """Naive CNN: N Convolutional Blocks, flatten, Fully Connected Block."""
    _check_input(x, net, "naive")
    h = x
    for n in range(1, net.config.N + 1):
        _note(trace, f"block{n}.input", h)
        h = conv_block_forward(h, n, net, mode)
        _note(trace, f"block{n}.output", h)
    _note(trace, "trunk", h)
    features = flatten(h)
    _note(trace, "flatten", features)
    return fc_block_forward(features, net, mode, rng)


def forward(net: Network, x: Tensor, mode: Union[Mode, str] = Mode.EVAL,
            rng: Optional[RngState] = None, trace: Optional[Trace] = None) -> Tensor:
    if net.config.is_wadenet:
        return wadenet_forward(x, net, mode, rng, trace)
    return naive_forward(x, net, mode, rng, trace)


def predict(net: Network, windows: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Eval-mode class probabilities and argmax labels for (B, l) windows."""
    logits = forward(net, Tensor(np.asarray(windows)[:, None, :]), Mode.EVAL).data
    return softmax(logits), logits.argmax(axis=1)
