"""
Building blocks shared by the Naive CNN and WaDeNet.

All convolutions use 'same' padding (k − 1) / 2; the second convolution of a
Convolutional Block uses stride 2 to halve the length.
"""

from typing import Optional, Union

from src.engine.ops import (
    Mode,
    add,
    batchnorm1d,
    concat_channels,
    conv1d,
    dropout,
    linear,
    relu,
)
from src.engine.rng import RngState
from src.engine.tensor import Tensor
from src.exceptions import ConfigurationError, ContractError, LengthError
from src.network.params import Network


def conv_bn_relu(x: Tensor, net: Network, conv: str, bn: str, stride: int, mode: Union[Mode, str]) -> Tensor:
    p = net.params
    k = p[f"{conv}.w"].shape[2]
    h = conv1d(x, p[f"{conv}.w"], p[f"{conv}.b"], stride=stride, padding=(k - 1) // 2)
    h = batchnorm1d(h, p[f"{bn}.gamma"], p[f"{bn}.beta"], net.bn_states[bn], mode)
    return relu(h)


def conv_block_forward(x: Tensor, n: int, net: Network, mode: Union[Mode, str] = Mode.EVAL) -> Tensor:
    """
    Convolutional Block ``n``: (B, Cin, L) → (B, c·2ⁿ⁻¹, L/2).

    The output channel count follows the base schedule regardless of how
    many channels concatenation added to the input.
    """
    if x.shape[2] % 2:
        raise LengthError(f"block {n} input length {x.shape[2]} is odd", {"block": n})
    h = conv_bn_relu(x, net, f"block{n}.conv1", f"block{n}.bn1", 1, mode)
    return conv_bn_relu(h, net, f"block{n}.conv2", f"block{n}.bn2", 2, mode)


def inception_residual_forward(x: Tensor, n: int, net: Network, mode: Union[Mode, str] = Mode.EVAL) -> Tensor:
    """Parallel conv-BN-ReLU branches, concatenated back to C channels, plus identity."""
    kernels = net.config.inception_kernels
    channels = x.shape[1]
    if channels % len(kernels):
        raise ConfigurationError(f"{channels} channels cannot be split over {len(kernels)} inception branches",
                                 {"block": n})
    merged: Optional[Tensor] = None
    for j in range(len(kernels)):
        prefix = f"incep{n}.branch{j}"
        branch = conv_bn_relu(x, net, f"{prefix}.conv", f"{prefix}.bn", 1, mode)
        merged = branch if merged is None else concat_channels(merged, branch)
    return add(merged, x)


def dwt_gate_forward(coeffs: Tensor, n: int, net: Network, mode: Union[Mode, str] = Mode.EVAL) -> Tensor:
    """DWT Gate ``n``: (B, 2, Lₙ) → (B, g, Lₙ) through two k=3 conv-BN-ReLU stages."""
    h = conv_bn_relu(coeffs, net, f"gate{n}.conv1", f"gate{n}.bn1", 1, mode)
    return conv_bn_relu(h, net, f"gate{n}.conv2", f"gate{n}.bn2", 1, mode)


def fc_block_forward(features: Tensor, net: Network, mode: Union[Mode, str] = Mode.EVAL,
                     rng: Optional[RngState] = None) -> Tensor:
    """Linear-ReLU-dropout per hidden width, then the output layer (logits)."""
    config = net.config
    p = net.params
    mode = Mode(mode)
    if mode is Mode.TRAIN and config.dropout_p > 0 and rng is None:
        raise ContractError("training-mode forward with dropout needs an RngState")
    h = features
    for i in range(1, len(config.fc_widths) + 1):
        h = relu(linear(h, p[f"fc{i}.w"], p[f"fc{i}.b"]))
        h = dropout(h, config.dropout_p, rng, mode)
    return linear(h, p["out.w"], p["out.b"])
