"""
Network package: Convolutional Blocks, Inception-Residual Blocks, DWT Gates
and the two architectures built from them.
"""

from .params import Network, ParamSet, init_params, param_count, layer_specs, expected_shapes
from .architectures import forward, naive_forward, wadenet_forward, predict

__all__ = [
    'Network',
    'ParamSet',
    'init_params',
    'param_count',
    'layer_specs',
    'expected_shapes',
    'forward',
    'naive_forward',
    'wadenet_forward',
    'predict',
]
