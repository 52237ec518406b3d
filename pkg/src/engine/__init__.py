"""
Engine package: float64 tensors, the gradient tape and layer primitives.
"""

from .tensor import Tensor, Tape, backward
from .rng import RngState
from .ops import Mode, BatchNormState, DIFFERENTIABLE_OPS

__all__ = [
    'Tensor',
    'Tape',
    'backward',
    'RngState',
    'Mode',
    'BatchNormState',
    'DIFFERENTIABLE_OPS',
]
