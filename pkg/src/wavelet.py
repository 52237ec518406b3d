"""
Orthonormal Haar discrete wavelet transform.

Analysis splits a signal into pairwise scaled sums (approximation) and
differences (detail); synthesis is its exact inverse and, the transform
being orthonormal, also its adjoint. ``dwt_level_op`` exposes level ``n``
of the pyramid as a differentiable two-channel tensor.
"""

from dataclasses import dataclass
from typing import List, Tuple

import numpy as np

from src.engine.ops import differentiable, record
from src.engine.tensor import Tensor
from src.exceptions import DimensionError, LengthError

INV_SQRT2 = 1.0 / np.sqrt(2.0)


def haar_analysis_step(x) -> Tuple[np.ndarray, np.ndarray]:
    """One analysis step along the last axis; length must be even and ≥ 2."""
    x = np.asarray(x, dtype=np.float64)
    length = x.shape[-1]
    if length < 2 or length % 2:
        raise LengthError(f"Haar analysis needs an even length >= 2, got {length}", {"length": length})
    even, odd = x[..., 0::2], x[..., 1::2]
    return (even + odd) * INV_SQRT2, (even - odd) * INV_SQRT2


def haar_synthesis_step(approx, detail) -> np.ndarray:
    """Inverse of ``haar_analysis_step``: interleave (a+d)/√2 and (a−d)/√2."""
    approx = np.asarray(approx, dtype=np.float64)
    detail = np.asarray(detail, dtype=np.float64)
    if approx.shape != detail.shape:
        raise LengthError(f"approximation {approx.shape} and detail {detail.shape} differ in shape")
    out = np.empty(approx.shape[:-1] + (2 * approx.shape[-1],))
    out[..., 0::2] = (approx + detail) * INV_SQRT2
    out[..., 1::2] = (approx - detail) * INV_SQRT2
    return out


def _check_dyadic(length: int, levels: int) -> None:
    if levels < 1:
        raise LengthError(f"number of levels must be positive, got {levels}")
    if length % (2 ** levels):
        raise LengthError(f"length {length} is not divisible by 2^{levels}",
                          {"length": length, "levels": levels})


@dataclass
class WaveletPyramid:
    """(approximation, detail) pairs for levels 1..N of one signal."""
    levels: List[Tuple[np.ndarray, np.ndarray]]
    source_length: int

    @property
    def depth(self) -> int:
        return len(self.levels)

    def approx(self, n: int) -> np.ndarray:
        return self.levels[n - 1][0]

    def detail(self, n: int) -> np.ndarray:
        return self.levels[n - 1][1]

    def energy(self) -> float:
        """Σ‖detailₙ‖² + ‖approx_N‖², equal to the source energy."""
        return float(sum(np.dot(d, d) for _, d in self.levels) + np.dot(self.approx(self.depth), self.approx(self.depth)))

    def reconstruct(self) -> np.ndarray:
        signal = self.approx(self.depth)
        for _, detail in reversed(self.levels):
            signal = haar_synthesis_step(signal, detail)
        return signal


def build_pyramid(x, levels: int) -> WaveletPyramid:
    x = np.asarray(x, dtype=np.float64)
    _check_dyadic(x.shape[-1], levels)
    pairs = []
    approx = x
    for _ in range(levels):
        approx, detail = haar_analysis_step(approx)
        pairs.append((approx, detail))
    return WaveletPyramid(pairs, x.shape[-1])


def dwt_level(x: np.ndarray, level: int) -> np.ndarray:
    """Level-``level`` coefficients of (..., L) as (..., 2, L / 2^level)."""
    _check_dyadic(x.shape[-1], level)
    approx = x
    for _ in range(level - 1):
        approx, _ = haar_analysis_step(approx)
    approx, detail = haar_analysis_step(approx)
    return np.stack([approx, detail], axis=-2)


def dwt_level_adjoint(g: np.ndarray, level: int) -> np.ndarray:
    """Adjoint of ``dwt_level``: map (..., 2, Lₙ) back to (..., L)."""
    signal = haar_synthesis_step(g[..., 0, :], g[..., 1, :])
    for _ in range(level - 1):
        signal = haar_synthesis_step(signal, np.zeros_like(signal))
    return signal


@differentiable("dwt_level_op")
def dwt_level_op(x: Tensor, level: int) -> Tensor:
    """
    Level-``level`` Haar coefficients of a single-channel batch.

    Args:
        x: Waveforms (B, 1, L), L divisible by 2^level
        level: Pyramid level n ≥ 1

    Returns:
        Tensor: (B, 2, L / 2^level); channel 0 approximation, channel 1 detail
    """
    if x.data.ndim != 3 or x.shape[1] != 1:
        raise DimensionError(f"dwt_level_op expects (B, 1, L), got {x.shape}")
    out = dwt_level(x.data[:, 0, :], level)
    return record("dwt_level_op", (x,), out,
                  lambda g: (dwt_level_adjoint(g, level)[:, None, :],))
