"""
Tests for the orthonormal Haar transform and its differentiable level op.
"""

import math

import numpy as np
import pytest

from src.engine.gradcheck import check_case
from src.engine.ops import tensor_sum
from src.engine.tensor import Tensor
from src.exceptions import DimensionError, LengthError
from src.wavelet import (
    build_pyramid,
    dwt_level,
    dwt_level_adjoint,
    dwt_level_op,
    haar_analysis_step,
    haar_synthesis_step,
)

SQRT2 = math.sqrt(2.0)


class TestAnalysisSynthesis:

    def test_constant_signal(self):
        approx, detail = haar_analysis_step([1.0, 1.0, 1.0, 1.0])
        np.testing.assert_allclose(approx, [SQRT2, SQRT2], atol=1e-15)
        np.testing.assert_array_equal(detail, [0.0, 0.0])

    def test_impulse(self):
        approx, detail = haar_analysis_step([1.0, 0.0, 0.0, 0.0])
        np.testing.assert_allclose(approx, [1 / SQRT2, 0.0], atol=1e-15)
        np.testing.assert_allclose(detail, [1 / SQRT2, 0.0], atol=1e-15)

    def test_parseval_single_step(self, rng):
        x = rng.normal(size=8)
        approx, detail = haar_analysis_step(x)
        assert approx @ approx + detail @ detail == pytest.approx(x @ x, abs=1e-12)

    @pytest.mark.parametrize("length", [0, 1, 3, 7])
    def test_odd_or_empty_length_rejected(self, length):
        with pytest.raises(LengthError):
            haar_analysis_step(np.ones(length))

    def test_synthesis_examples(self):
        np.testing.assert_allclose(haar_synthesis_step([SQRT2, SQRT2], [0.0, 0.0]), [1.0, 1.0, 1.0, 1.0],
                                   atol=1e-15)
        np.testing.assert_allclose(haar_synthesis_step([0.0], [SQRT2]), [1.0, -1.0], atol=1e-15)

    def test_synthesis_inverts_analysis(self, rng):
        x = rng.normal(size=(3, 32))
        np.testing.assert_allclose(haar_synthesis_step(*haar_analysis_step(x)), x, atol=1e-12)

    def test_synthesis_length_mismatch(self):
        with pytest.raises(LengthError):
            haar_synthesis_step([1.0, 2.0], [1.0])

    @pytest.mark.parametrize("length", [2, 4, 8, 16])
    def test_step_matrix_is_orthonormal(self, length):
        approx, detail = haar_analysis_step(np.eye(length))
        transposed = np.concatenate([approx, detail], axis=1)
        np.testing.assert_allclose(transposed @ transposed.T, np.eye(length), atol=1e-15)
        np.testing.assert_allclose(transposed.T @ transposed, np.eye(length), atol=1e-15)


class TestPyramid:

    def test_reference_level_lengths(self, rng):
        pyramid = build_pyramid(rng.normal(size=5120), 4)
        assert pyramid.depth == 4
        assert [len(pyramid.approx(n)) for n in range(1, 5)] == [2560, 1280, 640, 320]
        assert [len(pyramid.detail(n)) for n in range(1, 5)] == [2560, 1280, 640, 320]

    def test_constant_signal_has_no_detail(self):
        pyramid = build_pyramid(np.full(64, 0.7), 5)
        for n in range(1, 6):
            np.testing.assert_array_equal(pyramid.detail(n), np.zeros(64 // 2 ** n))

    def test_reconstruction(self, rng):
        x = rng.normal(size=64)
        assert np.abs(build_pyramid(x, 3).reconstruct() - x).max() < 1e-9

    def test_non_dyadic_length_rejected(self):
        with pytest.raises(LengthError):
            build_pyramid(np.ones(24), 4)

    def test_random_signals_reconstruct_and_preserve_energy(self):
        rng = np.random.default_rng(2024)
        for _ in range(1000):
            levels = int(rng.integers(1, 11))
            length = int(rng.integers(1, 5120 // 2 ** levels + 1)) * 2 ** levels
            x = rng.normal(size=length)
            pyramid = build_pyramid(x, levels)
            assert np.abs(pyramid.reconstruct() - x).max() < 1e-9

            energy = x @ x
            details = 0.0
            for n in range(1, levels + 1):
                d, a = pyramid.detail(n), pyramid.approx(n)
                details += d @ d
                assert abs(details + a @ a - energy) <= 1e-9 * energy
            assert abs(pyramid.energy() - energy) <= 1e-9 * energy


class TestDwtLevelOp:

    def test_shape(self, rng):
        assert dwt_level_op(Tensor(rng.normal(size=(1, 1, 5120))), 3).shape == (1, 2, 640)

    def test_channels_are_approx_and_detail(self, rng):
        x = rng.normal(size=(2, 1, 32))
        out = dwt_level_op(Tensor(x), 2).data
        for b in range(2):
            pyramid = build_pyramid(x[b, 0], 2)
            np.testing.assert_allclose(out[b, 0], pyramid.approx(2), atol=1e-15)
            np.testing.assert_allclose(out[b, 1], pyramid.detail(2), atol=1e-15)

    def test_linearity(self, rng):
        x, y = rng.normal(size=(2, 1, 64)), rng.normal(size=(2, 1, 64))
        a, b = 1.7, -0.4
        combined = dwt_level_op(Tensor(a * x + b * y), 3).data
        separate = a * dwt_level_op(Tensor(x), 3).data + b * dwt_level_op(Tensor(y), 3).data
        np.testing.assert_allclose(combined, separate, atol=1e-12)

    @pytest.mark.parametrize("level", [1, 2, 4])
    def test_adjoint_identity(self, level, rng):
        u = rng.normal(size=(3, 64))
        v = rng.normal(size=(3, 2, 64 // 2 ** level))
        lhs = np.sum(dwt_level(u, level) * v)
        rhs = np.sum(u * dwt_level_adjoint(v, level))
        assert lhs == pytest.approx(rhs, abs=1e-12)

    def test_gradient_matches_finite_differences(self, rng):
        x = Tensor(rng.normal(size=(2, 1, 16)))
        result = check_case("dwt_level_op", lambda: tensor_sum(dwt_level_op(x, 1)), {"x": x}, tolerance=1e-6)
        assert result.passed

    def test_multi_channel_input_rejected(self, rng):
        with pytest.raises(DimensionError):
            dwt_level_op(Tensor(rng.normal(size=(1, 2, 16))), 1)

    def test_non_dyadic_length_rejected(self, rng):
        with pytest.raises(LengthError):
            dwt_level_op(Tensor(rng.normal(size=(1, 1, 12))), 3)
