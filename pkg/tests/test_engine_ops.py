"""
Tests for the tensor engine: layer primitives, the tape and backward.
"""

import math

import numpy as np
import pytest

from src.engine.ops import (
    BN_EPS,
    BatchNormState,
    Mode,
    add,
    batchnorm1d,
    concat_channels,
    conv1d,
    dropout,
    flatten,
    linear,
    relu,
    softmax,
    softmax_cross_entropy,
    tensor_sum,
    unflatten,
)
from src.engine.rng import RngState
from src.engine.tensor import Tape, Tensor, active_tape, backward
from src.exceptions import (
    ContractError,
    DegenerateBatchError,
    DimensionError,
    LengthError,
    ParameterError,
    TargetIndexError,
)
from src.network.architectures import forward


def conv_oracle(x, w, b, stride, padding):
    batch, cin, length = x.shape
    cout, _, k = w.shape
    xp = np.pad(x, ((0, 0), (0, 0), (padding, padding)))
    out_len = (length + 2 * padding - k) // stride + 1
    out = np.zeros((batch, cout, out_len))
    for n in range(batch):
        for o in range(cout):
            for i in range(out_len):
                acc = b[o]
                for c in range(cin):
                    for j in range(k):
                        acc += w[o, c, j] * xp[n, c, i * stride + j]
                out[n, o, i] = acc
    return out


class TestConv1d:
    """Cross-correlation, padding and stride."""

    def test_identity_kernel(self):
        x = Tensor(np.array([[[1.0, 2.0, 3.0, 4.0]]]))
        w = Tensor(np.array([[[0.0, 1.0, 0.0]]]))
        out = conv1d(x, w, Tensor(np.zeros(1)), stride=1, padding=1)
        np.testing.assert_array_equal(out.data, [[[1.0, 2.0, 3.0, 4.0]]])

    def test_doubles_channels_and_keeps_length(self, rng):
        x = Tensor(rng.normal(size=(1, 64, 5120)))
        w = Tensor(rng.normal(size=(128, 64, 3)))
        assert conv1d(x, w, Tensor(np.zeros(128)), stride=1, padding=1).shape == (1, 128, 5120)

    def test_matches_nested_loop_oracle(self, rng):
        x, w, b = rng.normal(size=(2, 3, 10)), rng.normal(size=(4, 3, 3)), rng.normal(size=4)
        out = conv1d(Tensor(x), Tensor(w), Tensor(b), stride=2, padding=1)
        assert out.shape == (2, 4, 5)
        np.testing.assert_allclose(out.data, conv_oracle(x, w, b, 2, 1), rtol=0, atol=1e-12)

    @pytest.mark.parametrize("k", [1, 3, 5, 7])
    def test_same_padding_preserves_length(self, k, rng):
        for length in range(1, 65):
            x = Tensor(rng.normal(size=(1, 2, length)))
            w = Tensor(rng.normal(size=(3, 2, k)))
            out = conv1d(x, w, Tensor(np.zeros(3)), stride=1, padding=(k - 1) // 2)
            assert out.shape == (1, 3, length)

    def test_channel_mismatch_raises_dimension_error(self, rng):
        x = Tensor(rng.normal(size=(1, 2, 8)))
        w = Tensor(rng.normal(size=(3, 4, 3)))
        with pytest.raises(DimensionError):
            conv1d(x, w, Tensor(np.zeros(3)), padding=1)

    def test_even_kernel_rejected(self, rng):
        with pytest.raises(ParameterError):
            conv1d(Tensor(rng.normal(size=(1, 1, 8))), Tensor(rng.normal(size=(1, 1, 2))), Tensor(np.zeros(1)))

    def test_input_shorter_than_kernel(self, rng):
        with pytest.raises(LengthError):
            conv1d(Tensor(rng.normal(size=(1, 1, 2))), Tensor(rng.normal(size=(1, 1, 5))), Tensor(np.zeros(1)))


class TestBatchNorm:
    """Train/eval statistics and running-stat updates."""

    def test_normalized_input_is_fixed_point(self, rng):
        x = rng.normal(size=(4, 2, 32))
        x = (x - x.mean(axis=(0, 2), keepdims=True)) / x.std(axis=(0, 2), keepdims=True)
        out = batchnorm1d(Tensor(x), Tensor(np.ones(2)), Tensor(np.zeros(2)), BatchNormState.fresh(2))
        np.testing.assert_allclose(out.data, x / math.sqrt(1.0 + BN_EPS), atol=1e-12)
        assert np.abs(out.data - x).max() < 1e-4

    def test_constant_channel_gives_beta(self):
        x = np.full((2, 1, 8), 3.0)
        beta = np.array([0.25])
        out = batchnorm1d(Tensor(x), Tensor(np.array([2.0])), Tensor(beta), BatchNormState.fresh(1))
        np.testing.assert_array_equal(out.data, np.full((2, 1, 8), 0.25))

    def test_output_statistics(self, rng):
        x = Tensor(100.0 * rng.normal(size=(2, 3, 8)) + 5.0)
        out = batchnorm1d(x, Tensor(np.ones(3)), Tensor(np.zeros(3)), BatchNormState.fresh(3)).data
        assert np.abs(out.mean(axis=(0, 2))).max() < 1e-10
        assert np.abs(out.var(axis=(0, 2)) - 1.0).max() < 1e-6

    def test_running_stats_update_with_momentum(self, rng):
        x = rng.normal(size=(2, 3, 8))
        state = BatchNormState.fresh(3)
        batchnorm1d(Tensor(x), Tensor(np.ones(3)), Tensor(np.zeros(3)), state, Mode.TRAIN)
        np.testing.assert_allclose(state.running_mean, 0.1 * x.mean(axis=(0, 2)))
        np.testing.assert_allclose(state.running_var, 0.9 + 0.1 * x.var(axis=(0, 2), ddof=1))

    def test_eval_uses_running_stats(self, rng):
        x = rng.normal(size=(2, 1, 4))
        state = BatchNormState(np.array([1.0]), np.array([4.0]))
        out = batchnorm1d(Tensor(x), Tensor(np.ones(1)), Tensor(np.zeros(1)), state, Mode.EVAL)
        np.testing.assert_allclose(out.data, (x - 1.0) / math.sqrt(4.0 + BN_EPS))
        np.testing.assert_array_equal(state.running_mean, [1.0])

    def test_single_value_batch_is_degenerate(self):
        with pytest.raises(DegenerateBatchError):
            batchnorm1d(Tensor(np.ones((1, 2, 1))), Tensor(np.ones(2)), Tensor(np.zeros(2)),
                        BatchNormState.fresh(2), Mode.TRAIN)


class TestElementwiseAndDense:

    def test_relu_values(self):
        np.testing.assert_array_equal(relu(Tensor(np.array([-1.0, 0.0, 2.0]))).data, [0.0, 0.0, 2.0])

    def test_relu_gradient_is_indicator(self):
        x = Tensor(np.array([-1.0, 2.0]))
        with Tape() as tape:
            loss = tensor_sum(relu(x))
        backward(loss, tape, [x])
        np.testing.assert_array_equal(x.grad, [0.0, 1.0])

    def test_relu_algebraic_oracle(self, rng):
        x = rng.normal(size=(5, 7))
        np.testing.assert_allclose(relu(Tensor(x)).data, (x + np.abs(x)) / 2, rtol=0, atol=1e-15)

    def test_linear_identity(self, rng):
        x = rng.normal(size=(2, 3))
        np.testing.assert_array_equal(linear(Tensor(x), Tensor(np.eye(3)), Tensor(np.zeros(3))).data, x)

    def test_linear_example(self):
        out = linear(Tensor(np.array([[1.0, 2.0]])), Tensor(np.array([[3.0, 4.0]])), Tensor(np.array([5.0])))
        np.testing.assert_array_equal(out.data, [[16.0]])

    def test_linear_matches_loop_oracle(self, rng):
        x, w, b = rng.normal(size=(4, 8)), rng.normal(size=(5, 8)), rng.normal(size=5)
        expected = np.array([[sum(x[i, f] * w[o, f] for f in range(8)) + b[o] for o in range(5)] for i in range(4)])
        np.testing.assert_allclose(linear(Tensor(x), Tensor(w), Tensor(b)).data, expected, rtol=0, atol=1e-12)

    def test_linear_dimension_mismatch(self, rng):
        with pytest.raises(DimensionError):
            linear(Tensor(rng.normal(size=(2, 3))), Tensor(rng.normal(size=(4, 5))), Tensor(np.zeros(4)))


class TestDropout:

    def test_zero_probability_is_identity(self, rng):
        x = rng.normal(size=(3, 4))
        for mode in Mode:
            np.testing.assert_array_equal(dropout(Tensor(x), 0.0, RngState(0), mode).data, x)

    def test_eval_is_identity(self, rng):
        x = rng.normal(size=(3, 4))
        np.testing.assert_array_equal(dropout(Tensor(x), 0.5, RngState(0), Mode.EVAL).data, x)

    def test_inverted_scaling_preserves_mean(self):
        out = dropout(Tensor(np.ones(10 ** 5)), 0.5, RngState(3), Mode.TRAIN).data
        assert abs(out.mean() - 1.0) < 0.02
        assert set(np.unique(out)) <= {0.0, 2.0}

    def test_backward_reuses_mask(self):
        x = Tensor(np.ones((4, 50)))
        with Tape() as tape:
            out = dropout(x, 0.5, RngState(9), Mode.TRAIN)
            loss = tensor_sum(out)
        backward(loss, tape, [x])
        np.testing.assert_array_equal(x.grad, out.data)

    def test_probability_one_rejected(self):
        with pytest.raises(ParameterError):
            dropout(Tensor(np.ones(3)), 1.0, RngState(0), Mode.TRAIN)


class TestShapeOps:

    def test_concat_shapes(self, rng):
        out = concat_channels(Tensor(rng.normal(size=(1, 2, 4))), Tensor(rng.normal(size=(1, 3, 4))))
        assert out.shape == (1, 5, 4)

    def test_concat_with_empty(self, rng):
        x = rng.normal(size=(1, 2, 4))
        np.testing.assert_array_equal(concat_channels(Tensor(x), Tensor(np.zeros((1, 0, 4)))).data, x)

    def test_concat_backward_splits_gradient(self, rng):
        a, b = Tensor(rng.normal(size=(2, 2, 3))), Tensor(rng.normal(size=(2, 1, 3)))
        with Tape() as tape:
            loss = tensor_sum(concat_channels(a, b))
        backward(loss, tape, [a, b])
        np.testing.assert_array_equal(a.grad, np.ones(a.shape))
        np.testing.assert_array_equal(b.grad, np.ones(b.shape))

    def test_concat_length_mismatch(self, rng):
        with pytest.raises(DimensionError):
            concat_channels(Tensor(rng.normal(size=(1, 2, 4))), Tensor(rng.normal(size=(1, 2, 5))))

    def test_flatten_shapes(self, rng):
        assert flatten(Tensor(rng.normal(size=(2, 3, 4)))).shape == (2, 12)
        x = rng.normal(size=(1, 1, 5))
        np.testing.assert_array_equal(flatten(Tensor(x)).data, x.reshape(1, 5))

    def test_flatten_unflatten_round_trip(self, rng):
        x = rng.normal(size=(2, 3, 4))
        np.testing.assert_array_equal(unflatten(flatten(Tensor(x)), 3).data, x)


class TestSoftmaxCrossEntropy:

    def test_uniform_logits(self):
        loss = softmax_cross_entropy(Tensor(np.zeros((1, 3))), [0])
        assert loss.item() == pytest.approx(math.log(3), abs=1e-12)

    def test_large_logits_are_stable(self):
        loss = softmax_cross_entropy(Tensor(np.array([[1000.0, 0.0]])), [0])
        assert np.isfinite(loss.item())
        assert loss.item() < 1e-10

    def test_gradient_rows_sum_to_zero(self, rng):
        logits = Tensor(rng.normal(size=(6, 4)))
        with Tape() as tape:
            loss = softmax_cross_entropy(logits, rng.integers(0, 4, size=6))
        backward(loss, tape, [logits])
        assert np.abs(logits.grad.sum(axis=1)).max() < 1e-12

    def test_gradient_is_softmax_minus_onehot(self, rng):
        data = rng.normal(size=(3, 5))
        targets = np.array([0, 4, 2])
        logits = Tensor(data)
        with Tape() as tape:
            loss = softmax_cross_entropy(logits, targets)
        backward(loss, tape, [logits])
        expected = softmax(data)
        expected[np.arange(3), targets] -= 1.0
        np.testing.assert_allclose(logits.grad, expected / 3, atol=1e-15)

    def test_target_out_of_range(self):
        with pytest.raises(TargetIndexError):
            softmax_cross_entropy(Tensor(np.zeros((2, 3))), [0, 3])
        with pytest.raises(IndexError):
            softmax_cross_entropy(Tensor(np.zeros((1, 3))), [-1])


class TestTape:
    """Reverse sweep, fan-out accumulation and contracts."""

    def test_sum_gradient_is_ones(self, rng):
        x = Tensor(rng.normal(size=(2, 3, 4)))
        with Tape() as tape:
            loss = tensor_sum(x)
        backward(loss, tape, [x])
        np.testing.assert_array_equal(x.grad, np.ones((2, 3, 4)))

    def test_fan_out_accumulates(self, rng):
        x = Tensor(rng.normal(size=(3,)))
        with Tape() as tape:
            loss = tensor_sum(add(x, x))
        backward(loss, tape, [x])
        np.testing.assert_array_equal(x.grad, np.full(3, 2.0))

    def test_unused_parameter_gets_zero_grad(self, rng):
        x, unused = Tensor(rng.normal(size=(3,))), Tensor(rng.normal(size=(2, 2)))
        with Tape() as tape:
            loss = tensor_sum(x)
        backward(loss, tape, [x, unused])
        np.testing.assert_array_equal(unused.grad, np.zeros((2, 2)))

    def test_non_scalar_loss(self, rng):
        x = Tensor(rng.normal(size=(3,)))
        with Tape() as tape:
            out = relu(x)
        with pytest.raises(ContractError):
            backward(out, tape)

    def test_loss_from_another_tape(self, rng):
        x = Tensor(rng.normal(size=(3,)))
        with Tape():
            loss = tensor_sum(x)
        with pytest.raises(ContractError):
            backward(loss, Tape())

    def test_no_recording_outside_a_tape(self, rng):
        assert active_tape() is None
        out = relu(Tensor(rng.normal(size=(3,))))
        assert out.node_id is None

    def test_records_ops_in_order(self, rng):
        x = Tensor(rng.normal(size=(1, 1, 4)))
        with Tape() as tape:
            tensor_sum(relu(flatten(x)))
        assert tape.ops() == ["flatten", "relu", "sum"]

    def test_replay_is_bit_identical(self, tiny_wadenet, rng):
        x = Tensor(rng.normal(size=(2, 1, 64)))
        targets = np.array([0, 2])

        def run():
            with Tape() as tape:
                loss = softmax_cross_entropy(forward(tiny_wadenet, x, Mode.TRAIN, RngState(5)), targets)
            backward(loss, tape, tiny_wadenet.params.values())
            return loss.item(), {k: p.grad.copy() for k, p in tiny_wadenet.params.items()}

        loss_a, grads_a = run()
        loss_b, grads_b = run()
        assert loss_a == loss_b
        for name in grads_a:
            np.testing.assert_array_equal(grads_a[name], grads_b[name])
