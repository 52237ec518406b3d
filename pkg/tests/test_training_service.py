"""
Tests for the training service layer and evaluation metrics.
"""

from unittest.mock import patch

import numpy as np
import pytest

from src.engine.ops import Mode
from src.engine.rng import RngState
from src.engine.tensor import Tape, Tensor, backward
from src.exceptions import ContractError, DataValidationError
from src.models.config_models import TrainConfig
from src.models.data_models import Split, WindowedDataset
from src.models.training_models import EpochMetrics, EvaluationReport
from src.services.metrics import clip_votes, compute_metrics
from src.services.training_service import (
    TrainingService,
    batch_loss,
    build_network,
    evaluate,
    lr_at_epoch,
    network_from_checkpoint,
    sgd_step,
)


def toy_dataset(rng, per_split=(24, 6, 6), window_len=64, classes=3):
    """Windows whose class is a sinusoid frequency, tagged train/val/test."""
    windows, labels, splits, clips = [], [], [], []
    t = np.arange(window_len)
    clip = 0
    for split, count in zip(Split, per_split):
        for i in range(count):
            label = i % classes
            phase = rng.uniform(0, 2 * np.pi)
            x = np.sin(2 * np.pi * (label + 1) * 4 * t / window_len + phase) + 0.1 * rng.normal(size=window_len)
            windows.append((x - x.mean()) / x.std())
            labels.append(label)
            splits.append(split.code)
            clips.append(clip)
            clip += 1
    return WindowedDataset(np.array(windows), np.array(labels, dtype=np.int64), np.array(splits, dtype=np.uint8),
                           np.array(clips, dtype=np.int64), [f"class{j:02d}" for j in range(classes)])


@pytest.fixture
def dataset(rng) -> WindowedDataset:
    return toy_dataset(rng)


class TestSgdAndSchedule:

    def test_single_update(self):
        params = {"w": Tensor(np.array([1.0]))}
        sgd_step(params, {"w": np.array([0.5])}, 0.001)
        assert params["w"].data[0] == pytest.approx(0.9995, abs=1e-15)

    def test_zero_learning_rate(self, rng):
        data = rng.normal(size=(3, 2))
        params = {"w": Tensor(data.copy())}
        sgd_step(params, {"w": rng.normal(size=(3, 2))}, 0.0)
        np.testing.assert_array_equal(params["w"].data, data)

    def test_quadratic_iteration(self):
        w = Tensor(np.array([1.0]))
        for expected in (0.8, 0.64):
            sgd_step({"w": w}, {"w": 2 * w.data}, 0.1)
            assert w.data[0] == pytest.approx(expected, abs=1e-15)

    def test_missing_gradient(self):
        with pytest.raises(ContractError):
            sgd_step({"w": Tensor(np.ones(2))}, {}, 0.1)
        with pytest.raises(ContractError):
            sgd_step({"w": Tensor(np.ones(2))}, None, 0.1)

    def test_mis_shaped_gradient(self):
        with pytest.raises(ContractError):
            sgd_step({"w": Tensor(np.ones(2))}, {"w": np.ones(3)}, 0.1)

    def test_reference_schedule(self):
        config = TrainConfig()
        for epoch in range(150):
            expected = 0.001 if epoch < 50 else 0.001 / 10.0
            assert lr_at_epoch(epoch, config) == expected
        assert lr_at_epoch(49, config) == 0.001
        assert lr_at_epoch(50, config) == pytest.approx(0.0001, rel=1e-15)
        assert lr_at_epoch(149, config) == lr_at_epoch(50, config)

    def test_one_step_decreases_batch_loss(self, tiny_wadenet_config, rng):
        net = build_network(tiny_wadenet_config, 0)
        windows, labels = rng.normal(size=(8, 64)), rng.integers(0, 3, size=8)
        with Tape() as tape:
            before = batch_loss(net, windows, labels, Mode.TRAIN, RngState(9))
        backward(before, tape, net.params.values())
        sgd_step(net.params, None, 1e-4)
        after = batch_loss(net, windows, labels, Mode.TRAIN, RngState(9))
        assert after.item() < before.item()


class TestMetrics:

    def test_hand_computed_example(self):
        report = compute_metrics([0, 0, 1, 1], [0, 1, 1, 1], 2)
        assert report.accuracy == 0.75
        assert report.macro_f1 == pytest.approx((2 / 3 + 4 / 5) / 2)
        np.testing.assert_array_equal(report.confusion, [[1, 1], [0, 2]])

    def test_perfect_predictions(self):
        report = compute_metrics([0, 1, 2, 2], [0, 1, 2, 2], 3)
        assert report.accuracy == 1.0
        assert report.macro_f1 == 1.0

    def test_single_class_predictions(self):
        report = compute_metrics([0, 0, 1, 1], [1, 1, 1, 1], 2)
        assert report.accuracy == 0.5
        assert report.macro_f1 == pytest.approx(1 / 3)
        assert report.per_class_f1[0] == 0.0

    def test_absent_class_counts_toward_macro_mean(self):
        report = compute_metrics([0, 1], [0, 1], 3)
        assert report.confusion.shape == (3, 3)
        assert report.macro_f1 == pytest.approx(2 / 3)

    def test_accuracy_matches_hamming_recount(self):
        rng = np.random.default_rng(17)
        for _ in range(50):
            y_true, y_pred = rng.integers(0, 4, size=40), rng.integers(0, 4, size=40)
            mismatches = sum(int(a != b) for a, b in zip(y_true, y_pred))
            assert compute_metrics(y_true, y_pred, 4).accuracy == pytest.approx(1 - mismatches / 40)

    def test_empty_input(self):
        with pytest.raises(DataValidationError):
            compute_metrics([], [], 2)

    def test_clip_votes_break_ties_low(self):
        y_true, y_pred = clip_votes([2, 1, 1, 2, 0], [1, 1, 1, 1, 0], [5, 5, 5, 5, 3], 3)
        np.testing.assert_array_equal(y_true, [1, 0])
        np.testing.assert_array_equal(y_pred, [1, 0])

    def test_clip_votes_need_clip_ids(self):
        with pytest.raises(DataValidationError):
            clip_votes([0], [0], [-1], 2)


class TestTrainingService:
    """Epoch loop, determinism and checkpoints."""

    def test_history_and_metrics_stream(self, dataset, tiny_wadenet_config, fast_train_config):
        seen = []
        service = TrainingService(build_network(tiny_wadenet_config, 3), fast_train_config, record_timing=False)
        result = service.run(dataset, progress_callback=seen.append)
        assert result.epochs_completed == 2
        assert [m.epoch for m in seen] == [0, 1]
        assert [m.lr for m in seen] == [0.01, lr_at_epoch(1, fast_train_config)]
        assert all(m.wall_seconds == 0.0 for m in seen)
        assert set(seen[0].to_dict()) == {"epoch", "lr", "train_loss", "val_acc", "val_f1", "seconds"}
        assert EpochMetrics.from_dict(seen[1].to_dict()) == seen[1]

    def test_same_seed_bit_identical(self, dataset, tiny_wadenet_config, fast_train_config):
        def run():
            service = TrainingService(build_network(tiny_wadenet_config, fast_train_config.seed),
                                      fast_train_config, record_timing=False)
            return [m.to_json_line() for m in service.run(dataset).history]

        assert run() == run()

    def test_batches_per_epoch(self, dataset, tiny_naive_config, fast_train_config):
        service = TrainingService(build_network(tiny_naive_config, 0), fast_train_config)
        with patch.object(service, "train_batch", wraps=service.train_batch) as mock_batch:
            service.run(dataset)
        # 24 train windows, batches of 8, 2 epochs
        assert mock_batch.call_count == 6
        sizes = [len(call.args[1]) for call in mock_batch.call_args_list]
        assert sizes == [8] * 6

    def test_partial_batch_sizes(self, rng, tiny_naive_config):
        data = toy_dataset(rng, per_split=(20, 6, 6))
        config = TrainConfig(lr0=0.01, epochs=1, drop_epoch=1, batch_size=8, seed=1)
        service = TrainingService(build_network(tiny_naive_config, 0), config)
        with patch.object(service, "train_batch", wraps=service.train_batch) as mock_batch:
            service.run(data)
        assert [len(call.args[1]) for call in mock_batch.call_args_list] == [8, 8, 4]

    def test_empty_validation_split(self, rng, tiny_naive_config, fast_train_config):
        data = toy_dataset(rng, per_split=(12, 0, 6))
        service = TrainingService(build_network(tiny_naive_config, 0), fast_train_config)
        with pytest.raises(DataValidationError):
            service.run(data)

    def test_best_epoch_earliest_on_ties(self, dataset, tiny_naive_config, fast_train_config):
        tied = EvaluationReport(accuracy=0.5, macro_f1=0.5, confusion=np.eye(3, dtype=int))
        service = TrainingService(build_network(tiny_naive_config, 0), fast_train_config)
        with patch("src.services.training_service.evaluate", return_value=tied):
            result = service.run(dataset)
        assert result.best_epoch == 0
        best = service.checkpoint(best=True)
        assert best.epoch == 0
        assert len(best.history) == 1

    def test_stops_once_val_accuracy_reached(self, dataset, tiny_naive_config, fast_train_config):
        perfect = EvaluationReport(accuracy=1.0, macro_f1=1.0, confusion=np.eye(3, dtype=int))
        service = TrainingService(build_network(tiny_naive_config, 0), fast_train_config)
        with patch("src.services.training_service.evaluate", return_value=perfect) as evaluate_mock:
            result = service.run(dataset, stop_at_accuracy=0.95)
        assert result.epochs_completed == 1
        assert evaluate_mock.call_count == 1
        assert service.checkpoint().epoch == 0

    def test_checkpoint_contents(self, dataset, tiny_wadenet_config, fast_train_config):
        service = TrainingService(build_network(tiny_wadenet_config, 0), fast_train_config, record_timing=False)
        service.run(dataset)
        checkpoint = service.checkpoint()
        assert checkpoint.epoch == 1
        assert checkpoint.lr == lr_at_epoch(1, fast_train_config)
        assert checkpoint.vocabulary == ["class00", "class01", "class02"]
        assert set(checkpoint.rng_state) == {"shuffle", "dropout"}
        assert set(checkpoint.arrays) == set(service.network.named_arrays())

    def test_checkpoint_before_training(self, tiny_naive_config, fast_train_config):
        service = TrainingService(build_network(tiny_naive_config, 0), fast_train_config)
        with pytest.raises(ContractError):
            service.checkpoint(best=True)

    def test_network_from_checkpoint_reproduces_eval(self, dataset, tiny_wadenet_config, fast_train_config):
        service = TrainingService(build_network(tiny_wadenet_config, 0), fast_train_config)
        service.run(dataset)
        restored = network_from_checkpoint(service.checkpoint())
        val = dataset.subset(Split.VAL)
        assert evaluate(restored, val).to_dict() == evaluate(service.network, val).to_dict()

    def test_evaluate_with_vote(self, dataset, tiny_wadenet_config):
        net = build_network(tiny_wadenet_config, 0)
        report = evaluate(net, dataset.subset(Split.TEST), vote=True)
        assert report.level == "clip"
        assert report.total == 6

    def test_initial_loss_is_finite(self, dataset, tiny_wadenet_config):
        net = build_network(tiny_wadenet_config, 0)
        train = dataset.subset(Split.TRAIN)
        loss = batch_loss(net, train.windows, train.labels, Mode.TRAIN, RngState(0)).item()
        assert np.isfinite(loss) and loss > 0


class TestInitialLoss:
    """Fresh fan-in uniform init measured against ln K."""

    def test_zero_output_layer_gives_ln_k(self, tiny_wadenet_config, rng):
        net = build_network(tiny_wadenet_config, 0)
        net.params["out.w"].data[...] = 0.0
        net.params["out.b"].data[...] = 0.0
        labels = np.array([0, 1, 2, 2, 1])
        loss = batch_loss(net, rng.normal(size=(5, 64)), labels, Mode.EVAL).item()
        assert loss == pytest.approx(np.log(3), abs=1e-12)

    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_label_balanced_loss_is_at_least_ln_k(self, tiny_wadenet_config, tiny_naive_config, rng, seed):
        windows = np.repeat(rng.normal(size=(6, 64)), 3, axis=0)
        labels = np.tile(np.arange(3), 6)
        for config in (tiny_wadenet_config, tiny_naive_config):
            loss = batch_loss(build_network(config, seed), windows, labels, Mode.EVAL).item()
            assert loss >= np.log(3) - 1e-12
