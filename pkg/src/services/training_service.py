"""
Training Service Layer for WaDeNet and the Naive CNN.

Plain SGD (no momentum, no weight decay) on categorical cross-entropy with a
single learning-rate drop. Each batch records a fresh tape; the training loop
is single-threaded so a seed fixes every emitted metric bit for bit.
"""

import time
from datetime import datetime
from typing import Callable, Dict, Mapping, Optional

import numpy as np
from tqdm import tqdm

from ..engine.ops import Mode, softmax_cross_entropy
from ..engine.rng import RngState
from ..engine.tensor import Tape, Tensor, backward
from ..exceptions import ContractError, DataValidationError
from ..logging_config import get_logger, log_epoch_progress
from ..models.config_models import ModelConfig, TrainConfig
from ..models.data_models import Split, WindowedDataset
from ..models.training_models import Checkpoint, EpochMetrics, EvaluationReport, TrainingResult
from ..network.architectures import forward
from ..network.params import Network
from .metrics import clip_votes, compute_metrics

logger = get_logger(__name__)

INIT_STREAM = 1
SHUFFLE_STREAM = 2
DROPOUT_STREAM = 3
EVAL_BATCH_SIZE = 256


def build_network(config: ModelConfig, seed: int) -> Network:
    """Freshly initialized network; parameters depend only on ``config`` and ``seed``."""
    return Network.create(config, RngState(seed).spawn(INIT_STREAM))


def lr_at_epoch(epoch: int, config: TrainConfig) -> float:
    """lr0 before ``drop_epoch`` (0-based), lr0 / drop_factor from then on."""
    if epoch < config.drop_epoch:
        return config.lr0
    return config.lr0 / config.drop_factor


def sgd_step(params: Mapping[str, Tensor], grads: Optional[Mapping[str, np.ndarray]], lr: float):
    """
    w ← w − lr · g for every parameter.

    Args:
        params: Named parameter tensors, updated in place
        grads: Gradients by name; ``None`` uses each tensor's ``.grad``
        lr: Learning rate

    Raises:
        ContractError: a parameter has no gradient
    """
    updates = {}
    for name, p in params.items():
        g = p.grad if grads is None else grads.get(name)
        if g is None:
            raise ContractError(f"parameter {name} has no gradient", {"parameter": name})
        if g.shape != p.shape:
            raise ContractError(f"gradient of {name} has shape {g.shape}, parameter has {p.shape}",
                                {"parameter": name})
        updates[name] = g
    for name, p in params.items():
        p.data = p.data - lr * updates[name]
    return params


def batch_loss(net: Network, windows: np.ndarray, labels: np.ndarray, mode=Mode.TRAIN,
               rng: Optional[RngState] = None) -> Tensor:
    logits = forward(net, Tensor(windows[:, None, :]), mode, rng)
    return softmax_cross_entropy(logits, labels)


def predict_labels(net: Network, windows: np.ndarray, batch_size: int = EVAL_BATCH_SIZE) -> np.ndarray:
    """Eval-mode argmax predictions, batched."""
    predictions = [
        forward(net, Tensor(windows[start:start + batch_size, None, :]), Mode.EVAL).data.argmax(axis=1)
        for start in range(0, len(windows), batch_size)
    ]
    return np.concatenate(predictions) if predictions else np.zeros(0, dtype=np.int64)


def evaluate(net: Network, dataset: WindowedDataset, vote: bool = False,
             batch_size: int = EVAL_BATCH_SIZE) -> EvaluationReport:
    """
    Accuracy, macro F1 and confusion matrix of argmax predictions.

    With ``vote`` the windows of each clip are reduced to one majority-vote
    prediction and the report is clip-level.

    Raises:
        DataValidationError: the dataset is empty
    """
    if len(dataset) == 0:
        raise DataValidationError("cannot evaluate an empty split")
    num_classes = net.config.num_classes
    y_pred = predict_labels(net, dataset.windows, batch_size)
    if vote:
        y_true, y_pred = clip_votes(y_pred, dataset.labels, dataset.clip_ids, num_classes)
        return compute_metrics(y_true, y_pred, num_classes, level="clip")
    return compute_metrics(dataset.labels, y_pred, num_classes)


class TrainingService:
    """
    Service layer for the epoch loop.

    Per epoch: seeded shuffle of the train windows, batches of
    ``batch_size`` (the final partial batch is kept), forward/loss/backward
    and one SGD step per batch in train mode, then a full eval-mode pass over
    the validation windows. The best epoch is the one with the highest
    validation macro F1, the earliest on ties.
    """

    def __init__(self, network: Network, config: TrainConfig, record_timing: bool = True,
                 show_progress: bool = False):
        """
        Initialize the training service.

        Args:
            network: Network to train in place
            config: Optimization recipe
            record_timing: Put wall-clock seconds into the metrics; off gives byte-stable output
            show_progress: Draw a per-epoch batch progress bar on stderr
        """
        config.validate().raise_if_invalid("training settings")
        self.network = network
        self.config = config
        self.record_timing = record_timing
        self.show_progress = show_progress
        root = RngState(config.seed)
        self.shuffle_rng = root.spawn(SHUFFLE_STREAM)
        self.dropout_rng = root.spawn(DROPOUT_STREAM)
        self.vocabulary = []
        self.result = TrainingResult()
        self._best_arrays: Optional[Dict[str, np.ndarray]] = None

    def train_batch(self, windows: np.ndarray, labels: np.ndarray, lr: float) -> float:
        """One forward/backward/SGD step; returns the batch loss before the update."""
        params = self.network.params
        with Tape() as tape:
            loss = batch_loss(self.network, windows, labels, Mode.TRAIN, self.dropout_rng)
        backward(loss, tape, params.values())
        sgd_step(params, None, lr)
        return loss.item()

    def run(self, dataset: WindowedDataset,
            progress_callback: Optional[Callable[[EpochMetrics], None]] = None,
            stop_at_accuracy: Optional[float] = None) -> TrainingResult:
        """
        Train for ``config.epochs`` epochs, or until val accuracy reaches ``stop_at_accuracy``.

        Args:
            dataset: Windows with train and val splits
            progress_callback: Called with each epoch's metrics as soon as they exist
            stop_at_accuracy: Stop after the first epoch whose val accuracy is at least this

        Returns:
            TrainingResult: metric history and best epoch

        Raises:
            DataValidationError: the train or val split is empty
        """
        train = dataset.subset(Split.TRAIN)
        val = dataset.subset(Split.VAL)
        for split, part in ((Split.TRAIN, train), (Split.VAL, val)):
            if len(part) == 0:
                raise DataValidationError(f"the {split.value} split has no windows", {"split": split.value})
        self.vocabulary = list(dataset.vocabulary)
        cfg = self.config
        result = self.result = TrainingResult(start_time=datetime.now())
        best_f1 = -1.0
        logger.info(f"Training {self.network.config.kind} on {len(train)} windows "
                    f"(val {len(val)}) for {cfg.epochs} epochs, batch size {cfg.batch_size}")

        for epoch in range(cfg.epochs):
            started = time.perf_counter()
            lr = lr_at_epoch(epoch, cfg)
            order = self.shuffle_rng.permutation(len(train))
            starts = range(0, len(train), cfg.batch_size)
            losses = []
            for start in tqdm(starts, desc=f"Epoch {epoch + 1}/{cfg.epochs}", unit="batch",
                              leave=False, disable=not self.show_progress):
                idx = order[start:start + cfg.batch_size]
                losses.append(self.train_batch(train.windows[idx], train.labels[idx], lr))

            report = evaluate(self.network, val)
            seconds = time.perf_counter() - started
            metrics = EpochMetrics(epoch, lr, float(np.mean(losses)), report.accuracy, report.macro_f1,
                                   seconds if self.record_timing else 0.0)
            result.history.append(metrics)
            log_epoch_progress(logger, epoch, cfg.epochs, lr, metrics.train_loss,
                               report.accuracy, report.macro_f1, seconds)

            if report.macro_f1 > best_f1:
                best_f1 = report.macro_f1
                result.best_epoch = epoch
                self._best_arrays = {k: v.copy() for k, v in self.network.named_arrays().items()}
            if progress_callback:
                progress_callback(metrics)
            if stop_at_accuracy is not None and report.accuracy >= stop_at_accuracy:
                logger.info(f"Val accuracy {report.accuracy:.4f} reached {stop_at_accuracy} after epoch {epoch + 1}")
                break

        result.end_time = datetime.now()
        logger.info(f"Training finished: best epoch {result.best_epoch + 1} "
                    f"(val macro F1 {best_f1:.4f})")
        return result

    def checkpoint(self, best: bool = False) -> Checkpoint:
        """Final (or best-validation) state of the run."""
        history = self.result.history
        if best:
            if self._best_arrays is None:
                raise ContractError("no epoch has completed yet")
            epoch = self.result.best_epoch
            arrays = self._best_arrays
        else:
            epoch = history[-1].epoch if history else 0
            arrays = self.network.named_arrays()
        return Checkpoint(
            model_config=self.network.config,
            train_config=self.config,
            arrays={k: v.copy() for k, v in arrays.items()},
            epoch=epoch,
            lr=lr_at_epoch(epoch, self.config),
            rng_state={"shuffle": self.shuffle_rng.get_state(), "dropout": self.dropout_rng.get_state()},
            history=list(history[:epoch + 1]),
            vocabulary=list(self.vocabulary),
        )


def network_from_checkpoint(checkpoint: Checkpoint) -> Network:
    net = Network.create(checkpoint.model_config, RngState(0))
    net.load_arrays(checkpoint.arrays)
    return net
