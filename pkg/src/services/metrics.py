"""Classification metrics (thin sklearn wrappers) and clip-level voting."""

from typing import Tuple

import numpy as np
from sklearn.metrics import confusion_matrix, f1_score

from ..exceptions import DataValidationError
from ..models.training_models import EvaluationReport


def compute_metrics(y_true, y_pred, num_classes: int, level: str = "window") -> EvaluationReport:
    """
    Accuracy, per-class and macro F1, and the K×K confusion matrix.

    Every class in [0, K) counts toward the macro mean; a class with no
    instances or no predictions scores F1 = 0.
    """
    y_true = np.asarray(y_true, dtype=np.int64)
    y_pred = np.asarray(y_pred, dtype=np.int64)
    if y_true.size == 0:
        raise DataValidationError("cannot evaluate an empty split")
    labels = list(range(num_classes))
    confusion = confusion_matrix(y_true, y_pred, labels=labels)
    per_class = f1_score(y_true, y_pred, labels=labels, average=None, zero_division=0)
    return EvaluationReport(
        accuracy=float(np.trace(confusion) / y_true.size),
        macro_f1=float(np.mean(per_class)),
        confusion=confusion,
        per_class_f1=[float(f) for f in per_class],
        level=level,
    )


def clip_votes(y_pred, y_true, clip_ids, num_classes: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    Majority vote of window predictions per clip.

    Ties go to the smallest class index. Clips are returned in order of
    first appearance.
    """
    y_pred = np.asarray(y_pred, dtype=np.int64)
    y_true = np.asarray(y_true, dtype=np.int64)
    clip_ids = np.asarray(clip_ids)
    if (clip_ids < 0).any():
        raise DataValidationError("clip-level voting needs clip ids; windows loaded from a cache have none")
    _, first, inverse = np.unique(clip_ids, return_index=True, return_inverse=True)
    order = np.argsort(first, kind="stable")
    votes = np.zeros((len(first), num_classes), dtype=np.int64)
    np.add.at(votes, (inverse, y_pred), 1)
    return y_true[first][order], votes.argmax(axis=1)[order]
