"""
Data models for audio clips, manifests and windowed datasets.
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional

import numpy as np
import pandas as pd

from src.exceptions import DataValidationError

MANIFEST_COLUMNS = ["path", "label", "split"]


class Split(Enum):
    """Dataset partition; ``code`` is the byte stored in the window cache."""
    TRAIN = "train"
    VAL = "val"
    TEST = "test"

    @property
    def code(self) -> int:
        return list(Split).index(self)

    @classmethod
    def from_code(cls, code: int) -> "Split":
        try:
            return list(Split)[code]
        except IndexError:
            raise DataValidationError(f"unknown split code {code}")


@dataclass
class AudioClip:
    """Decoded mono waveform in [-1, 1]."""
    samples: np.ndarray
    sample_rate: int
    source_path: str = ""
    label: int = -1


@dataclass
class WindowedExample:
    """One normalized window with its clip's label and split."""
    window: np.ndarray
    label: int
    split: Split
    clip_id: int


@dataclass
class Manifest:
    """
    Rows of (path, label, split) backed by a DataFrame.

    The label vocabulary is the sorted set of label strings; class indices
    are positions in it. ``rejects`` lists inputs an adapter could not label.
    """
    frame: pd.DataFrame
    rejects: List[str] = field(default_factory=list)

    def __post_init__(self):
        frame = self.frame.copy()
        if "split" not in frame.columns:
            frame["split"] = ""
        missing = [c for c in MANIFEST_COLUMNS if c not in frame.columns]
        if missing:
            raise DataValidationError(f"manifest is missing columns: {', '.join(missing)}")
        frame = frame[MANIFEST_COLUMNS].fillna("").astype(str).reset_index(drop=True)
        duplicated = frame["path"][frame["path"].duplicated()]
        if len(duplicated):
            raise DataValidationError(f"duplicate manifest path: {duplicated.iloc[0]}",
                                      {"path": duplicated.iloc[0]})
        bad_splits = set(frame["split"]) - {"", *(s.value for s in Split)}
        if bad_splits:
            raise DataValidationError(f"unknown split values: {', '.join(sorted(bad_splits))}")
        self.frame = frame

    @classmethod
    def from_rows(cls, rows: List[Dict[str, str]], rejects: Optional[List[str]] = None) -> "Manifest":
        return cls(pd.DataFrame(rows, columns=MANIFEST_COLUMNS), rejects or [])

    def __len__(self) -> int:
        return len(self.frame)

    @property
    def vocabulary(self) -> List[str]:
        return sorted(self.frame["label"].unique().tolist())

    @property
    def label_indices(self) -> np.ndarray:
        lookup = {label: i for i, label in enumerate(self.vocabulary)}
        return self.frame["label"].map(lookup).to_numpy(dtype=np.int64)

    @property
    def is_split(self) -> bool:
        return len(self.frame) > 0 and bool((self.frame["split"] != "").all())

    def with_splits(self, splits: List[str]) -> "Manifest":
        frame = self.frame.copy()
        frame["split"] = list(splits)
        return Manifest(frame, list(self.rejects))

    def class_counts(self) -> Dict[str, int]:
        return self.frame["label"].value_counts().sort_index().to_dict()


@dataclass
class WindowedDataset:
    """Windows stacked row-wise with per-window label, split code and clip id."""
    windows: np.ndarray
    labels: np.ndarray
    splits: np.ndarray
    clip_ids: np.ndarray
    vocabulary: List[str] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.labels)

    @property
    def window_len(self) -> int:
        return self.windows.shape[1]

    def subset(self, split: Split) -> "WindowedDataset":
        mask = self.splits == split.code
        return WindowedDataset(self.windows[mask], self.labels[mask], self.splits[mask],
                               self.clip_ids[mask], list(self.vocabulary))

    @classmethod
    def from_examples(cls, examples: List[WindowedExample], window_len: int,
                      vocabulary: Optional[List[str]] = None) -> "WindowedDataset":
        if not examples:
            return cls(np.zeros((0, window_len)), np.zeros(0, dtype=np.int64),
                       np.zeros(0, dtype=np.uint8), np.zeros(0, dtype=np.int64), vocabulary or [])
        return cls(
            np.stack([e.window for e in examples]).astype(np.float64),
            np.array([e.label for e in examples], dtype=np.int64),
            np.array([e.split.code for e in examples], dtype=np.uint8),
            np.array([e.clip_id for e in examples], dtype=np.int64),
            vocabulary or [],
        )
