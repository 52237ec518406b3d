"""
Binary window cache.

Layout (little-endian): magic ``WDNW``, u32 version, u32 window_len, u32
count, then ``count`` packed records of (u32 label, u8 split code,
window_len float32). Clip ids and the label vocabulary are not stored; a
loaded dataset carries clip id -1 for every window.
"""

import struct
from pathlib import Path

import numpy as np

from src.exceptions import DataValidationError
from src.logging_config import get_logger
from src.models.data_models import Split, WindowedDataset
from .base_repository import BaseRepository, PathLike

logger = get_logger(__name__)

CACHE_MAGIC = b"WDNW"
CACHE_VERSION = 1
_HEADER = struct.Struct("<4sIII")


def record_dtype(window_len: int) -> np.dtype:
    return np.dtype([("label", "<u4"), ("split", "u1"), ("window", "<f4", (window_len,))])


class WindowCacheRepository(BaseRepository):
    """Repository for ``WDNW`` windowed-dataset caches."""

    def save(self, dataset: WindowedDataset, path: PathLike) -> Path:
        path = self._prepare(path)
        window_len = dataset.windows.shape[1]
        records = np.zeros(len(dataset), dtype=record_dtype(window_len))
        records["label"] = dataset.labels
        records["split"] = dataset.splits
        records["window"] = dataset.windows
        with open(path, "wb") as f:
            f.write(_HEADER.pack(CACHE_MAGIC, CACHE_VERSION, window_len, len(dataset)))
            f.write(records.tobytes())
        logger.info(f"Wrote {len(dataset)} windows of {window_len} samples to {path}")
        return path

    def load(self, path: PathLike) -> WindowedDataset:
        path = Path(path)
        try:
            blob = path.read_bytes()
        except OSError as e:
            raise DataValidationError(f"cannot read window cache {path}: {e}", {"path": str(path)})
        if len(blob) < _HEADER.size:
            raise DataValidationError(f"window cache {path} is truncated", {"path": str(path)})
        magic, version, window_len, count = _HEADER.unpack_from(blob)
        if magic != CACHE_MAGIC:
            raise DataValidationError(f"{path} is not a window cache (magic {magic!r})", {"path": str(path)})
        if version != CACHE_VERSION:
            raise DataValidationError(f"unsupported window cache version {version}", {"path": str(path)})
        dtype = record_dtype(window_len)
        expected = _HEADER.size + count * dtype.itemsize
        if len(blob) != expected:
            raise DataValidationError(f"window cache {path} holds {len(blob)} bytes, expected {expected}",
                                      {"path": str(path)})
        records = np.frombuffer(blob, dtype=dtype, count=count, offset=_HEADER.size)
        for code in np.unique(records["split"]):
            Split.from_code(int(code))
        return WindowedDataset(
            records["window"].astype(np.float64),
            records["label"].astype(np.int64),
            records["split"].astype(np.uint8),
            np.full(count, -1, dtype=np.int64),
        )
