"""
``WDN1`` checkpoint files.

Layout (little-endian): magic ``WDN1``, u32 version, u32 header length, a
UTF-8 JSON header, then every tensor as float32 in lexicographic name order.
The header holds the model and training configs, the tensor directory
(name → shape and byte offset into the payload), optimizer and RNG state,
the label vocabulary and the metric history.
"""

import json
import struct
from pathlib import Path
from typing import Dict, Optional

import numpy as np

from src.exceptions import CheckpointError, ConfigurationError
from src.logging_config import get_logger
from src.models.config_models import ModelConfig, TrainConfig
from src.models.training_models import Checkpoint, EpochMetrics
from src.network.params import expected_shapes
from .base_repository import BaseRepository, PathLike

logger = get_logger(__name__)

CHECKPOINT_MAGIC = b"WDN1"
CHECKPOINT_VERSION = 1
_PREAMBLE = struct.Struct("<4sII")


def encode_checkpoint(checkpoint: Checkpoint) -> bytes:
    directory: Dict[str, Dict] = {}
    payload = []
    offset = 0
    for name in sorted(checkpoint.arrays):
        data = np.ascontiguousarray(checkpoint.arrays[name], dtype="<f4")
        directory[name] = {"shape": list(data.shape), "offset": offset}
        payload.append(data.tobytes())
        offset += data.nbytes

    header = {
        "model_config": checkpoint.model_config.to_dict(),
        "train_config": checkpoint.train_config.to_dict(),
        "tensors": directory,
        "optimizer": {"epoch": int(checkpoint.epoch), "lr": float(checkpoint.lr)},
        "rng_state": checkpoint.rng_state,
        "vocabulary": list(checkpoint.vocabulary),
        "metrics": [m.to_dict() for m in checkpoint.history],
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    return _PREAMBLE.pack(CHECKPOINT_MAGIC, CHECKPOINT_VERSION, len(blob)) + blob + b"".join(payload)


def decode_checkpoint(blob: bytes, source: str = "<bytes>") -> Checkpoint:
    """
    Parse and validate a checkpoint.

    Raises:
        CheckpointError: bad magic or version, truncation, or a tensor whose
            shape disagrees with the stored model config (named in the message)
    """
    if len(blob) < _PREAMBLE.size:
        raise CheckpointError(f"{source}: truncated checkpoint preamble", {"path": source})
    magic, version, header_len = _PREAMBLE.unpack_from(blob)
    if magic != CHECKPOINT_MAGIC:
        raise CheckpointError(f"{source}: bad checkpoint magic {magic!r}", {"path": source})
    if version != CHECKPOINT_VERSION:
        raise CheckpointError(f"{source}: unsupported checkpoint version {version}", {"path": source})
    start = _PREAMBLE.size + header_len
    if len(blob) < start:
        raise CheckpointError(f"{source}: truncated checkpoint header", {"path": source})
    try:
        header = json.loads(blob[_PREAMBLE.size:start].decode("utf-8"))
        config = ModelConfig.from_dict(header["model_config"])
        train_config = TrainConfig(**header["train_config"])
        directory = header["tensors"]
    except (ValueError, KeyError, TypeError, ConfigurationError) as e:
        raise CheckpointError(f"{source}: unreadable checkpoint header: {e}", {"path": source})

    expected = expected_shapes(config)
    for name, shape in expected.items():
        if name not in directory:
            raise CheckpointError(f"{source}: tensor {name} missing", {"tensor": name})
        if tuple(directory[name]["shape"]) != shape:
            raise CheckpointError(
                f"{source}: tensor {name} has shape {tuple(directory[name]['shape'])}, config needs {shape}",
                {"tensor": name})
    extra = sorted(set(directory) - set(expected))
    if extra:
        raise CheckpointError(f"{source}: unexpected tensor {extra[0]}", {"tensor": extra[0]})

    payload = memoryview(blob)[start:]
    arrays = {}
    for name in sorted(directory):
        shape = tuple(directory[name]["shape"])
        offset = directory[name]["offset"]
        count = int(np.prod(shape))
        if offset + 4 * count > len(payload):
            raise CheckpointError(f"{source}: payload truncated inside tensor {name}", {"tensor": name})
        arrays[name] = np.frombuffer(payload, dtype="<f4", count=count, offset=offset).astype(np.float64).reshape(shape)

    optimizer = header.get("optimizer", {})
    return Checkpoint(
        model_config=config,
        train_config=train_config,
        arrays=arrays,
        epoch=optimizer.get("epoch", 0),
        lr=optimizer.get("lr", 0.0),
        rng_state=header.get("rng_state"),
        history=[EpochMetrics.from_dict(m) for m in header.get("metrics", [])],
        vocabulary=header.get("vocabulary", []),
    )


class CheckpointRepository(BaseRepository):
    """Repository for ``WDN1`` checkpoints."""

    def save(self, checkpoint: Checkpoint, path: PathLike) -> Path:
        path = self._prepare(path)
        if path.exists():
            logger.warning(f"Overwriting checkpoint {path}")
        path.write_bytes(encode_checkpoint(checkpoint))
        logger.info(f"Saved checkpoint {path} (epoch {checkpoint.epoch})")
        return path

    def load(self, path: PathLike, config: Optional[ModelConfig] = None) -> Checkpoint:
        """
        Load a checkpoint, optionally requiring it to match ``config``.

        Raises:
            CheckpointError: unreadable file, corrupt content, or a config mismatch
        """
        path = Path(path)
        try:
            blob = path.read_bytes()
        except OSError as e:
            raise CheckpointError(f"cannot read checkpoint {path}: {e}", {"path": str(path)})
        checkpoint = decode_checkpoint(blob, str(path))
        if config is not None and config.to_dict() != checkpoint.model_config.to_dict():
            raise CheckpointError(f"checkpoint {path} was trained with a different model config",
                                  {"path": str(path)})
        return checkpoint
