"""
Configuration models for WaDeNet runs.

This module contains the dataclasses that describe an architecture
(``ModelConfig``), an optimization recipe (``TrainConfig``) and a CLI
invocation (``RunSpec``), plus the ``ValidationResult`` they report into.
"""

import json
from dataclasses import asdict, dataclass, field, fields, replace
from typing import Any, Dict, List, Optional

from src.exceptions import ConfigurationError

MODEL_KINDS = ("naive", "wadenet")
COMMANDS = ("preprocess", "train", "eval", "params", "gradcheck", "synth", "manifest")


@dataclass
class ValidationResult:
    """
    Contains validation status and details.

    Used for configuration validation before any computation starts.
    """
    is_valid: bool = True
    details: Dict[str, Any] = field(default_factory=dict)
    errors: List[str] = field(default_factory=list)

    def add_error(self, error: str, component: str = "general") -> None:
        """Add an error and mark validation as invalid."""
        self.errors.append(error)
        self.is_valid = False
        self.details.setdefault(component, {"status": "error", "messages": []})
        self.details[component]["status"] = "error"
        self.details[component]["messages"].append(error)

    def raise_if_invalid(self, what: str) -> None:
        if not self.is_valid:
            raise ConfigurationError(f"Invalid {what}: {'; '.join(self.errors)}",
                                     {"errors": list(self.errors), "fields": sorted(self.details)})


def _is_int(value) -> bool:
    return isinstance(value, int) and not isinstance(value, bool)


@dataclass
class ModelConfig:
    """
    Architecture hyper-parameters; fully determine both networks.

    Field names match the JSON document keys.
    """
    kind: str = "wadenet"
    N: int = 4
    c: int = 64
    k: int = 3
    g: int = 16
    inception_kernels: List[int] = field(default_factory=lambda: [1, 3, 5, 7])
    fc_widths: List[int] = field(default_factory=lambda: [512, 128])
    num_classes: int = 7
    window_len: int = 5120
    dropout_p: float = 0.5

    @property
    def is_wadenet(self) -> bool:
        return self.kind == "wadenet"

    def block_channels(self, n: int) -> int:
        """Output channels of Convolutional Block n (1-based): c·2ⁿ⁻¹."""
        return self.c * 2 ** (n - 1)

    def block_length(self, n: int) -> int:
        """Output length of Convolutional Block n: l / 2ⁿ."""
        return self.window_len // 2 ** n

    def block_input_channels(self, n: int) -> int:
        if n == 1:
            return 1
        return self.block_channels(n - 1) + (self.g if self.is_wadenet else 0)

    @property
    def trunk_channels(self) -> int:
        """Channels of the map that is flattened."""
        return self.block_channels(self.N) + (self.g if self.is_wadenet else 0)

    @property
    def flatten_size(self) -> int:
        return self.trunk_channels * self.block_length(self.N)

    def validate(self) -> ValidationResult:
        result = ValidationResult()

        if self.kind not in MODEL_KINDS:
            result.add_error(f"kind must be one of {MODEL_KINDS}, got {self.kind!r}", "kind")
        for name in ("N", "c", "k", "g", "num_classes", "window_len"):
            value = getattr(self, name)
            if not _is_int(value) or value < 1:
                result.add_error(f"{name} must be a positive integer, got {value!r}", name)
        if not result.is_valid:
            return result

        if self.k % 2 == 0:
            result.add_error(f"k must be odd, got {self.k}", "k")
        if self.num_classes < 2:
            result.add_error(f"num_classes must be at least 2, got {self.num_classes}", "num_classes")
        if self.window_len % 2 ** self.N:
            result.add_error(f"window_len {self.window_len} is not divisible by 2^{self.N}", "window_len")
        if not isinstance(self.dropout_p, (int, float)) or not 0.0 <= self.dropout_p < 1.0:
            result.add_error(f"dropout_p must lie in [0, 1), got {self.dropout_p!r}", "dropout_p")
        if not isinstance(self.fc_widths, list) or not all(_is_int(w) and w > 0 for w in self.fc_widths):
            result.add_error(f"fc_widths must be a list of positive integers, got {self.fc_widths!r}", "fc_widths")

        kernels = self.inception_kernels
        if not isinstance(kernels, list) or not kernels or not all(_is_int(q) and q > 0 and q % 2 for q in kernels):
            result.add_error(f"inception_kernels must be a non-empty list of odd sizes, got {kernels!r}",
                             "inception_kernels")
        elif self.is_wadenet:
            for n in range(1, self.N + 1):
                if self.block_channels(n) % len(kernels):
                    result.add_error(
                        f"block {n} has {self.block_channels(n)} channels, not divisible by "
                        f"{len(kernels)} inception branches", "inception_kernels")
                    break
        return result

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ModelConfig":
        if not isinstance(data, dict):
            raise ConfigurationError("model config must be a JSON object")
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigurationError(f"unknown model config keys: {', '.join(unknown)}", {"unknown_keys": unknown})
        config = cls(**data)
        config.validate().raise_if_invalid("model config")
        return config

    @classmethod
    def from_json(cls, path: str) -> "ModelConfig":
        try:
            with open(path, "r", encoding="utf-8") as f:
                data = json.load(f)
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigurationError(f"Failed to load model config {path}: {e}", {"config_path": str(path)})
        return cls.from_dict(data)


@dataclass
class TrainConfig:
    """SGD recipe: single learning-rate drop, fixed categorical cross-entropy."""
    lr0: float = 0.001
    epochs: int = 150
    drop_epoch: int = 50
    drop_factor: float = 10.0
    batch_size: int = 32
    seed: int = 0
    loss: str = "categorical_cross_entropy"

    def validate(self) -> ValidationResult:
        result = ValidationResult()
        if not self.lr0 > 0:
            result.add_error(f"lr0 must be positive, got {self.lr0}", "lr0")
        if not _is_int(self.epochs) or self.epochs < 1:
            result.add_error(f"epochs must be a positive integer, got {self.epochs!r}", "epochs")
        elif not _is_int(self.drop_epoch) or not 0 < self.drop_epoch <= self.epochs:
            result.add_error(f"drop_epoch must lie in (0, {self.epochs}], got {self.drop_epoch!r}", "drop_epoch")
        if not self.drop_factor > 1:
            result.add_error(f"drop_factor must exceed 1, got {self.drop_factor}", "drop_factor")
        if not _is_int(self.batch_size) or self.batch_size < 1:
            result.add_error(f"batch_size must be a positive integer, got {self.batch_size!r}", "batch_size")
        if not _is_int(self.seed) or not 0 <= self.seed < 2 ** 64:
            result.add_error(f"seed must be a 64-bit unsigned integer, got {self.seed!r}", "seed")
        if self.loss != "categorical_cross_entropy":
            result.add_error(f"only categorical_cross_entropy is supported, got {self.loss!r}", "loss")
        return result

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_settings(cls, section: Optional[Dict[str, Any]]) -> "TrainConfig":
        """Build from the ``training`` section of a settings profile."""
        section = dict(section or {})
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(section) - known)
        if unknown:
            raise ConfigurationError(f"unknown training settings: {', '.join(unknown)}", {"unknown_keys": unknown})
        config = cls(**section)
        config.validate().raise_if_invalid("training settings")
        return config


@dataclass
class DataConfig:
    """Audio and split settings shared by preprocessing and training."""
    sample_rate: int = 16000
    window_ms: float = 320.0
    overlap: float = 0.75
    ratios: List[float] = field(default_factory=lambda: [0.6, 0.2, 0.2])

    @property
    def window_len(self) -> int:
        return int(round(self.sample_rate * self.window_ms / 1000.0))

    def hop(self, window_len: Optional[int] = None) -> int:
        """Hop between window starts: round(l · (1 − overlap))."""
        length = self.window_len if window_len is None else window_len
        return int(round(length * (1.0 - self.overlap)))

    def validate(self) -> ValidationResult:
        result = ValidationResult()
        if not _is_int(self.sample_rate) or self.sample_rate < 1:
            result.add_error(f"sample_rate must be a positive integer, got {self.sample_rate!r}", "sample_rate")
        if not self.window_ms > 0:
            result.add_error(f"window_ms must be positive, got {self.window_ms}", "window_ms")
        if not 0.0 <= self.overlap < 1.0:
            result.add_error(f"overlap must lie in [0, 1), got {self.overlap}", "overlap")
        ratios = self.ratios
        if (not isinstance(ratios, (list, tuple)) or len(ratios) != 3 or any(r < 0 for r in ratios)
                or abs(sum(ratios) - 1.0) > 1e-9):
            result.add_error(f"split ratios must be three non-negative numbers summing to 1, got {ratios!r}",
                             "ratios")
        return result

    @classmethod
    def from_settings(cls, audio: Optional[Dict[str, Any]] = None,
                      split: Optional[Dict[str, Any]] = None) -> "DataConfig":
        """Build from the ``audio`` and ``split`` sections of a settings profile."""
        values = dict(audio or {})
        if split and "ratios" in split:
            values["ratios"] = list(split["ratios"])
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(values) - known)
        if unknown:
            raise ConfigurationError(f"unknown audio settings: {', '.join(unknown)}", {"unknown_keys": unknown})
        config = cls(**values)
        config.validate().raise_if_invalid("audio settings")
        return config


@dataclass
class RunSpec:
    """One CLI invocation; flag overrides win over config-file values."""
    command: str
    config_path: Optional[str] = None
    manifest_path: Optional[str] = None
    checkpoint_path: Optional[str] = None
    seed: Optional[int] = None
    output_dir: Optional[str] = None
    overrides: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise ConfigurationError(f"unknown command {self.command!r}", {"choices": list(COMMANDS)})
        self.overrides = {k: v for k, v in self.overrides.items() if v is not None}

    def apply(self, train_config: TrainConfig) -> TrainConfig:
        """TrainConfig with the seed and the epochs/lr/batch-size overrides applied."""
        changes = {}
        if "epochs" in self.overrides:
            changes["epochs"] = self.overrides["epochs"]
            changes["drop_epoch"] = min(train_config.drop_epoch, self.overrides["epochs"])
        if "lr" in self.overrides:
            changes["lr0"] = self.overrides["lr"]
        if "batch_size" in self.overrides:
            changes["batch_size"] = self.overrides["batch_size"]
        if self.seed is not None:
            changes["seed"] = self.seed
        config = replace(train_config, **changes)
        config.validate().raise_if_invalid("training settings")
        return config
