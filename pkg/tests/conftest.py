"""
Test configuration and fixtures for WaDeNet tests.
"""

import json
import logging

import numpy as np
import pytest

from src.engine.rng import RngState
from src.logging_config import LOGGER_NAME
from src.models.config_models import DataConfig, ModelConfig, TrainConfig
from src.network.params import Network
from src.repositories.manifest_repository import ManifestRepository
from src.services.synth_service import synth_dataset


@pytest.fixture(autouse=True)
def reset_wadenet_logger():
    """Drop handlers bound to streams a CliRunner has since closed."""
    yield
    logger = logging.getLogger(LOGGER_NAME)
    for handler in list(logger.handlers):
        logger.removeHandler(handler)
        handler.close()


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


@pytest.fixture
def tiny_wadenet_config() -> ModelConfig:
    """Gradient-check scale WaDeNet: l=64, N=2, c=4, g=2, K=3."""
    return ModelConfig(kind="wadenet", N=2, c=4, k=3, g=2, inception_kernels=[1, 3, 5, 7],
                       fc_widths=[8], num_classes=3, window_len=64, dropout_p=0.5)


@pytest.fixture
def tiny_naive_config(tiny_wadenet_config) -> ModelConfig:
    return ModelConfig(**{**tiny_wadenet_config.to_dict(), "kind": "naive"})


@pytest.fixture
def reference_wadenet_config() -> ModelConfig:
    return ModelConfig()


@pytest.fixture
def reference_naive_config() -> ModelConfig:
    return ModelConfig(kind="naive")


@pytest.fixture
def tiny_wadenet(tiny_wadenet_config) -> Network:
    return Network.create(tiny_wadenet_config, RngState(7))


@pytest.fixture
def tiny_naive(tiny_naive_config) -> Network:
    return Network.create(tiny_naive_config, RngState(7))


@pytest.fixture
def fast_train_config() -> TrainConfig:
    return TrainConfig(lr0=0.01, epochs=2, drop_epoch=1, drop_factor=10.0, batch_size=8, seed=3)


@pytest.fixture
def small_data_config() -> DataConfig:
    """64-sample windows (4 ms at 16 kHz)."""
    return DataConfig(sample_rate=16000, window_ms=4.0, overlap=0.75)


@pytest.fixture
def synth_corpus(tmp_path):
    """3 classes x 6 clips of 0.05 s; returns (manifest path, manifest)."""
    root = tmp_path / "synth"
    manifest = synth_dataset(root, classes=3, clips_per_class=6, seconds=0.05, sample_rate=16000, seed=1)
    return root / "manifest.csv", manifest


@pytest.fixture
def settings_file(tmp_path):
    """Settings profile with small windows and a two-epoch recipe, no log files."""
    path = tmp_path / "settings.yaml"
    path.write_text(
        "test:\n"
        "  app:\n"
        "    log_level: WARNING\n"
        f"    output_root: {tmp_path / 'runs'}\n"
        "    threads: 2\n"
        "  audio:\n"
        "    sample_rate: 16000\n"
        "    window_ms: 4.0\n"
        "    overlap: 0.75\n"
        "  split:\n"
        "    ratios: [0.6, 0.2, 0.2]\n"
        "  training:\n"
        "    lr0: 0.01\n"
        "    epochs: 2\n"
        "    drop_epoch: 1\n"
        "    drop_factor: 10.0\n"
        "    batch_size: 8\n"
        "    seed: 0\n",
        encoding="utf-8",
    )
    return path


@pytest.fixture
def tiny_config_file(tmp_path, tiny_wadenet_config):
    path = tmp_path / "tiny_wadenet.json"
    path.write_text(json.dumps(tiny_wadenet_config.to_dict()), encoding="utf-8")
    return path


@pytest.fixture
def manifest_repository() -> ManifestRepository:
    return ManifestRepository()
