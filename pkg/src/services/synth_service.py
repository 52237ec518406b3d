"""
Synthetic band-limited corpus for desk-scale experiments.

Class j is a sum of sinusoids drawn from its own frequency band, with random
phases and Gaussian noise at a fixed SNR. Clips are written as mono PCM-16
WAVs next to a ``manifest.csv`` with relative paths.
"""

from pathlib import Path
from typing import List, Tuple

import numpy as np

from ..engine.rng import RngState
from ..exceptions import ParameterError
from ..logging_config import get_logger
from ..models.data_models import Manifest
from ..repositories.manifest_repository import ManifestRepository
from ..repositories.wav_repository import write_wav

logger = get_logger(__name__)

DEFAULT_BANDS: List[Tuple[float, float]] = [(200.0, 400.0), (800.0, 1200.0), (2000.0, 3000.0)]
BAND_GAP = 1.3
BAND_WIDTH = 1.4
TONES_PER_CLIP = 3
PEAK = 0.9
MANIFEST_NAME = "manifest.csv"


def class_bands(classes: int, sample_rate: int) -> List[Tuple[float, float]]:
    """
    Disjoint [lo, hi) bands, one per class.

    Beyond the three defaults each band starts 1.3× above the previous upper
    edge and spans a factor 1.4.

    Raises:
        ParameterError: fewer than 2 classes, or a band reaching past Nyquist
    """
    if classes < 2:
        raise ParameterError(f"synthetic corpus needs at least 2 classes, got {classes}")
    bands = list(DEFAULT_BANDS[:classes])
    while len(bands) < classes:
        lo = bands[-1][1] * BAND_GAP
        bands.append((lo, lo * BAND_WIDTH))
    nyquist = sample_rate / 2.0
    for j, (lo, hi) in enumerate(bands):
        if hi > nyquist:
            raise ParameterError(f"class {j} band [{lo:g}, {hi:g}) Hz exceeds the Nyquist frequency {nyquist:g} Hz",
                                 {"class": j, "band": [lo, hi], "sample_rate": sample_rate})
    return bands


def synth_clip(rng: RngState, band: Tuple[float, float], num_samples: int, sample_rate: int,
               snr_db: float = 10.0) -> np.ndarray:
    lo, hi = band
    margin = 0.05 * (hi - lo)
    t = np.arange(num_samples) / sample_rate
    freqs = rng.uniform(lo + margin, hi - margin, TONES_PER_CLIP)
    phases = rng.uniform(0.0, 2 * np.pi, TONES_PER_CLIP)
    signal = np.sin(2 * np.pi * freqs[:, None] * t[None, :] + phases[:, None]).sum(axis=0)
    noise_power = np.mean(signal ** 2) / 10 ** (snr_db / 10.0)
    clip = signal + rng.normal(0.0, np.sqrt(noise_power), num_samples)
    return clip * (PEAK / np.max(np.abs(clip)))


def synth_dataset(output_dir, classes: int = 3, clips_per_class: int = 60, seconds: float = 2.0,
                  sample_rate: int = 16000, seed: int = 0, snr_db: float = 10.0) -> Manifest:
    """
    Write a synthetic corpus and its manifest.

    Args:
        output_dir: Directory receiving the WAVs and ``manifest.csv``
        classes: Number of classes (bands)
        clips_per_class: Clips written per class
        seconds: Clip duration
        sample_rate: Sample rate in Hz
        seed: Generator seed; the corpus is byte-identical for equal arguments
        snr_db: Signal-to-noise ratio of the added Gaussian noise

    Returns:
        Manifest: unsplit rows, labels ``class00``, ``class01``, ...
    """
    if clips_per_class < 1 or seconds <= 0 or sample_rate <= 0:
        raise ParameterError(f"invalid synthetic corpus size: {clips_per_class} clips of {seconds} s at "
                             f"{sample_rate} Hz")
    bands = class_bands(classes, sample_rate)
    num_samples = int(round(seconds * sample_rate))
    root = Path(output_dir)
    rng = RngState(seed)

    rows = []
    for j, band in enumerate(bands):
        label = f"class{j:02d}"
        for i in range(clips_per_class):
            name = f"{label}_{i:04d}.wav"
            write_wav(root / name, synth_clip(rng, band, num_samples, sample_rate, snr_db), sample_rate)
            rows.append({"path": name, "label": label, "split": ""})
        logger.debug(f"{label}: band [{band[0]:g}, {band[1]:g}) Hz, {clips_per_class} clips")

    manifest = Manifest.from_rows(rows)
    ManifestRepository().save(manifest, root / MANIFEST_NAME)
    logger.info(f"Synthesized {len(rows)} clips ({classes} classes, {seconds:g} s at {sample_rate} Hz) in {root}")
    return manifest
