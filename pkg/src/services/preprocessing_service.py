"""
Preprocessing Service Layer for WaDeNet datasets.

Turns a manifest of WAV clips into a windowed dataset: decode, resample to
the common rate, segment into overlapping windows, standardize each window
and tag it with its clip's label and split. Splits are assigned per clip,
stratified by class.
"""

import os
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from tqdm import tqdm

from ..engine.rng import RngState
from ..exceptions import ConfigurationError, ParameterError, StratificationError
from ..logging_config import get_logger
from ..models.config_models import DataConfig
from ..models.data_models import AudioClip, Manifest, Split, WindowedDataset, WindowedExample
from ..repositories.manifest_repository import ManifestRepository
from ..repositories.wav_repository import read_wav

logger = get_logger(__name__)

NORMALIZE_EPS = 1e-8
MIN_CLIPS_PER_CLASS = 3
THREADS_ENV = "WADENET_THREADS"


def resample_linear(clip: AudioClip, target_rate: int) -> AudioClip:
    """
    Linear interpolation onto round(len · target / source) uniform samples.

    Equal rates return the samples unchanged.
    """
    if target_rate <= 0:
        raise ParameterError(f"target sample rate must be positive, got {target_rate}")
    if target_rate == clip.sample_rate:
        return AudioClip(clip.samples.copy(), clip.sample_rate, clip.source_path, clip.label)
    source_len = len(clip.samples)
    target_len = max(1, int(round(source_len * target_rate / clip.sample_rate)))
    positions = np.linspace(0.0, source_len - 1, target_len)
    samples = np.interp(positions, np.arange(source_len), clip.samples)
    return AudioClip(samples, target_rate, clip.source_path, clip.label)


def window_count(num_samples: int, window_len: int, hop: int) -> int:
    """floor((S − l) / hop) + 1 for S ≥ l, else 0."""
    if num_samples < window_len:
        return 0
    return (num_samples - window_len) // hop + 1


def segment_windows(clip: AudioClip, window_ms: float = 320.0, overlap: float = 0.75,
                    window_len: Optional[int] = None, split: Split = Split.TRAIN,
                    clip_id: int = 0) -> List[WindowedExample]:
    """
    Slice a clip into overlapping windows carrying the clip's label.

    The window length is ``window_len`` when given, else
    round(rate · window_ms / 1000); the hop is round(l · (1 − overlap)).
    A clip shorter than one window yields no windows.
    """
    if not 0.0 <= overlap < 1.0:
        raise ParameterError(f"overlap must lie in [0, 1), got {overlap}")
    length = window_len if window_len is not None else int(round(clip.sample_rate * window_ms / 1000.0))
    hop = int(round(length * (1.0 - overlap)))
    if length < 1 or hop < 1:
        raise ParameterError(f"window length {length} with overlap {overlap} gives hop {hop}")

    count = window_count(len(clip.samples), length, hop)
    if count == 0:
        logger.warning(f"Clip {clip.source_path or clip_id} has {len(clip.samples)} samples, "
                       f"shorter than one {length}-sample window; skipped")
        return []
    views = sliding_window_view(clip.samples, length)[::hop][:count]
    return [WindowedExample(np.array(view), clip.label, split, clip_id) for view in views]


def normalize_window(window) -> np.ndarray:
    """(x − mean) / (std + 1e-8)."""
    window = np.asarray(window, dtype=np.float64)
    return (window - window.mean()) / (window.std() + NORMALIZE_EPS)


def _largest_remainder(n: int, ratios: Sequence[float]) -> List[int]:
    quotas = [n * r for r in ratios]
    counts = [int(np.floor(q)) for q in quotas]
    order = sorted(range(len(ratios)), key=lambda i: (-(quotas[i] - counts[i]), i))
    for i in order[:n - sum(counts)]:
        counts[i] += 1
    # every split with a positive ratio receives at least one clip
    for i, r in enumerate(ratios):
        if r > 0 and counts[i] == 0:
            donor = max(range(len(counts)), key=lambda j: (counts[j], -j))
            counts[donor] -= 1
            counts[i] += 1
    return counts


def split_stratified(manifest: Manifest, ratios: Sequence[float] = (0.6, 0.2, 0.2), seed: int = 0) -> Manifest:
    """
    Assign train/val/test per clip, class by class.

    Each class's clips are shuffled with a seeded generator and cut by
    largest-remainder rounding of ``ratios``.

    Raises:
        StratificationError: a class has fewer than 3 clips
    """
    if len(ratios) != 3 or any(r < 0 for r in ratios) or abs(sum(ratios) - 1.0) > 1e-9:
        raise ConfigurationError(f"split ratios must be three non-negative numbers summing to 1, got {list(ratios)}")
    counts = manifest.class_counts()
    short = {label: n for label, n in counts.items() if n < MIN_CLIPS_PER_CLASS}
    if short:
        label, n = sorted(short.items())[0]
        raise StratificationError(f"class {label!r} has {n} clips; at least {MIN_CLIPS_PER_CLASS} are needed",
                                  {"label": label, "clips": n})

    rng = RngState(seed)
    splits = [""] * len(manifest)
    labels = manifest.frame["label"].to_numpy()
    for label in manifest.vocabulary:
        rows = np.flatnonzero(labels == label)
        rows = rows[rng.permutation(len(rows))]
        start = 0
        for split, n in zip(Split, _largest_remainder(len(rows), ratios)):
            for row in rows[start:start + n]:
                splits[row] = split.value
            start += n
    logger.info(f"Split {len(manifest)} clips over {len(counts)} classes with ratios {list(ratios)}")
    return manifest.with_splits(splits)


def resolve_threads(explicit: Optional[int] = None, configured: Optional[int] = None) -> int:
    """Worker count: explicit flag, then WADENET_THREADS, then settings, then CPU count."""
    for source, value in (("flag", explicit), (THREADS_ENV, os.environ.get(THREADS_ENV)), ("settings", configured)):
        if value is None or value == "":
            continue
        try:
            threads = int(value)
        except (TypeError, ValueError):
            raise ConfigurationError(f"{source} thread count must be an integer, got {value!r}")
        if threads < 1:
            raise ConfigurationError(f"{source} thread count must be positive, got {threads}")
        return threads
    return os.cpu_count() or 1


class PreprocessingService:
    """
    Service layer for building windowed datasets from manifests.

    Clips are decoded and windowed on a thread pool; results are merged in
    manifest order, so the dataset is identical for any worker count.
    """

    def __init__(self, config: DataConfig, window_len: Optional[int] = None,
                 threads: int = 1, show_progress: bool = False):
        """
        Initialize the preprocessing service.

        Args:
            config: Audio and split settings
            window_len: Samples per window; defaults to the config's window_ms at its sample rate
            threads: Worker threads for decoding
            show_progress: Draw a progress bar on stderr
        """
        config.validate().raise_if_invalid("audio settings")
        self.config = config
        self.window_len = window_len if window_len is not None else config.window_len
        self.threads = max(1, threads)
        self.show_progress = show_progress

    @property
    def hop(self) -> int:
        return self.config.hop(self.window_len)

    def ensure_split(self, manifest: Manifest, seed: int) -> Manifest:
        if manifest.is_split:
            return manifest
        return split_stratified(manifest, self.config.ratios, seed)

    def _clip_windows(self, job: Tuple[int, Path, int, Split]) -> List[WindowedExample]:
        clip_id, path, label, split = job
        clip = read_wav(path)
        clip.label = label
        clip = resample_linear(clip, self.config.sample_rate)
        windows = segment_windows(clip, overlap=self.config.overlap, window_len=self.window_len,
                                  split=split, clip_id=clip_id)
        for example in windows:
            example.window = normalize_window(example.window)
        return windows

    def build_dataset(self, manifest: Manifest, manifest_path) -> WindowedDataset:
        """
        Window every clip of a split manifest.

        Args:
            manifest: Manifest whose every row has a split
            manifest_path: Location of the manifest; relative clip paths resolve against its directory

        Returns:
            WindowedDataset: windows in manifest order, clip id = manifest row
        """
        if not manifest.is_split:
            raise ConfigurationError("manifest must be split before windowing")
        labels = manifest.label_indices
        jobs = [
            (row, ManifestRepository.resolve(manifest_path, path), int(labels[row]), Split(split))
            for row, (path, split) in enumerate(zip(manifest.frame["path"], manifest.frame["split"]))
        ]
        logger.info(f"Windowing {len(jobs)} clips ({self.window_len} samples, hop {self.hop}) "
                    f"on {self.threads} thread(s)")
        with ThreadPoolExecutor(max_workers=self.threads) as executor:
            per_clip = list(tqdm(executor.map(self._clip_windows, jobs), total=len(jobs),
                                 desc="Windowing", unit="clip", disable=not self.show_progress))
        examples = [example for windows in per_clip for example in windows]
        dataset = WindowedDataset.from_examples(examples, self.window_len, manifest.vocabulary)
        logger.info(f"Built {len(dataset)} windows from {len(jobs)} clips")
        return dataset
