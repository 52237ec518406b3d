"""
Manifest builders for emotional-speech corpora laid out by their filename
conventions. Files an adapter cannot label go to ``Manifest.rejects``.
"""

from pathlib import Path
from typing import Callable, Dict, List, Optional

from ..exceptions import DataValidationError
from ..logging_config import get_logger
from ..models.data_models import Manifest

logger = get_logger(__name__)

EMODB_CODES: Dict[str, str] = {
    "W": "anger",
    "L": "boredom",
    "E": "disgust",
    "A": "fear",
    "F": "happiness",
    "T": "sadness",
    "N": "neutral",
}

RAVDESS_CODES: Dict[str, str] = {
    "01": "neutral",
    "02": "calm",
    "03": "happy",
    "04": "sad",
    "05": "angry",
    "06": "fearful",
    "07": "disgust",
    "08": "surprised",
}

TESS_LABELS: Dict[str, str] = {
    "angry": "angry",
    "disgust": "disgust",
    "fear": "fear",
    "happy": "happy",
    "neutral": "neutral",
    "ps": "pleasant_surprise",
    "sad": "sad",
}


def emodb_label(filename: str) -> Optional[str]:
    """Sixth character of the name, e.g. ``03a01Wa.wav`` → anger."""
    stem = Path(filename).stem
    return EMODB_CODES.get(stem[5]) if len(stem) > 5 else None


def ravdess_label(filename: str) -> Optional[str]:
    """Third dash-separated field, e.g. ``03-01-05-01-02-01-12.wav`` → angry."""
    parts = Path(filename).stem.split("-")
    return RAVDESS_CODES.get(parts[2]) if len(parts) == 7 else None


def tess_label(filename: str) -> Optional[str]:
    """Last underscore-separated token, e.g. ``OAF_back_ps.wav`` → pleasant_surprise."""
    token = Path(filename).stem.rsplit("_", 1)[-1].lower()
    return TESS_LABELS.get(token)


def _build_manifest(directory, corpus: str, labeler: Callable[[str], Optional[str]]) -> Manifest:
    root = Path(directory)
    if not root.is_dir():
        raise DataValidationError(f"{corpus} directory not found: {root}", {"directory": str(root)})
    files = sorted(p for p in root.rglob("*") if p.is_file() and p.suffix.lower() == ".wav")
    if not files:
        logger.warning(f"No WAV files found under {root}; {corpus} manifest is empty")

    rows: List[Dict[str, str]] = []
    rejects: List[str] = []
    for path in files:
        label = labeler(path.name)
        if label is None:
            rejects.append(str(path))
            continue
        rows.append({"path": str(path.resolve()), "label": label, "split": ""})

    if rejects:
        logger.warning(f"{len(rejects)} {corpus} file(s) have no recognizable emotion code, e.g. {rejects[0]}")
    logger.info(f"Built {corpus} manifest with {len(rows)} clips")
    return Manifest.from_rows(rows, rejects)


def emodb_manifest(directory) -> Manifest:
    return _build_manifest(directory, "emodb", emodb_label)


def ravdess_manifest(directory) -> Manifest:
    return _build_manifest(directory, "ravdess", ravdess_label)


def tess_manifest(directory) -> Manifest:
    return _build_manifest(directory, "tess", tess_label)


CORPUS_ADAPTERS: Dict[str, Callable[[str], Manifest]] = {
    "emodb": emodb_manifest,
    "ravdess": ravdess_manifest,
    "tess": tess_manifest,
}
