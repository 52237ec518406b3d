"""
Manifest CSV access: header ``path,label,split``, UTF-8, LF line endings.
"""

from pathlib import Path

import pandas as pd

from src.exceptions import DataValidationError
from src.logging_config import get_logger
from src.models.data_models import MANIFEST_COLUMNS, Manifest
from .base_repository import BaseRepository, PathLike

logger = get_logger(__name__)


class ManifestRepository(BaseRepository):
    """Repository for clip manifests."""

    def load(self, path: PathLike) -> Manifest:
        path = Path(path)
        if not path.is_file():
            raise DataValidationError(f"manifest not found: {path}", {"manifest_path": str(path)})
        try:
            frame = pd.read_csv(path, dtype=str, keep_default_na=False, encoding="utf-8")
        except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as e:
            raise DataValidationError(f"cannot parse manifest {path}: {e}", {"manifest_path": str(path)})
        manifest = Manifest(frame)
        logger.info(f"Loaded manifest {path} with {len(manifest)} clips")
        return manifest

    def save(self, manifest: Manifest, path: PathLike) -> Path:
        path = self._prepare(path)
        manifest.frame[MANIFEST_COLUMNS].to_csv(path, index=False, lineterminator="\n", encoding="utf-8")
        logger.info(f"Wrote manifest {path} with {len(manifest)} clips")
        return path

    @staticmethod
    def resolve(manifest_path: PathLike, clip_path: str) -> Path:
        """Clip paths are relative to the manifest's directory unless absolute."""
        clip = Path(clip_path)
        return clip if clip.is_absolute() else Path(manifest_path).parent / clip
