from abc import ABC, abstractmethod
from pathlib import Path
from typing import Any, Union

PathLike = Union[str, Path]


class BaseRepository(ABC):
    """Base repository interface for artifacts stored as files."""

    @abstractmethod
    def load(self, path: PathLike) -> Any:
        """Read and decode the artifact stored at ``path``."""
        pass

    @abstractmethod
    def save(self, obj: Any, path: PathLike) -> Path:
        """Encode ``obj`` and write it to ``path``, creating parent directories."""
        pass

    @staticmethod
    def _prepare(path: PathLike) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        return path
