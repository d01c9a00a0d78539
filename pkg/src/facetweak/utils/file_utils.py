import hashlib
import logging
from pathlib import Path
from typing import Iterable, Optional, Union

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


def read_file_contents(file_path: PathLike) -> Optional[str]:
    """
    Read contents of a text file safely.

    Args:
        file_path: Path to file to read

    Returns:
        Optional[str]: File contents or None if reading fails
    """
    try:
        with open(file_path, 'r', encoding='utf-8') as f:
            return f.read()
    except OSError as e:
        logger.error(f"Error reading file {file_path}: {e}")
        return None


def ensure_dir(path: PathLike) -> Path:
    """Create a directory (and parents) if needed and return it as a Path."""
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    return path


def write_text(path: PathLike, text: str) -> Path:
    """Write UTF-8 text with Unix newlines, creating parent directories."""
    path = Path(path)
    ensure_dir(path.parent)
    with open(path, 'w', encoding='utf-8', newline='\n') as f:
        f.write(text)
    return path


def sha256_files(paths: Iterable[PathLike]) -> str:
    """
    Compute one SHA-256 digest over the bytes of several files, in order.

    Args:
        paths: Files to hash; order matters

    Returns:
        str: Hex digest
    """
    digest = hashlib.sha256()
    for path in paths:
        with open(path, 'rb') as f:
            for chunk in iter(lambda: f.read(1 << 16), b''):
                digest.update(chunk)
    return digest.hexdigest()
