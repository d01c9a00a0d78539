from .file_utils import ensure_dir, read_file_contents, sha256_files, write_text
from .parallel import ordered_map
from .seeding import stream, stream_seed

__all__ = [
    "ensure_dir",
    "read_file_contents",
    "sha256_files",
    "write_text",
    "ordered_map",
    "stream",
    "stream_seed",
]
