"""
Versioned binary container for model artifacts.

Layout (all integers little-endian)::

    magic      4 bytes   b"FTWK"
    version    uint32    FORMAT_VERSION
    header_len uint64    length of the JSON header in bytes
    header     UTF-8 JSON (sorted keys): {"kind", "metadata", "tensors": [...]}
    payload    concatenated tensors, row-major float64 little-endian

Each header tensor entry is ``{"name", "shape", "offset", "nbytes"}`` with
``offset`` relative to the start of the payload. Writing the same content
twice yields identical bytes.
"""
import json
import logging
import struct
from collections import OrderedDict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Union

import numpy as np

from ..errors import ContainerFormatError

logger = logging.getLogger(__name__)

MAGIC = b'FTWK'
FORMAT_VERSION = 1
_PREAMBLE = struct.Struct('<4sIQ')
_DTYPE = np.dtype('<f8')


@dataclass
class Container:
    """In-memory form of a serialized artifact."""
    kind: str
    metadata: Dict[str, Any] = field(default_factory=dict)
    tensors: 'OrderedDict[str, np.ndarray]' = field(default_factory=OrderedDict)


def to_bytes(container: Container) -> bytes:
    entries = []
    blobs = []
    offset = 0
    for name, tensor in container.tensors.items():
        arr = np.ascontiguousarray(tensor, dtype=_DTYPE)
        blob = arr.tobytes(order='C')
        entries.append({'name': name, 'shape': list(arr.shape), 'offset': offset, 'nbytes': len(blob)})
        blobs.append(blob)
        offset += len(blob)
    header = json.dumps(
        {'kind': container.kind, 'metadata': container.metadata, 'tensors': entries},
        sort_keys=True,
        separators=(',', ':'),
    ).encode('utf-8')
    return _PREAMBLE.pack(MAGIC, FORMAT_VERSION, len(header)) + header + b''.join(blobs)


def from_bytes(data: bytes, expected_kind: str = None) -> Container:
    if len(data) < _PREAMBLE.size:
        raise ContainerFormatError("Container is truncated (no preamble)")
    magic, version, header_len = _PREAMBLE.unpack_from(data, 0)
    if magic != MAGIC:
        raise ContainerFormatError(f"Not a facetweak container (magic {magic!r})")
    if version != FORMAT_VERSION:
        raise ContainerFormatError(
            f"Unsupported container version {version} (this reader understands {FORMAT_VERSION})"
        )
    start = _PREAMBLE.size
    if len(data) < start + header_len:
        raise ContainerFormatError("Container is truncated (header)")
    try:
        header = json.loads(data[start:start + header_len].decode('utf-8'))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise ContainerFormatError(f"Corrupt container header: {e}") from e
    if expected_kind is not None and header.get('kind') != expected_kind:
        raise ContainerFormatError(
            f"Expected a {expected_kind!r} container, found {header.get('kind')!r}"
        )
    payload = memoryview(data)[start + header_len:]
    tensors: 'OrderedDict[str, np.ndarray]' = OrderedDict()
    for entry in header.get('tensors', []):
        lo, hi = entry['offset'], entry['offset'] + entry['nbytes']
        if hi > len(payload):
            raise ContainerFormatError(f"Container is truncated (tensor {entry['name']})")
        arr = np.frombuffer(payload[lo:hi], dtype=_DTYPE).astype(np.float64)
        tensors[entry['name']] = arr.reshape(entry['shape'])
    return Container(kind=header['kind'], metadata=header.get('metadata', {}), tensors=tensors)


def save(container: Container, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(to_bytes(container))
    logger.info(f"Wrote {container.kind} container to {path}")
    return path


def load(path: Union[str, Path], expected_kind: str = None) -> Container:
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as e:
        raise ContainerFormatError(f"Cannot read container {path}: {e}") from e
    return from_bytes(data, expected_kind)
