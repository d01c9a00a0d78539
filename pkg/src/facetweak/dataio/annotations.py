"""
Reader and writer for landmark annotation files.

One record per line, whitespace-delimited::

    <image-path> <x> <y> <w> <h> <x1> <y1> ... <xm> <ym> [<male> <smiling> <eyeglasses>]

Box and landmark values are pixels in the image's own frame. A box written as
four ``-`` fields marks a face the detector missed. Blank lines and lines
starting with ``#`` are ignored. Image paths contain no whitespace.
"""
import logging
import re
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from ..errors import DataError
from ..utils.file_utils import read_file_contents, write_text

ATTRIBUTE_NAMES = ('male', 'smiling', 'eyeglasses')
MISSING = '-'


@dataclass
class AnnotationRecord:
    """One annotated face."""
    image_path: str
    box: Optional[Tuple[float, float, float, float]]
    landmarks: np.ndarray
    attributes: Optional[Tuple[int, int, int]] = None
    line_number: int = 0

    @property
    def is_failure(self) -> bool:
        """True for a detector miss (no box)."""
        return self.box is None

    @property
    def m(self) -> int:
        return int(self.landmarks.shape[0])


def _format_number(value: float) -> str:
    text = repr(float(value))
    return text[:-2] if text.endswith('.0') else text


class AnnotationParser:
    """Parser for landmark annotation files."""

    def __init__(self):
        """Initialize the parser with file-name and line patterns."""
        self.patterns = {
            'file': [
                r'(?i)^annotations?.*\.(txt|lst)$',
                r'(?i)^landmarks?.*\.(txt|lst)$',
            ],
            'skip': re.compile(r'^\s*(#.*)?$'),
        }
        self.logger = logging.getLogger(__name__)

    def is_annotation_file(self, filename: str) -> bool:
        """
        Check if a filename matches common annotation naming patterns.

        Args:
            filename: Name of the file to check

        Returns:
            bool: True if filename matches annotation patterns
        """
        return any(re.match(pattern, filename) for pattern in self.patterns['file'])

    def parse(self, file_path: Union[str, Path]) -> List[AnnotationRecord]:
        """
        Parse an annotation file.

        Args:
            file_path: Path to the annotation file

        Returns:
            List[AnnotationRecord]: Records in file order

        Raises:
            DataError: missing file, malformed line or inconsistent landmark count
        """
        file_path = Path(file_path)
        if not file_path.exists():
            raise DataError(f"Annotation file not found: {file_path}")
        try:
            content = read_file_contents(file_path)
        except UnicodeDecodeError as e:
            raise DataError(f"Annotation file {file_path} is not UTF-8 text: {e}") from e
        if content is None:
            raise DataError(f"Cannot read annotation file {file_path}")
        return self.parse_text(content, source=str(file_path))

    def parse_text(self, content: str, source: str = '<string>') -> List[AnnotationRecord]:
        records: List[AnnotationRecord] = []
        m = None
        for number, line in enumerate(content.splitlines(), start=1):
            if self.patterns['skip'].match(line):
                continue
            record = self.parse_line(line, number, source)
            if m is None:
                m = record.m
            elif record.m != m:
                raise DataError(
                    f"{source}:{number}: {record.m} landmarks, earlier records have {m}"
                )
            records.append(record)
        self.logger.debug(f"Parsed {len(records)} annotation records from {source}")
        return records

    def parse_line(self, line: str, line_number: int = 0, source: str = '<string>') -> AnnotationRecord:
        """
        Parse one record line.

        Raises:
            DataError: wrong field count, non-numeric value or non-positive box
        """
        fields = line.split()
        where = f"{source}:{line_number}"
        rest = len(fields) - 5
        if rest < 4:
            raise DataError(f"{where}: expected path, 4 box fields and landmarks, got {len(fields)} fields")
        n_attr = 3 if rest % 2 else 0
        coords = fields[5:len(fields) - n_attr]

        box_fields = fields[1:5]
        if all(f == MISSING for f in box_fields):
            box = None
        else:
            try:
                box = tuple(float(f) for f in box_fields)
            except ValueError as e:
                raise DataError(f"{where}: bad box field ({e})") from e
            if box[2] <= 0 or box[3] <= 0:
                raise DataError(f"{where}: box width and height must be positive, got {box[2]}x{box[3]}")
        try:
            landmarks = np.array([float(v) for v in coords], dtype=np.float64).reshape(-1, 2)
        except ValueError as e:
            raise DataError(f"{where}: bad landmark field ({e})") from e
        if not np.all(np.isfinite(landmarks)):
            raise DataError(f"{where}: landmark coordinates must be finite")

        attributes = None
        if n_attr:
            raw = fields[-3:]
            if any(v not in ('0', '1') for v in raw):
                raise DataError(f"{where}: attributes must be 0 or 1, got {' '.join(raw)}")
            attributes = tuple(int(v) for v in raw)
        return AnnotationRecord(fields[0], box, landmarks, attributes, line_number)

    def format_record(self, record: AnnotationRecord) -> str:
        """Render a record as one annotation line (no trailing newline)."""
        if record.box is None:
            box = [MISSING] * 4
        else:
            box = [_format_number(v) for v in record.box]
        parts = [record.image_path] + box + [_format_number(v) for v in record.landmarks.reshape(-1)]
        if record.attributes is not None:
            parts += [str(int(a)) for a in record.attributes]
        return ' '.join(parts)

    def write(self, records: Sequence[AnnotationRecord], file_path: Union[str, Path]) -> Path:
        """Write records to ``file_path`` (UTF-8, ``\\n`` line endings)."""
        text = ''.join(self.format_record(r) + '\n' for r in records)
        return write_text(file_path, text)

    def to_frame(self, records: Sequence[AnnotationRecord]) -> pd.DataFrame:
        """Tabular view: one row per record, box and flattened landmark columns."""
        rows = []
        for r in records:
            row = {'image_path': r.image_path, 'failure': r.is_failure}
            for name, value in zip(('x', 'y', 'w', 'h'), r.box or (np.nan,) * 4):
                row[name] = value
            for j, (px, py) in enumerate(r.landmarks):
                row[f'x{j + 1}'] = px
                row[f'y{j + 1}'] = py
            if r.attributes is not None:
                row.update(dict(zip(ATTRIBUTE_NAMES, r.attributes)))
            rows.append(row)
        return pd.DataFrame(rows)
