"""
CSV exporter for facetweak tables (logs, assignments, statistics, error tables).
"""

from typing import Any, Dict, List, Sequence, Union
import logging
from pathlib import Path
import pandas as pd

Rows = Union[pd.DataFrame, Sequence[Dict[str, Any]]]


class CSVExporter:
    """Exports tables to comma-delimited CSV with a header row and no index."""

    def __init__(self):
        """Initialize CSV exporter with logging."""
        self.logger = logging.getLogger(__name__)

    def export(self, data: Rows, output_path: Union[str, Path], columns: List[str] = None) -> Path:
        """
        Export a table to CSV.

        Args:
            data: DataFrame or list of row dictionaries
            output_path: Path to save CSV file
            columns: Column order (default: the frame's own)

        Returns:
            Path: The written file
        """
        df = self.to_frame(data, columns)
        return self._save_to_file(df, output_path)

    @staticmethod
    def to_frame(data: Rows, columns: List[str] = None) -> pd.DataFrame:
        if isinstance(data, pd.DataFrame):
            return data[columns] if columns else data
        return pd.DataFrame(list(data), columns=columns)

    def _save_to_file(self, df: pd.DataFrame, output_path: Union[str, Path]) -> Path:
        """Save DataFrame to CSV file."""
        try:
            output_path = Path(output_path)
            output_path.parent.mkdir(parents=True, exist_ok=True)
            df.to_csv(output_path, index=False)
            self.logger.info(f"Exported CSV to {output_path}")
            return output_path
        except OSError as e:
            self.logger.error(f"Error saving CSV to {output_path}: {e}")
            raise
