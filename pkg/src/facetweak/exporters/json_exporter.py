"""
JSON exporter for facetweak artifacts (manifests, splits, summaries).
"""

import json
from typing import Any, Dict, Optional
import logging
from pathlib import Path

from ..utils.file_utils import write_text


class JSONExporter:
    """Exports dictionaries to deterministic JSON (sorted keys, two-space indent)."""

    def __init__(self):
        self.logger = logging.getLogger(__name__)

    def dumps(self, data: Dict[str, Any]) -> str:
        return json.dumps(data, indent=2, sort_keys=True) + "\n"

    def export(self, data: Dict[str, Any], output_path: Optional[str] = None) -> Optional[str]:
        """
        Export a dictionary to JSON.

        Args:
            data: JSON-serializable dictionary
            output_path: Optional path to save the JSON file

        Returns:
            Optional[str]: JSON string if no output_path, None if saved to file
        """
        json_str = self.dumps(data)
        if output_path:
            self._save_to_file(json_str, output_path)
            return None
        return json_str

    def _save_to_file(self, json_str: str, output_path: str) -> None:
        """Save JSON string to file."""
        try:
            path = write_text(output_path, json_str)
            self.logger.info(f"Exported JSON to {path}")
        except OSError as e:
            self.logger.error(f"Error saving JSON to {output_path}: {e}")
            raise

    @staticmethod
    def load(path) -> Dict[str, Any]:
        with open(Path(path), 'r', encoding='utf-8') as f:
            return json.load(f)
