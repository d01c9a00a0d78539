"""
Consolidated run report (Markdown plus an HTML rendering).

The report is a pure function of the files in a run directory: a section
whose inputs are missing is listed as absent, and nothing time-dependent is
written, so regenerating the report over the same run yields the same bytes.
"""
import logging
from pathlib import Path
from typing import List, Optional, Tuple, Union

import markdown
import pandas as pd
import yaml
from tabulate import tabulate

from ..utils.file_utils import read_file_contents, write_text

REPORT_MD = 'report.md'
REPORT_HTML = 'report.html'

HTML_TEMPLATE = """<!DOCTYPE html>
<html>
<head>
<meta charset="UTF-8">
<title>facetweak run report</title>
<style>
body {{ font-family: sans-serif; line-height: 1.5; margin: 40px; }}
table {{ border-collapse: collapse; margin: 16px 0; }}
th, td {{ border: 1px solid #ccc; padding: 4px 10px; text-align: right; }}
img {{ max-width: 640px; }}
</style>
</head>
<body>
{body}
</body>
</html>
"""

# (title, command producing it, tables, images)
SECTIONS: List[Tuple[str, str, List[str], List[str]]] = [
    ('Cluster sizes per layer', 'analyze', ['analyze/size_summary.csv'], ['analyze/cluster_means_FC5.png']),
    ('Landmark variance per layer', 'analyze', ['analyze/landmark_variance.csv'], ['analyze/landmark_variance.png']),
    ('Attribute variance per layer', 'analyze', ['analyze/attribute_variance.csv'], ['analyze/attribute_variance.png']),
    ('Most variable clusters', 'analyze', [], ['analyze/scatter.png']),
    ('Tweaked heads', 'tweak', ['tweak/heads.csv'], []),
    ('Augmentation rejection', 'tweak', ['tweak/augmentation.csv'], []),
    ('Error summary', 'eval', ['eval/summary.csv'], ['eval/curves.png']),
    ('Per-cluster error, vanilla against tweaked', 'eval', ['eval/per_cluster.csv'], ['eval/per_cluster.png']),
    ('Error against number of clusters', 'sweepk', ['sweepk/sweepk.csv'], ['sweepk/sweepk.png']),
]


class ReportExporter:
    """Collates the tables and figures of a run directory."""

    def __init__(self, floatfmt: str = '.4f'):
        self.floatfmt = floatfmt
        self.logger = logging.getLogger(__name__)

    def table(self, df: pd.DataFrame) -> str:
        return tabulate(df, headers='keys', tablefmt='pipe', showindex=False, floatfmt=self.floatfmt)

    def _header(self, run_dir: Path) -> List[str]:
        lines = ['# facetweak run report', '']
        text = read_file_contents(run_dir / 'run_config.yaml')
        if text is None:
            lines += ['Run configuration: *absent*', '']
            return lines
        config = yaml.safe_load(text) or {}
        cluster = config.get('cluster', {})
        lines += [
            f"- seed: {config.get('seed')}",
            f"- clusters: {cluster.get('k')} at {cluster.get('tap')}",
            f"- augmentation: {'on' if config.get('augment', {}).get('enabled') else 'off'}",
            '',
        ]
        return lines

    def section(self, run_dir: Path, title: str, command: str, tables: List[str], images: List[str]) -> List[str]:
        lines = [f"## {title}", '']
        present = [p for p in tables + images if (run_dir / p).exists()]
        if not present:
            missing = ', '.join(f"`{p}`" for p in tables + images)
            lines += [f"*Absent: run `facetweak {command}` to produce {missing}.*", '']
            return lines
        for rel in tables:
            path = run_dir / rel
            if path.exists():
                lines += [self.table(pd.read_csv(path)), '']
            else:
                lines += [f"*Absent: `{rel}`*", '']
        for rel in images:
            if (run_dir / rel).exists():
                lines += [f"![{title}]({rel})", '']
        return lines

    def render(self, run_dir: Union[str, Path]) -> str:
        run_dir = Path(run_dir)
        lines = self._header(run_dir)
        for title, command, tables, images in SECTIONS:
            lines += self.section(run_dir, title, command, tables, images)
        return '\n'.join(lines).rstrip('\n') + '\n'

    def export(self, run_dir: Union[str, Path], output_dir: Optional[Union[str, Path]] = None) -> Path:
        """
        Write ``report.md`` and ``report.html``.

        Args:
            run_dir: Run directory to read
            output_dir: Where to write (default: ``run_dir``)

        Returns:
            Path: The Markdown report
        """
        run_dir = Path(run_dir)
        output_dir = Path(output_dir) if output_dir else run_dir
        text = self.render(run_dir)
        md_path = write_text(output_dir / REPORT_MD, text)
        body = markdown.markdown(text, extensions=['tables'])
        write_text(output_dir / REPORT_HTML, HTML_TEMPLATE.format(body=body))
        self.logger.info(f"Wrote {md_path} and {output_dir / REPORT_HTML}")
        return md_path


def emit_report(run_dir: Union[str, Path]) -> Path:
    """Write the consolidated report of ``run_dir`` into it."""
    return ReportExporter().export(run_dir)
