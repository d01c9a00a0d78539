import pandas as pd

from facetweak.exporters import ReportExporter, emit_report
from facetweak.exporters.report_exporter import SECTIONS


def test_empty_run_lists_every_section_as_absent(run_dir):
    path = emit_report(run_dir)
    text = path.read_text(encoding='utf-8')
    assert 'Run configuration: *absent*' in text
    for title, command, _, _ in SECTIONS:
        assert f"## {title}" in text
    assert text.count('*Absent: run `facetweak') == len(SECTIONS)
    assert (run_dir / 'report.html').exists()


def test_present_tables_are_rendered(run_dir):
    (run_dir / 'eval').mkdir()
    pd.DataFrame({'model': ['vanilla', 'tweaked'], 'mean_error': [5.0, 4.25]}).to_csv(
        run_dir / 'eval' / 'summary.csv', index=False
    )
    (run_dir / 'run_config.yaml').write_text("seed: 3\ncluster:\n  k: 4\n  tap: FC5\naugment:\n  enabled: true\n")
    text = ReportExporter().render(run_dir)
    assert '- seed: 3' in text
    assert '- clusters: 4 at FC5' in text
    assert '- augmentation: on' in text
    assert '| vanilla' in text and '4.2500' in text
    assert 'Absent: run `facetweak eval`' not in text.split('## Error summary')[1].split('##')[0]


def test_report_is_byte_identical(run_dir, tmp_path):
    (run_dir / 'sweepk').mkdir()
    pd.DataFrame({'k': [1, 2], 'mean_error': [6.0, 5.5]}).to_csv(run_dir / 'sweepk' / 'sweepk.csv', index=False)
    first = emit_report(run_dir).read_bytes()
    first_html = (run_dir / 'report.html').read_bytes()
    second = emit_report(run_dir).read_bytes()
    assert first == second
    assert (run_dir / 'report.html').read_bytes() == first_html
    other = ReportExporter().export(run_dir, tmp_path / 'copy')
    assert other.read_bytes() == first
