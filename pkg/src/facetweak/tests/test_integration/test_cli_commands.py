import pytest

from facetweak.cli import cli

pytestmark = pytest.mark.integration


def test_help(runner):
    result = runner.invoke(cli, ['--help'])
    assert result.exit_code == 0
    for command in ['synth', 'train', 'cluster', 'analyze', 'tweak', 'predict', 'eval', 'sweepk', 'report', 'run']:
        assert command in result.output


def test_synth_command(runner, tmp_path):
    out = tmp_path / "run"
    result = runner.invoke(cli, ['synth', '--n', '6', '--modes', '2', '--out', str(out), '--seed', '3'])
    assert result.exit_code == 0, result.output
    assert len((out / 'synth' / 'annotations.txt').read_text().splitlines()) == 6
    assert (out / 'run_config.yaml').exists()


def test_invalid_option_value_is_a_usage_error(runner, tmp_path):
    result = runner.invoke(cli, ['synth', '--modes', '0', '--out', str(tmp_path / "run")])
    assert result.exit_code == 1
    assert 'synth.modes' in result.output


def test_unknown_config_key(runner, tmp_path):
    config = tmp_path / "bad.yaml"
    config.write_text("train:\n  epochz: 3\n")
    result = runner.invoke(cli, ['synth', '--config', str(config), '--out', str(tmp_path / "run")])
    assert result.exit_code == 1
    assert 'train.epochz' in result.output


def test_missing_upstream_artifact(runner, tmp_path):
    result = runner.invoke(cli, ['train', '--out', str(tmp_path / "empty")])
    assert result.exit_code == 2
    assert 'facetweak synth' in result.output


def test_tweak_needs_a_router(runner, tmp_path, tiny_config_file):
    out = tmp_path / "run"
    for command in ['synth', 'train']:
        result = runner.invoke(cli, [command, '--config', str(tiny_config_file), '--out', str(out)])
        assert result.exit_code == 0, result.output
    result = runner.invoke(cli, ['tweak', '--config', str(tiny_config_file), '--out', str(out)])
    assert result.exit_code == 2
    assert 'facetweak cluster' in result.output


def test_missing_annotation_file(runner, tmp_path):
    result = runner.invoke(cli, ['train', '--annotations', str(tmp_path / "none.txt"), '--out', str(tmp_path / "run")])
    assert result.exit_code == 2


def test_report_on_an_empty_run(runner, tmp_path):
    out = tmp_path / "run"
    result = runner.invoke(cli, ['report', '--out', str(out)])
    assert result.exit_code == 0, result.output
    assert (out / 'report.md').exists()
