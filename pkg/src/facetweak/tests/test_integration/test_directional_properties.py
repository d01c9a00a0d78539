"""
Seed-fixed runs on three well-separated pose modes, checking that each
stage moves the numbers the way the method relies on.
"""
import numpy as np
import pandas as pd
import pytest
from click.testing import CliRunner

from facetweak.cli import cli

pytestmark = pytest.mark.integration

CONFIG = (
    "seed: 7\n"
    "synth:\n  n: 360\n  modes: 3\n"
    "train:\n  epochs: 30\n  patience: 10\n  batch_size: 32\n  validation_fraction: 0.25\n"
    "cluster:\n  k: 3\n"
    "analysis:\n  k: 6\n  taps: [input, FC5]\n  scatter_faces: 5\n"
    "augment:\n  target: 120\n  retry_factor: 4\n  rejection_attempts: 60\n"
    "tweak:\n  epochs: 20\n  patience: 5\n"
    "eval:\n  threshold_step: 1.0\n"
    "sweep:\n  k_values: [1, 3]\n"
)


@pytest.fixture(scope='module')
def directional_run(tmp_path_factory):
    root = tmp_path_factory.mktemp("directional")
    config = root / "config.yaml"
    config.write_text(CONFIG)
    out = root / "run"
    result = CliRunner().invoke(cli, ['run', '--config', str(config), '--out', str(out), '--sweep'])
    assert result.exit_code == 0, result.output
    return out


def test_fc5_clusters_tighten_landmarks(directional_run):
    frame = pd.read_csv(directional_run / 'analyze' / 'landmark_variance.csv')
    spread = frame.groupby('tap')['mean_variance'].mean()
    drop = (spread['input'] - spread['FC5']) / spread['input']
    assert drop >= 0.2


def test_tweaking_helps_most_clusters(directional_run):
    per_cluster = pd.read_csv(directional_run / 'eval' / 'per_cluster.csv')
    populated = per_cluster[per_cluster['count'] > 0]
    assert len(populated) > 0
    not_worse = populated['verdict'].isin(['improved', 'unchanged']).mean()
    assert not_worse >= 0.6
    summary = pd.read_csv(directional_run / 'eval' / 'summary.csv').set_index('model')
    assert summary.loc['tweaked', 'mean_error'] < summary.loc['vanilla', 'mean_error']


def test_some_cluster_count_beats_a_single_head(directional_run):
    sweep = pd.read_csv(directional_run / 'sweepk' / 'sweepk.csv').set_index('k')
    single = sweep.loc[1, 'mean_error']
    assert sweep.loc[sweep.index > 1, 'mean_error'].min() < single


def test_same_cluster_sources_are_rejected_less_often(directional_run):
    rates = pd.read_csv(directional_run / 'tweak' / 'augmentation.csv')
    same = np.nanmean(rates['same_rejection_rate'])
    cross = np.nanmean(rates['cross_rejection_rate'])
    assert same < cross
