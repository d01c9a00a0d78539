import numpy as np
import pandas as pd
from PIL import Image

from facetweak.exporters import plots


def _curves():
    thresholds = np.arange(0.0, 10.5, 0.5)
    return pd.concat([
        pd.DataFrame({'model': name, 'threshold': thresholds, 'fraction': np.clip(thresholds / scale, 0, 1)})
        for name, scale in (('vanilla', 10.0), ('tweaked', 8.0))
    ], ignore_index=True)


def test_error_curve_plot_is_reproducible(tmp_path):
    a = plots.plot_error_curves(_curves(), tmp_path / 'a.png')
    b = plots.plot_error_curves(_curves(), tmp_path / 'b.png')
    assert a.read_bytes() == b.read_bytes()
    with Image.open(a) as img:
        assert img.format == 'PNG'


def test_other_plots_write_pngs(tmp_path):
    variance = pd.DataFrame({
        'tap': ['input', 'input', 'FC5', 'FC5'],
        'landmark': ['left_eye', 'nose', 'left_eye', 'nose'],
        'mean_variance': [0.01, 0.02, 0.005, 0.004],
        'se': [0.001, 0.002, 0.001, 0.001],
    })
    per_cluster = pd.DataFrame({
        'cluster': [0, 1, 2], 'count': [4, 0, 3],
        'vanilla_error': [5.0, np.nan, 7.0], 'tweaked_error': [4.0, np.nan, 7.5],
    })
    scatter = pd.DataFrame({'cluster': [1, 1], 'face': [0, 0], 'landmark': ['left_eye', 'nose'],
                            'x': [0.3, 0.5], 'y': [0.4, 0.6]})
    written = [
        plots.plot_layer_variance(variance, 'landmark', tmp_path / 'v.png', 'variance'),
        plots.plot_cluster_bars(per_cluster, tmp_path / 'c.png'),
        plots.plot_sweep(pd.DataFrame({'k': [1, 2, 4], 'mean_error': [6.0, 5.0, 5.2]}), tmp_path / 's.png'),
        plots.plot_scatter({'input': scatter, 'FC5': scatter}, tmp_path / 'sc.png'),
    ]
    assert all(path.exists() and path.stat().st_size > 0 for path in written)
