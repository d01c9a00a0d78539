"""
Pipeline stages over a run directory.

Each stage reads what earlier stages left in the run directory, writes its
own subdirectory and fails with ``MissingArtifactError`` naming the command
to run first when an input is missing::

    synth -> train -> cluster -> analyze
                            \\-> tweak -> eval -> report
                                      \\-> predict
                     train -> sweepk
"""
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from .analyzers.cluster_analyzer import ClusterAnalyzer, landmark_spread_drop
from .analyzers.cluster_images import mean_cluster_images, save_image
from .clustering.gmm import GmmModel, fit as fit_gmm
from .config import RunConfig
from .dataio.annotations import AnnotationParser
from .dataio.dataset import LandmarkDataset, LoadResult, load_dataset, read_rgb
from .dataio.mirror import mirror_landmark_array, mirror_normalized
from .dataio.preprocess import CROP_SIZE, crop_and_resize
from .dataio.synth import ANNOTATION_NAME, synth_generate, write_synthetic_dataset
from .errors import DataError, MissingArtifactError
from .exporters import plots
from .exporters.csv_exporter import CSVExporter
from .exporters.json_exporter import JSONExporter
from .exporters.report_exporter import emit_report
from .model.network import NetworkModel
from .model.trainer import train_vanilla
from .scoring.comparison import ModelComparator
from .scoring.metrics import ErrorMetrics, error_rates
from .tweak.tweaked_model import TweakBuilder, TweakedModel
from .utils.file_utils import ensure_dir, write_text
from .utils.seeding import stream

logger = logging.getLogger(__name__)

CONFIG_NAME = 'run_config.yaml'
VANILLA = 'train/vanilla.ftw'
SPLIT = 'train/split.json'
ROUTER = 'cluster/router.ftw'
TWEAKED = 'tweak/model'


def predict_points(model, images: np.ndarray, mirror: bool = False) -> np.ndarray:
    """``N×m×2`` vanilla predictions, optionally averaged with mirrored inputs."""
    n = len(images)
    points = model.predict_batch(images).reshape(n, -1, 2)
    if mirror:
        flipped = model.predict_batch(mirror_normalized(images, model.stats)).reshape(n, -1, 2)
        points = 0.5 * (points + mirror_landmark_array(flipped))
    return points


@dataclass
class EvalSet:
    """Faces to evaluate on, plus detector misses counted as failures."""
    dataset: LandmarkDataset
    failures: int
    source: str


class Pipeline:
    """Runs the stages of one experiment inside ``config.out``."""

    def __init__(self, config: RunConfig):
        config.validate()
        self.config = config
        self.out = Path(config.out)
        self.csv = CSVExporter()
        self.json = JSONExporter()
        self.logger = logging.getLogger(__name__)

    # ------------------------------------------------------------ plumbing

    def path(self, rel: str) -> Path:
        return self.out / rel

    def require(self, rel: str, command: str) -> Path:
        path = self.path(rel)
        if not path.exists():
            raise MissingArtifactError(path, command)
        return path

    def write_config(self) -> Path:
        return self.config.save(self.path(CONFIG_NAME))

    def annotation_source(self) -> Tuple[Path, Optional[Path]]:
        data = self.config.data
        if data.annotations is not None:
            path = Path(data.annotations)
            if not path.exists():
                raise DataError(f"Annotation file not found: {path}")
            return path, Path(data.image_root) if data.image_root else None
        return self.require(f"synth/{ANNOTATION_NAME}", 'synth'), None

    def load_data(self, stats=None, split=None) -> LoadResult:
        annotations, root = self.annotation_source()
        return load_dataset(
            annotations, root, stats=stats,
            validation_fraction=self.config.train.validation_fraction,
            seed=self.config.seed, split=split, jobs=self.config.jobs,
        )

    def load_vanilla(self) -> NetworkModel:
        return NetworkModel.load(self.require(VANILLA, 'train'))

    def load_split(self) -> Tuple[np.ndarray, np.ndarray]:
        split = JSONExporter.load(self.require(SPLIT, 'train'))
        return np.asarray(split['train'], dtype=np.int64), np.asarray(split['val'], dtype=np.int64)

    def load_trained_data(self) -> Tuple[NetworkModel, LoadResult]:
        """Vanilla model and the dataset normalized and split as it was during training."""
        model = self.load_vanilla()
        return model, self.load_data(stats=model.stats, split=self.load_split())

    def eval_set(self, model: NetworkModel, data: Optional[LoadResult] = None) -> EvalSet:
        cfg = self.config.eval
        if cfg.annotations is not None:
            result = load_dataset(cfg.annotations, stats=model.stats, evaluate_all=True, jobs=self.config.jobs)
            return EvalSet(result.dataset, len(result.failures), str(cfg.annotations))
        if data is None:
            _, data = self.load_trained_data()
        return EvalSet(data.val, len(data.failures), 'validation split')

    # ------------------------------------------------------------ stages

    def synth(self) -> Dict:
        cfg = self.config.synth
        self.write_config()
        faces = synth_generate(cfg.n, cfg.modes, self.config.seed, jitter=cfg.jitter)
        return write_synthetic_dataset(faces, self.path('synth'), self.config.seed, cfg.modes, cfg.jitter)

    def train(self) -> NetworkModel:
        self.write_config()
        data = self.load_data()
        specs = self.config.layer_specs()
        start = NetworkModel(specs, rng=stream(self.config.seed, 'init')) if specs else None
        model, log = train_vanilla(data.dataset, self.config.train, self.config.seed, model=start, split=data.split)
        out = ensure_dir(self.path('train'))
        model.save(out / 'vanilla.ftw')
        log.save(out / 'train_log.csv')
        self.json.export(
            {'train': [int(i) for i in data.train_indices], 'val': [int(i) for i in data.val_indices]},
            str(out / 'split.json'),
        )
        return model

    def cluster(self) -> GmmModel:
        cfg = self.config.cluster
        self.write_config()
        model, data = self.load_trained_data()
        train = data.train
        features = model.extract_features_batch(train.images, tap=cfg.tap)
        result = fit_gmm(
            features, cfg.k, seed=self.config.seed, tap=cfg.tap,
            max_iter=cfg.max_iter, tol=cfg.tol, jobs=self.config.jobs,
        )
        out = ensure_dir(self.path('cluster'))
        result.model.save(out / 'router.ftw')
        labels, posteriors = result.model.assign_many(features)
        rows = pd.DataFrame({
            'index': data.train_indices,
            'path': train.paths,
            'cluster': labels,
            'posterior': posteriors.max(axis=1),
        })
        if train.modes is not None:
            rows['mode'] = train.modes
        self.csv.export(rows, out / 'assignments.csv')
        self.csv.export(
            [{'iteration': i, 'log_likelihood': ll} for i, ll in enumerate(result.trace)], out / 'em_trace.csv'
        )
        return result.model

    def analyze(self):
        cfg = self.config.analysis
        self.write_config()
        model, data = self.load_trained_data()
        train = data.train
        analyzer = ClusterAnalyzer(
            k=cfg.k, seed=self.config.seed, max_iter=self.config.cluster.max_iter,
            tol=self.config.cluster.tol, scatter_faces=cfg.scatter_faces, jobs=self.config.jobs,
        )
        report = analyzer.analyze(model, train, cfg.taps)
        out = ensure_dir(self.path('analyze'))
        self.csv.export(report.sizes_frame(), out / 'cluster_sizes.csv')
        self.csv.export(report.size_summary_frame(), out / 'size_summary.csv')
        landmark = report.landmark_frame()
        self.csv.export(landmark, out / 'landmark_variance.csv')
        plots.plot_layer_variance(landmark, 'landmark', out / 'landmark_variance.png', 'Principal-axis variance')
        attribute = report.attribute_frame()
        if len(attribute):
            self.csv.export(attribute, out / 'attribute_variance.csv')
            plots.plot_layer_variance(attribute, 'attribute', out / 'attribute_variance.png', 'Attribute variance')
        for tap, frame in report.scatter.items():
            self.csv.export(frame, out / f"scatter_{tap}.csv")
        if report.scatter:
            plots.plot_scatter(report.scatter, out / 'scatter.png')

        raw = model.stats.denormalize(train.images) if model.stats is not None else train.images
        for tap, layer in report.layers.items():
            order = np.argsort(-layer.sizes, kind='stable')
            save_image(mean_cluster_images(raw, layer.assignments, layer.k, order), out / f"cluster_means_{tap}.png")
        drop = landmark_spread_drop(report)
        if drop is not None:
            self.logger.info(f"Mean landmark variance drops {drop:.1%} from input to FC5 clusters")
        return report

    def _builder(self) -> TweakBuilder:
        cfg = self.config
        return TweakBuilder(cfg.tweak, cfg.augment, cfg.train, cfg.cluster, cfg.seed, cfg.jobs)

    def tweak(self) -> TweakedModel:
        self.write_config()
        model, data = self.load_trained_data()
        router = GmmModel.load(self.require(ROUTER, 'cluster'))
        tweaked = self._builder().build(model, data.train, router=router)
        out = ensure_dir(self.path('tweak'))
        tweaked.save(out / 'model')
        self.csv.export([r.to_row() for r in tweaked.reports], out / 'heads.csv')
        for report in tweaked.reports:
            if report.log is not None:
                report.log.save(out / 'head_logs' / f"head_{report.cluster:03d}.csv")
        rows = []
        for report in tweaked.reports:
            row = report.augmentation.to_row() if report.augmentation else {'cluster': report.cluster}
            for check in report.rejection_checks:
                row[f"{check.source}_rejection_rate"] = check.rejection_rate
            rows.append(row)
        if any(len(r) > 1 for r in rows):
            self.csv.export(rows, out / 'augmentation.csv')
        return tweaked

    def _evaluate(self, vanilla: NetworkModel, tweaked: TweakedModel, test: EvalSet) -> Dict:
        mirror = self.config.eval.mirror
        images, truth = test.dataset.images, test.dataset.landmarks
        vanilla_err = error_rates(predict_points(vanilla, images, mirror), truth)
        tweaked_pts, clusters = tweaked.predict_batch(images, mirror=mirror)
        tweaked_err = error_rates(tweaked_pts, truth)
        return {'vanilla': vanilla_err, 'tweaked': tweaked_err, 'clusters': clusters}

    def evaluate(self) -> pd.DataFrame:
        self.write_config()
        vanilla = self.load_vanilla()
        self.require(f"{TWEAKED}/manifest.json", 'tweak')
        tweaked = TweakedModel.load(self.path(TWEAKED))
        test = self.eval_set(vanilla)
        result = self._evaluate(vanilla, tweaked, test)
        out = ensure_dir(self.path('eval'))

        self.csv.export(pd.DataFrame({
            'path': test.dataset.paths,
            'cluster': result['clusters'],
            'vanilla_error': result['vanilla'],
            'tweaked_error': result['tweaked'],
        }), out / 'per_image.csv')

        comparator = ModelComparator()
        comparisons = comparator.compare(result['vanilla'], result['tweaked'], result['clusters'], tweaked.k)
        per_cluster = comparator.to_frame(comparisons)
        self.csv.export(per_cluster, out / 'per_cluster.csv')
        comparator.summarize(comparisons)

        metrics = ErrorMetrics(self.config.eval.thresholds())
        curves = {
            'vanilla': metrics.curve(result['vanilla'], test.failures),
            'tweaked': metrics.curve(result['tweaked'], test.failures),
        }
        curve_frame = metrics.curves_frame(curves)
        self.csv.export(curve_frame, out / 'curves.csv')
        summary = pd.DataFrame([
            metrics.summary(label, result[label], test.failures) for label in ('vanilla', 'tweaked')
        ])
        self.csv.export(summary, out / 'summary.csv')
        plots.plot_error_curves(curve_frame, out / 'curves.png')
        plots.plot_cluster_bars(per_cluster, out / 'per_cluster.png')
        self.logger.info(f"Evaluated on {len(test.dataset)} faces from the {test.source}")
        return summary

    def predict(self, inputs: Sequence[Union[str, Path]], use_vanilla: bool = False) -> Path:
        """
        Predict landmarks for image files and/or annotation files.

        Image files are used whole; annotation files contribute one crop per
        detected face. Output lines are ``path x1 y1 ... xm ym`` in
        box-normalized coordinates.
        """
        self.write_config()
        vanilla = self.load_vanilla()
        model = None
        if not use_vanilla:
            self.require(f"{TWEAKED}/manifest.json", 'tweak')
            model = TweakedModel.load(self.path(TWEAKED))
        paths, crops = self._collect_inputs(inputs)
        if not crops:
            raise DataError("No faces to predict")
        images = vanilla.stats.normalize(np.stack(crops)) if vanilla.stats is not None else np.stack(crops)
        mirror = self.config.eval.mirror
        if model is None:
            points = predict_points(vanilla, images, mirror)
        else:
            points, _ = model.predict_batch(images, mirror=mirror)
        lines = [' '.join([p] + [f"{v:.6f}" for v in pts.reshape(-1)]) for p, pts in zip(paths, points)]
        out = write_text(self.path('predict/predictions.txt'), '\n'.join(lines) + '\n')
        self.logger.info(f"Wrote {len(lines)} predictions to {out}")
        return out

    def _collect_inputs(self, inputs) -> Tuple[List[str], List[np.ndarray]]:
        parser = AnnotationParser()
        paths, crops = [], []
        for item in inputs:
            item = Path(item)
            if not item.exists():
                raise DataError(f"Input not found: {item}")
            if parser.is_annotation_file(item.name):
                for record in parser.parse(item):
                    if record.is_failure:
                        self.logger.warning(f"{item.name}:{record.line_number}: detector failure, no prediction")
                        continue
                    pixels = read_rgb(item.parent / record.image_path)
                    paths.append(record.image_path)
                    crops.append(crop_and_resize(pixels, record.box, CROP_SIZE))
            else:
                pixels = read_rgb(item)
                h, w = pixels.shape[:2]
                paths.append(str(item))
                crops.append(crop_and_resize(pixels, (0.0, 0.0, float(w), float(h)), CROP_SIZE))
        return paths, crops

    def sweepk(self) -> pd.DataFrame:
        self.write_config()
        model, data = self.load_trained_data()
        test = self.eval_set(model, data)
        builder = self._builder()
        rows = []
        for k in self.config.sweep.k_values:
            tweaked = builder.build(model, data.train, k=int(k))
            result = self._evaluate(model, tweaked, test)
            epochs = np.array([r.epochs_run for r in tweaked.reports], dtype=np.float64)
            rows.append({
                'k': int(k),
                'mean_error': float(np.mean(result['tweaked'])),
                'vanilla_error': float(np.mean(result['vanilla'])),
                'total_epochs': int(epochs.sum()),
                'mean_epochs': float(epochs.mean()),
                'sd_epochs': float(epochs.std()),
                'fallback_heads': int(sum(r.fallback for r in tweaked.reports)),
            })
            self.logger.info(f"K={k}: mean error {rows[-1]['mean_error']:.3f}%")
        frame = pd.DataFrame(rows)
        out = ensure_dir(self.path('sweepk'))
        self.csv.export(frame, out / 'sweepk.csv')
        plots.plot_sweep(frame, out / 'sweepk.png')
        return frame

    def report(self) -> Path:
        return emit_report(self.out)
