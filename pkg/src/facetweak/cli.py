import functools
import logging
import sys
from typing import Dict, Optional, Tuple

import click
from tabulate import tabulate

from . import __version__
from .config import TAP_NAMES, WARP_MODES, load_config
from .errors import ConfigError, DataError, FacetweakError, NumericalError
from .pipeline import Pipeline

# Set up logging
logging.basicConfig(
    level=logging.INFO,
    format='%(asctime)s - %(levelname)s - %(message)s'
)
logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERICAL = 3


def exit_code_for(error: Exception) -> int:
    """Exit status for an error raised by a command."""
    if isinstance(error, NumericalError):
        return EXIT_NUMERICAL
    if isinstance(error, DataError):
        return EXIT_DATA
    return EXIT_USAGE


class FacetweakGroup(click.Group):
    """Click group mapping usage, configuration, data and numerical errors to exit codes 1, 1, 2 and 3."""

    def main(self, args=None, prog_name=None, complete_var=None, standalone_mode=True, **extra):
        try:
            rv = super().main(args, prog_name, complete_var, standalone_mode=False, **extra)
        except click.UsageError as e:
            e.show()
            sys.exit(EXIT_USAGE)
        except click.ClickException as e:
            e.show()
            sys.exit(e.exit_code)
        except click.Abort:
            click.echo('Aborted!', err=True)
            sys.exit(EXIT_USAGE)
        except FacetweakError as e:
            click.echo(f"Error: {e}", err=True)
            sys.exit(exit_code_for(e))
        if not standalone_mode:
            return rv
        sys.exit(rv if isinstance(rv, int) else EXIT_OK)


def common_options(fn):
    """``--config``, ``--out``, ``--seed``, ``--jobs`` and ``--verbose`` for every command."""
    @click.option('--config', 'config_path', type=click.Path(dir_okay=False), help='YAML configuration file')
    @click.option('--out', type=click.Path(file_okay=False), help='Run directory (default: run)')
    @click.option('--seed', type=int, help='Run seed (default: 0)')
    @click.option('--jobs', type=int, help='Worker threads (default: 1)')
    @click.option('--verbose', '-v', is_flag=True, help='Enable verbose output')
    @functools.wraps(fn)
    def wrapper(config_path, out, seed, jobs, verbose, **kwargs):
        if verbose:
            logging.getLogger().setLevel(logging.DEBUG)
        common = {'out': out, 'seed': seed, 'jobs': jobs}
        return fn(config_path, common, **kwargs)
    return wrapper


def _pipeline(config_path: Optional[str], common: Dict, **overrides) -> Pipeline:
    return Pipeline(load_config(config_path, {**common, **overrides}))


def _csv_list(value: Optional[str], cast=str):
    if value is None:
        return None
    try:
        return [cast(v.strip()) for v in value.split(',') if v.strip()]
    except ValueError as e:
        raise ConfigError(f"Cannot parse list {value!r}: {e}") from e


@click.group(cls=FacetweakGroup)
@click.version_option(version=__version__)
def cli():
    """facetweak - facial landmark regression with per-cluster tweaked heads."""
    pass


@cli.command()
@common_options
@click.option('--n', type=int, help='Number of faces')
@click.option('--modes', type=int, help='Number of pose modes')
@click.option('--jitter', type=float, help='Within-mode pose noise scale')
def synth(config_path, common, n, modes, jitter):
    """Generate the synthetic multi-pose face dataset."""
    pipeline = _pipeline(config_path, common, **{'synth.n': n, 'synth.modes': modes, 'synth.jitter': jitter})
    manifest = pipeline.synth()
    click.echo(f"Wrote {manifest['count']} faces to {pipeline.path('synth')} (checksum {manifest['checksum'][:12]})")


@cli.command()
@common_options
@click.option('--annotations', type=click.Path(dir_okay=False), help='Annotation file (default: the run\'s synthetic data)')
@click.option('--image-root', type=click.Path(file_okay=False), help='Directory image paths are relative to')
@click.option('--epochs', type=int, help='Epoch cap')
@click.option('--patience', type=int, help='Early-stopping patience')
@click.option('--batch-size', type=int, help='Mini-batch size')
@click.option('--lr', type=float, help='Adam learning rate')
def train(config_path, common, annotations, image_root, epochs, patience, batch_size, lr):
    """Train the vanilla network."""
    pipeline = _pipeline(config_path, common, **{
        'data.annotations': annotations, 'data.image_root': image_root, 'train.epochs': epochs,
        'train.patience': patience, 'train.batch_size': batch_size, 'train.lr': lr,
    })
    pipeline.train()
    click.echo(f"Vanilla model written to {pipeline.path('train/vanilla.ftw')}")


@cli.command()
@common_options
@click.option('--k', type=int, help='Number of clusters')
@click.option('--tap', type=click.Choice(TAP_NAMES), help='Layer whose input is clustered')
def cluster(config_path, common, k, tap):
    """Fit the routing mixture on the trained network's features."""
    pipeline = _pipeline(config_path, common, **{'cluster.k': k, 'cluster.tap': tap})
    router = pipeline.cluster()
    click.echo(f"Router with {router.k} clusters at {router.tap} written to {pipeline.path('cluster')}")


@cli.command()
@common_options
@click.option('--k', type=int, help='Clusters per layer')
@click.option('--taps', help='Comma-separated taps, e.g. input,CL2,CL3,CL4,FC5')
def analyze(config_path, common, k, taps):
    """Cluster statistics per layer: sizes, landmark and attribute variance, mean images."""
    pipeline = _pipeline(config_path, common, **{'analysis.k': k, 'analysis.taps': _csv_list(taps)})
    report = pipeline.analyze()
    click.echo(tabulate(report.size_summary_frame(), headers='keys', tablefmt='simple', showindex=False))


@cli.command()
@common_options
@click.option('--patience', type=int, help='Per-head early-stopping patience')
@click.option('--epochs', type=int, help='Per-head epoch cap')
@click.option('--target', type=int, help='Augmented samples per cluster')
@click.option('--augment/--no-augment', default=None, help='Alignment-sensitive augmentation')
@click.option('--warp-mode', type=click.Choice(WARP_MODES), help='Warp direction for augmentation')
def tweak(config_path, common, patience, epochs, target, augment, warp_mode):
    """Fine-tune one head per cluster over the frozen trunk."""
    pipeline = _pipeline(config_path, common, **{
        'tweak.patience': patience, 'tweak.epochs': epochs, 'augment.target': target,
        'augment.enabled': augment, 'augment.warp_mode': warp_mode,
    })
    model = pipeline.tweak()
    fallbacks = sum(r.fallback for r in model.reports)
    click.echo(f"Tweaked {model.k} heads from {model.tap} ({fallbacks} kept vanilla weights)")


@cli.command()
@common_options
@click.argument('inputs', nargs=-1, required=True, type=click.Path())
@click.option('--vanilla', 'use_vanilla', is_flag=True, help='Use the vanilla network instead of the tweaked model')
@click.option('--mirror/--no-mirror', default=None, help='Average with the mirrored prediction')
def predict(config_path, common, inputs: Tuple[str, ...], use_vanilla, mirror):
    """Predict landmarks for images or annotation files."""
    pipeline = _pipeline(config_path, common, **{'eval.mirror': mirror})
    path = pipeline.predict(inputs, use_vanilla=use_vanilla)
    click.echo(f"Predictions written to {path}")


@cli.command(name='eval')
@common_options
@click.option('--annotations', type=click.Path(dir_okay=False), help='External test annotation file')
@click.option('--mirror/--no-mirror', default=None, help='Average with the mirrored prediction')
def evaluate(config_path, common, annotations, mirror):
    """Compare vanilla and tweaked errors."""
    pipeline = _pipeline(config_path, common, **{'eval.annotations': annotations, 'eval.mirror': mirror})
    summary = pipeline.evaluate()
    _display_summary("Evaluation Summary", summary)


@cli.command()
@common_options
@click.option('--k-values', help='Comma-separated cluster counts, e.g. 1,4,8')
def sweepk(config_path, common, k_values):
    """Tweak and evaluate for several cluster counts."""
    pipeline = _pipeline(config_path, common, **{'sweep.k_values': _csv_list(k_values, int)})
    frame = pipeline.sweepk()
    _display_summary("Cluster Sweep", frame)


@cli.command()
@common_options
def report(config_path, common):
    """Collate the run's tables and figures into report.md and report.html."""
    pipeline = _pipeline(config_path, common)
    path = pipeline.report()
    click.echo(f"Report written to {path}")


@cli.command()
@common_options
@click.option('--sweep/--no-sweep', default=False, help='Also run the cluster-count sweep')
def run(config_path, common, sweep):
    """Run every stage in order: synth (unless data is given), train, cluster, analyze, tweak, eval, report."""
    pipeline = _pipeline(config_path, common)
    if pipeline.config.data.annotations is None:
        pipeline.synth()
    pipeline.train()
    pipeline.cluster()
    pipeline.analyze()
    pipeline.tweak()
    summary = pipeline.evaluate()
    if sweep:
        pipeline.sweepk()
    pipeline.report()
    _display_summary("Evaluation Summary", summary)


def _display_summary(title: str, frame):
    """Display a table summary."""
    click.echo(f"\n{title}:")
    click.echo("=" * (len(title) + 1))
    click.echo(tabulate(frame, headers='keys', tablefmt='simple', showindex=False, floatfmt='.3f'))


if __name__ == '__main__':
    cli()
