"""
Run configuration: dataclass defaults, merged with an optional YAML file and
then with command-line overrides (flags win).
"""
import dataclasses
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Union

import yaml

from .errors import ConfigError
from .netcore.layers import LayerSpec

logger = logging.getLogger(__name__)

TAP_NAMES = ('input', 'CL1', 'CL2', 'CL3', 'CL4', 'FC5')
HEAD_TAP_NAMES = ('CL4', 'FC5')
WARP_MODES = ('literal', 'aligned')


@dataclass
class SynthConfig:
    n: int = 4400
    modes: int = 3
    jitter: float = 1.0

    def validate(self) -> None:
        if self.n < 1:
            raise ConfigError(f"synth.n must be >= 1, got {self.n}")
        if self.modes < 1:
            raise ConfigError(f"synth.modes must be >= 1, got {self.modes}")
        if self.jitter < 0:
            raise ConfigError(f"synth.jitter must be >= 0, got {self.jitter}")


@dataclass
class DataConfig:
    """Dataset location; both unset means the run's own synthetic dataset."""
    annotations: Optional[str] = None
    image_root: Optional[str] = None

    def validate(self) -> None:
        if self.image_root is not None and self.annotations is None:
            raise ConfigError("data.image_root requires data.annotations")


@dataclass
class TrainConfig:
    epochs: int = 500
    batch_size: int = 64
    patience: int = 50
    validation_fraction: float = 0.1
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8

    def validate(self) -> None:
        if self.patience < 1:
            raise ConfigError(f"train.patience must be >= 1, got {self.patience}")
        if not 0.0 < self.validation_fraction < 1.0:
            raise ConfigError(
                f"train.validation_fraction must lie in (0, 1), got {self.validation_fraction}"
            )
        if self.epochs < 1 or self.batch_size < 1:
            raise ConfigError("train.epochs and train.batch_size must be >= 1")
        if self.lr <= 0 or not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1) or self.epsilon <= 0:
            raise ConfigError("Adam hyperparameters out of range")


@dataclass
class ClusterConfig:
    k: int = 8
    tap: str = 'FC5'
    max_iter: int = 300
    tol: float = 1e-7

    def validate(self) -> None:
        if self.k < 1:
            raise ConfigError(f"cluster.k must be >= 1, got {self.k}")
        if self.tap not in TAP_NAMES:
            raise ConfigError(f"cluster.tap must be one of {', '.join(TAP_NAMES)}, got {self.tap!r}")
        if self.max_iter < 1 or self.tol <= 0:
            raise ConfigError("cluster.max_iter must be >= 1 and cluster.tol > 0")


@dataclass
class AnalysisConfig:
    k: int = 16
    taps: List[str] = field(default_factory=lambda: ['input', 'CL2', 'CL3', 'CL4', 'FC5'])
    scatter_faces: int = 15

    def validate(self) -> None:
        if self.k < 1:
            raise ConfigError(f"analysis.k must be >= 1, got {self.k}")
        unknown = [t for t in self.taps if t not in TAP_NAMES]
        if unknown or not self.taps:
            raise ConfigError(f"analysis.taps must name taps from {', '.join(TAP_NAMES)}")
        if self.scatter_faces < 1:
            raise ConfigError("analysis.scatter_faces must be >= 1")


@dataclass
class AugmentConfig:
    enabled: bool = True
    target: int = 600
    retry_factor: int = 20
    warp_mode: str = 'literal'
    candidate_batch: int = 64
    rejection_attempts: int = 200

    def validate(self) -> None:
        if self.target < 0 or self.retry_factor < 1 or self.candidate_batch < 1:
            raise ConfigError("augment.target must be >= 0; retry_factor and candidate_batch >= 1")
        if self.warp_mode not in WARP_MODES:
            raise ConfigError(f"augment.warp_mode must be one of {', '.join(WARP_MODES)}")
        if self.rejection_attempts < 0:
            raise ConfigError("augment.rejection_attempts must be >= 0")

    @property
    def retry_cap(self) -> int:
        return self.retry_factor * self.target


@dataclass
class TweakConfig:
    patience: int = 50
    epochs: int = 500
    lr_scale: float = 0.1
    batch_size: int = 64
    validation_fraction: float = 0.1

    def validate(self) -> None:
        if self.patience < 0:
            raise ConfigError(f"tweak.patience must be >= 0, got {self.patience}")
        if self.epochs < 0 or self.batch_size < 1 or self.lr_scale <= 0:
            raise ConfigError("tweak.epochs >= 0, tweak.batch_size >= 1 and tweak.lr_scale > 0 required")
        if not 0.0 < self.validation_fraction < 1.0:
            raise ConfigError("tweak.validation_fraction must lie in (0, 1)")


@dataclass
class EvalConfig:
    threshold_max: float = 30.0
    threshold_step: float = 0.5
    mirror: bool = True
    annotations: Optional[str] = None

    def validate(self) -> None:
        if self.threshold_step <= 0 or self.threshold_max <= 0:
            raise ConfigError("eval thresholds must be positive")

    def thresholds(self) -> List[float]:
        count = int(round(self.threshold_max / self.threshold_step))
        return [round(i * self.threshold_step, 10) for i in range(count + 1)]


@dataclass
class SweepConfig:
    k_values: List[int] = field(default_factory=lambda: [1, 4, 8])

    def validate(self) -> None:
        if not self.k_values or any(int(k) < 1 for k in self.k_values):
            raise ConfigError("sweep.k_values must be a non-empty list of integers >= 1")


_SECTIONS = {
    'synth': SynthConfig,
    'data': DataConfig,
    'train': TrainConfig,
    'cluster': ClusterConfig,
    'analysis': AnalysisConfig,
    'augment': AugmentConfig,
    'tweak': TweakConfig,
    'eval': EvalConfig,
    'sweep': SweepConfig,
}


@dataclass
class RunConfig:
    """Everything needed to replay a run."""
    seed: int = 0
    jobs: int = 1
    out: str = 'run'
    architecture: Optional[List[Dict[str, Any]]] = None
    synth: SynthConfig = field(default_factory=SynthConfig)
    data: DataConfig = field(default_factory=DataConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    cluster: ClusterConfig = field(default_factory=ClusterConfig)
    analysis: AnalysisConfig = field(default_factory=AnalysisConfig)
    augment: AugmentConfig = field(default_factory=AugmentConfig)
    tweak: TweakConfig = field(default_factory=TweakConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)
    sweep: SweepConfig = field(default_factory=SweepConfig)

    def validate(self) -> None:
        if self.jobs < 1:
            raise ConfigError(f"jobs must be >= 1, got {self.jobs}")
        for name in _SECTIONS:
            getattr(self, name).validate()
        if self.architecture is not None:
            for entry in self.architecture:
                LayerSpec.from_dict(entry)

    def layer_specs(self):
        """Architecture as LayerSpecs, or None for the default stack."""
        if self.architecture is None:
            return None
        return [LayerSpec.from_dict(entry) for entry in self.architecture]

    def to_dict(self) -> Dict[str, Any]:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> 'RunConfig':
        config = cls()
        merge_into(config, data)
        return config

    def save(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, 'w', encoding='utf-8', newline='\n') as f:
            yaml.safe_dump(self.to_dict(), f, sort_keys=True, default_flow_style=False)
        return path


def _set_fields(target, values: Mapping[str, Any], where: str) -> None:
    names = {f.name for f in dataclasses.fields(target)}
    for key, value in values.items():
        if key not in names:
            raise ConfigError(f"Unknown configuration key: {where}{key}")
        setattr(target, key, value)


def merge_into(config: RunConfig, data: Mapping[str, Any]) -> RunConfig:
    """Overlay a nested mapping onto ``config``; unknown keys are errors."""
    if not isinstance(data, Mapping):
        raise ConfigError("Configuration must be a mapping")
    for key, value in data.items():
        if key in _SECTIONS:
            if value is None:
                continue
            if not isinstance(value, Mapping):
                raise ConfigError(f"Configuration section {key!r} must be a mapping")
            _set_fields(getattr(config, key), value, f"{key}.")
        else:
            _set_fields(config, {key: value}, '')
    return config


def load_config(
    path: Optional[Union[str, Path]] = None, overrides: Optional[Mapping[str, Any]] = None
) -> RunConfig:
    """
    Build the effective configuration.

    Args:
        path: Optional YAML file
        overrides: Flat mapping of dotted keys (``'train.epochs'``) or top-level
            keys (``'seed'``); ``None`` values are ignored

    Returns:
        RunConfig: Validated configuration

    Raises:
        ConfigError: unreadable file, unknown key or invalid value
    """
    config = RunConfig()
    if path is not None:
        try:
            with open(path, 'r', encoding='utf-8') as f:
                data = yaml.safe_load(f) or {}
        except (OSError, yaml.YAMLError) as e:
            raise ConfigError(f"Cannot read configuration {path}: {e}") from e
        merge_into(config, data)
        logger.debug(f"Loaded configuration from {path}")

    nested: Dict[str, Any] = {}
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if '.' in key:
            section, name = key.split('.', 1)
            nested.setdefault(section, {})[name] = value
        else:
            nested[key] = value
    merge_into(config, nested)
    config.validate()
    return config
