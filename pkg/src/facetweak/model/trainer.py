"""
Mini-batch Adam training with validation-based early stopping.

The same loop trains the vanilla network (from layer 0) and the per-cluster
heads (from the tap layer, on cached trunk features).
"""
import copy
import logging
import time
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from ..config import TrainConfig
from ..errors import ConfigError, DataError, DivergenceError
from ..netcore.adam import AdamState, adam_step
from ..netcore.layers import Params
from ..utils.seeding import stream
from .landmarks import batch_loss
from .network import INFERENCE_CHUNK, NetworkModel, default_architecture

logger = logging.getLogger(__name__)

DIVERGENCE_LIMIT = 1e6


def split_indices(
    n: int, validation_fraction: float, rng: np.random.Generator, min_val: int = 1
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Random train/validation partition of ``range(n)``.

    Args:
        n: Number of items
        validation_fraction: Share of items held out
        rng: Generator driving the permutation
        min_val: Smallest validation size when ``n`` allows it

    Returns:
        (sorted train indices, sorted validation indices)
    """
    if not 0.0 < validation_fraction < 1.0:
        raise ConfigError(f"validation_fraction must lie in (0, 1), got {validation_fraction}")
    n_val = max(min_val, int(round(n * validation_fraction)))
    n_val = min(n_val, max(n - 1, 0))
    perm = rng.permutation(n)
    return np.sort(perm[n_val:]), np.sort(perm[:n_val])


class TrainingLog:
    """Per-epoch losses; epoch 0 evaluates the starting weights."""

    COLUMNS = ['epoch', 'train_loss', 'val_loss', 'wall_time']

    def __init__(self):
        self.rows: List[dict] = []

    def append(self, epoch: int, train_loss: float, val_loss: float, wall_time: float) -> None:
        self.rows.append({
            'epoch': int(epoch),
            'train_loss': float(train_loss),
            'val_loss': float(val_loss),
            'wall_time': float(wall_time),
        })

    def __len__(self) -> int:
        return len(self.rows)

    @property
    def best_epoch(self) -> int:
        losses = [r['val_loss'] for r in self.rows]
        return int(self.rows[int(np.argmin(losses))]['epoch']) if losses else -1

    @property
    def last_epoch(self) -> int:
        return self.rows[-1]['epoch'] if self.rows else -1

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.rows, columns=self.COLUMNS)

    def save(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        self.to_frame().to_csv(path, index=False)
        return path

    @classmethod
    def load(cls, path: Union[str, Path]) -> 'TrainingLog':
        log = cls()
        for row in pd.read_csv(path).to_dict('records'):
            log.append(row['epoch'], row['train_loss'], row['val_loss'], row['wall_time'])
        return log


@dataclass
class EarlyStoppingResult:
    params: List[Params]
    best_epoch: int
    best_val_loss: float
    epochs_run: int
    log: TrainingLog


def _flatten(params: Sequence[Params]) -> List[np.ndarray]:
    return [p[k] for p in params for k in sorted(p)]


def _unflatten(template: Sequence[Params], arrays: Sequence[np.ndarray]) -> List[Params]:
    out, i = [], 0
    for p in template:
        layer = {}
        for k in sorted(p):
            layer[k] = arrays[i]
            i += 1
        out.append(layer)
    return out


class EarlyStoppingLoop:
    """
    Train the layers ``start..end`` of a model, keeping the weights with the
    lowest validation loss.

    Training stops once ``patience`` epochs pass without improvement, or at
    ``max_epochs``. With patience 0 only the starting weights are evaluated.
    """

    def __init__(
        self,
        model: NetworkModel,
        start: int = 0,
        lr: float = 1e-3,
        batch_size: int = 64,
        patience: int = 50,
        max_epochs: int = 500,
        rng: Optional[np.random.Generator] = None,
        beta1: float = 0.9,
        beta2: float = 0.999,
        epsilon: float = 1e-8,
        label: str = 'model',
    ):
        if patience < 0:
            raise ConfigError(f"patience must be >= 0, got {patience}")
        if batch_size < 1 or max_epochs < 0:
            raise ConfigError("batch_size must be >= 1 and max_epochs >= 0")
        self.model = model
        self.start = start
        self.lr = lr
        self.batch_size = batch_size
        self.patience = patience
        self.max_epochs = max_epochs
        self.rng = rng if rng is not None else np.random.default_rng(0)
        self.adam = AdamState(lr=lr, beta1=beta1, beta2=beta2, epsilon=epsilon)
        self.label = label
        self.logger = logging.getLogger(__name__)

    def evaluate(self, params: List[Params], x: np.ndarray, y: np.ndarray) -> float:
        """Mean per-sample loss over ``x`` with the given weights."""
        per_sample = []
        for i in range(0, len(x), INFERENCE_CHUNK):
            out, _ = self.model.forward(x[i:i + INFERENCE_CHUNK], start=self.start, params=params)
            per_sample.append(batch_loss(out, y[i:i + INFERENCE_CHUNK])[1])
        return float(np.concatenate(per_sample).mean())

    def _train_epoch(self, params: List[Params], x: np.ndarray, y: np.ndarray, epoch: int):
        order = self.rng.permutation(len(x))
        total = 0.0
        for i in range(0, len(order), self.batch_size):
            idx = order[i:i + self.batch_size]
            out, trace = self.model.forward(x[idx], start=self.start, params=params, keep_trace=True)
            loss, _, grad = batch_loss(out, y[idx])
            if not np.isfinite(loss) or loss > DIVERGENCE_LIMIT:
                raise DivergenceError(
                    f"{self.label}: batch loss {loss:.4g} at epoch {epoch} (limit {DIVERGENCE_LIMIT:g})"
                )
            _, grads = self.model.backward(trace, grad, params)
            flat, self.adam = adam_step(_flatten(params), _flatten(grads), self.adam)
            params = _unflatten(params, flat)
            total += loss * len(idx)
        return params, total / len(order)

    def run(
        self,
        params: List[Params],
        train_x: np.ndarray,
        train_y: np.ndarray,
        val_x: np.ndarray,
        val_y: np.ndarray,
    ) -> EarlyStoppingResult:
        """
        Args:
            params: Starting weights for layers ``start..end`` (not modified)
            train_x, train_y: Training inputs and ``N×m×2`` targets
            val_x, val_y: Validation inputs and targets

        Returns:
            EarlyStoppingResult holding the best snapshot and the log
        """
        if len(train_x) == 0 or len(val_x) == 0:
            raise DataError(f"{self.label}: training and validation sets must be non-empty")
        params = copy.deepcopy(list(params))
        log = TrainingLog()
        t0 = time.perf_counter()

        best_params = copy.deepcopy(params)
        best_val = self.evaluate(params, val_x, val_y)
        best_epoch = 0
        log.append(0, self.evaluate(params, train_x, train_y), best_val, time.perf_counter() - t0)
        self.logger.debug(f"{self.label} epoch 0: val {best_val:.6f}")

        epoch = 0
        while epoch - best_epoch < self.patience and epoch < self.max_epochs:
            epoch += 1
            params, train_loss = self._train_epoch(params, train_x, train_y, epoch)
            val_loss = self.evaluate(params, val_x, val_y)
            if not np.isfinite(val_loss):
                raise DivergenceError(f"{self.label}: validation loss is not finite at epoch {epoch}")
            log.append(epoch, train_loss, val_loss, time.perf_counter() - t0)
            self.logger.debug(f"{self.label} epoch {epoch}: train {train_loss:.6f} val {val_loss:.6f}")
            if val_loss < best_val:
                best_val, best_epoch = val_loss, epoch
                best_params = copy.deepcopy(params)

        self.logger.info(
            f"{self.label}: stopped at epoch {epoch}, best epoch {best_epoch} (val loss {best_val:.6f})"
        )
        return EarlyStoppingResult(best_params, best_epoch, best_val, epoch, log)


class VanillaTrainer:
    """Trains a full network on a landmark dataset."""

    def __init__(self, config: Optional[TrainConfig] = None, seed: int = 0):
        self.config = config or TrainConfig()
        self.config.validate()
        self.seed = seed
        self.logger = logging.getLogger(__name__)

    def train(
        self,
        dataset,
        model: Optional[NetworkModel] = None,
        split: Optional[Tuple[np.ndarray, np.ndarray]] = None,
    ) -> Tuple[NetworkModel, TrainingLog]:
        """
        Args:
            dataset: Object with ``images`` (N×40×40×3, normalized), ``landmarks``
                (N×m×2) and optionally ``stats``
            model: Starting network; a fresh default network if omitted
            split: (train indices, validation indices); drawn from the
                ``split`` stream if omitted

        Returns:
            (network holding the best-validation weights, training log)
        """
        images = np.asarray(dataset.images, dtype=np.float64)
        targets = np.asarray(dataset.landmarks, dtype=np.float64)
        if len(images) == 0:
            raise DataError("Cannot train on an empty dataset")
        if len(images) < 2:
            raise DataError("Training needs at least two samples for a validation split")
        cfg = self.config
        if split is None:
            split = split_indices(len(images), cfg.validation_fraction, stream(self.seed, 'split'))
        train_idx, val_idx = (np.asarray(s, dtype=np.int64) for s in split)

        if model is None:
            m = targets.shape[1] if targets.ndim == 3 else targets.shape[1] // 2
            model = NetworkModel(default_architecture(m), rng=stream(self.seed, 'init'))
        model = model.copy()
        model.stats = getattr(dataset, 'stats', None) or model.stats

        self.logger.info(
            f"Training vanilla network on {len(train_idx)} samples, validating on {len(val_idx)}"
        )
        loop = EarlyStoppingLoop(
            model,
            start=0,
            lr=cfg.lr,
            batch_size=cfg.batch_size,
            patience=cfg.patience,
            max_epochs=cfg.epochs,
            rng=stream(self.seed, 'train'),
            beta1=cfg.beta1,
            beta2=cfg.beta2,
            epsilon=cfg.epsilon,
            label='vanilla',
        )
        result = loop.run(
            model.params, images[train_idx], targets[train_idx], images[val_idx], targets[val_idx]
        )
        model.params = result.params
        return model, result.log


def train_vanilla(
    dataset,
    config: Optional[TrainConfig] = None,
    seed: int = 0,
    model: Optional[NetworkModel] = None,
    split: Optional[Tuple[np.ndarray, np.ndarray]] = None,
) -> Tuple[NetworkModel, TrainingLog]:
    """Train the vanilla network; see ``VanillaTrainer.train``."""
    return VanillaTrainer(config, seed).train(dataset, model=model, split=split)
