"""
Diagonal-covariance Gaussian mixtures fitted by EM, and posterior-argmax
cluster assignment.
"""
import logging
import math
from collections import OrderedDict
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Sequence, Tuple, Union

import numpy as np
from scipy.special import logsumexp
from sklearn.cluster import kmeans_plusplus

from ..errors import ConfigError, ContainerFormatError, DataError, ShapeError
from ..netcore import container
from ..utils.parallel import ordered_map
from ..utils.seeding import stream_seed

logger = logging.getLogger(__name__)

VARIANCE_FLOOR = 1e-6
COLLAPSE_FACTOR = 1e-6
E_STEP_CHUNK = 2048
_LOG_2PI = math.log(2.0 * math.pi)


def posteriors_from_log(log_joint: np.ndarray) -> np.ndarray:
    """Normalize per-component log joint densities (rows) into posteriors."""
    log_joint = np.atleast_2d(log_joint)
    return np.exp(log_joint - logsumexp(log_joint, axis=1, keepdims=True))


def _log_joint(x: np.ndarray, weights: np.ndarray, means: np.ndarray, variances: np.ndarray) -> np.ndarray:
    # direct deviations keep precision for features far from the origin
    quad = np.empty((x.shape[0], means.shape[0]))
    for j in range(means.shape[0]):
        quad[:, j] = np.sum((x - means[j]) ** 2 / variances[j], axis=1)
    log_det = np.sum(np.log(variances), axis=1)
    return np.log(weights) - 0.5 * (means.shape[1] * _LOG_2PI + log_det + quad)


@dataclass(frozen=True)
class GmmModel:
    """K diagonal Gaussians over features extracted at ``tap``."""
    weights: np.ndarray
    means: np.ndarray
    variances: np.ndarray
    tap: str = 'FC5'

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64).reshape(-1)
        mu = np.atleast_2d(np.asarray(self.means, dtype=np.float64))
        var = np.atleast_2d(np.asarray(self.variances, dtype=np.float64))
        if mu.shape != var.shape or mu.shape[0] != w.shape[0]:
            raise ShapeError(f"Weights {w.shape}, means {mu.shape} and variances {var.shape} disagree")
        if np.any(w <= 0) or abs(float(w.sum()) - 1.0) > 1e-9:
            raise DataError("Mixture weights must be positive and sum to 1")
        if np.any(var < VARIANCE_FLOOR):
            raise DataError(f"Mixture variances must be >= {VARIANCE_FLOOR}")
        object.__setattr__(self, 'weights', w)
        object.__setattr__(self, 'means', mu)
        object.__setattr__(self, 'variances', var)

    @property
    def k(self) -> int:
        return self.weights.shape[0]

    @property
    def dim(self) -> int:
        return self.means.shape[1]

    def _features(self, features: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(features, dtype=np.float64))
        if x.shape[1] != self.dim:
            raise ShapeError(f"Feature dimension {x.shape[1]} does not match mixture dimension {self.dim}")
        return x

    def log_joint(self, features: np.ndarray) -> np.ndarray:
        """``N×K`` matrix of ``log w_k + log N(f | mu_k, diag var_k)``."""
        return _log_joint(self._features(features), self.weights, self.means, self.variances)

    def posteriors(self, features: np.ndarray) -> np.ndarray:
        return posteriors_from_log(self.log_joint(features))

    def log_likelihood(self, features: np.ndarray) -> float:
        return math.fsum(logsumexp(self.log_joint(features), axis=1))

    def assign(self, feature: np.ndarray) -> Tuple[int, np.ndarray]:
        """Most probable component for one feature vector (lowest index on ties) and its posteriors."""
        log_joint = self.log_joint(np.asarray(feature).reshape(1, -1))[0]
        return int(np.argmax(log_joint)), posteriors_from_log(log_joint)[0]

    def assign_many(self, features: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Batched ``assign``: (labels ``N``, posteriors ``N×K``)."""
        log_joint = self.log_joint(features)
        return np.argmax(log_joint, axis=1), posteriors_from_log(log_joint)

    # ------------------------------------------------------------ persistence

    def to_container(self) -> container.Container:
        tensors = OrderedDict([
            ('weights', self.weights),
            ('means', self.means),
            ('variances', self.variances),
        ])
        return container.Container(kind='gmm', metadata={'tap': self.tap, 'k': self.k}, tensors=tensors)

    @classmethod
    def from_container(cls, box: container.Container) -> 'GmmModel':
        try:
            return cls(box.tensors['weights'], box.tensors['means'], box.tensors['variances'],
                       box.metadata.get('tap', 'FC5'))
        except KeyError as e:
            raise ContainerFormatError(f"Mixture container lacks tensor {e}") from e

    def to_bytes(self) -> bytes:
        return container.to_bytes(self.to_container())

    def save(self, path: Union[str, Path]) -> Path:
        return container.save(self.to_container(), path)

    @classmethod
    def load(cls, path: Union[str, Path]) -> 'GmmModel':
        return cls.from_container(container.load(path, expected_kind='gmm'))


@dataclass
class FitResult:
    """A fitted mixture with its EM history."""
    model: GmmModel
    trace: List[float]
    iterations: int
    converged: bool
    reseeds: List[Tuple[int, int]] = field(default_factory=list)


class GmmFitter:
    """
    EM for diagonal Gaussian mixtures.

    Stops when the relative change of the total log-likelihood drops below
    ``tol`` or after ``max_iter`` M-steps. ``trace[i]`` is the log-likelihood
    after ``i`` M-steps, so ``trace[0]`` belongs to the initial model.
    """

    def __init__(self, k: int, max_iter: int = 300, tol: float = 1e-7, tap: str = 'FC5', jobs: int = 1):
        if k < 1:
            raise ConfigError(f"Mixture needs k >= 1 components, got {k}")
        if max_iter < 0 or tol < 0:
            raise ConfigError("max_iter and tol must be non-negative")
        self.k = k
        self.max_iter = max_iter
        self.tol = tol
        self.tap = tap
        self.jobs = jobs
        self.logger = logging.getLogger(__name__)

    def initial_model(self, x: np.ndarray, seed: int, stream_name: Sequence[str] = ('cluster',)) -> GmmModel:
        """k-means++ seeded means, uniform weights, global per-dimension variance."""
        x = self._check(x)
        means, _ = kmeans_plusplus(x, n_clusters=self.k, random_state=stream_seed(seed, *stream_name))
        variances = np.maximum(x.var(axis=0), VARIANCE_FLOOR)
        return GmmModel(
            np.full(self.k, 1.0 / self.k), means.astype(np.float64), np.tile(variances, (self.k, 1)), self.tap
        )

    def _check(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.ndim == 1:
            x = x[:, np.newaxis]
        if x.ndim != 2 or x.shape[1] < 1:
            raise ShapeError(f"Features must be an n×d matrix, got shape {x.shape}")
        if x.shape[0] < self.k:
            raise DataError(f"Cannot fit {self.k} components to {x.shape[0]} samples")
        if not np.all(np.isfinite(x)):
            raise DataError("Features contain non-finite values")
        return x

    def _e_step(self, x: np.ndarray, weights, means, variances) -> Tuple[np.ndarray, float, np.ndarray]:
        """Responsibilities, total log-likelihood (compensated sum) and per-sample log-likelihoods."""
        chunks = [x[i:i + E_STEP_CHUNK] for i in range(0, len(x), E_STEP_CHUNK)]
        log_joint = np.concatenate(
            ordered_map(lambda c: _log_joint(c, weights, means, variances), chunks, jobs=self.jobs), axis=0
        )
        log_norm = logsumexp(log_joint, axis=1, keepdims=True)
        return np.exp(log_joint - log_norm), math.fsum(log_norm[:, 0]), log_norm[:, 0]

    def _m_step(self, x: np.ndarray, resp: np.ndarray):
        nk = resp.sum(axis=0)
        safe = np.maximum(nk, np.finfo(np.float64).tiny)[:, np.newaxis]
        means = resp.T @ x / safe
        variances = np.empty_like(means)
        for j in range(means.shape[0]):
            variances[j] = resp[:, j] @ (x - means[j]) ** 2 / safe[j]
        variances = np.maximum(variances, VARIANCE_FLOOR)
        weights = nk / nk.sum()
        return weights, means, variances

    def run(self, features: np.ndarray, initial: GmmModel) -> FitResult:
        """Run EM from a given starting mixture."""
        x = self._check(features)
        if initial.k != self.k or initial.dim != x.shape[1]:
            raise ShapeError(f"Initial mixture is {initial.k}×{initial.dim}, data needs {self.k}×{x.shape[1]}")
        n = x.shape[0]
        weights, means, variances = initial.weights, initial.means, initial.variances
        global_var = np.maximum(x.var(axis=0), VARIANCE_FLOOR)
        trace: List[float] = []
        reseeds: List[Tuple[int, int]] = []
        converged = False

        resp, ll, per_sample = self._e_step(x, weights, means, variances)
        trace.append(ll)
        iteration = 0
        while iteration < self.max_iter:
            iteration += 1
            weights, means, variances = self._m_step(x, resp)
            for j in np.flatnonzero(weights < COLLAPSE_FACTOR / self.k):
                far = int(np.argmin(per_sample))
                self.logger.warning(
                    f"EM iteration {iteration}: component {j} collapsed (weight {weights[j]:.3g}); "
                    f"re-seeding it at sample {far}"
                )
                means[j] = x[far]
                variances[j] = global_var
                weights[j] = 1.0 / self.k
                weights = weights / weights.sum()
                per_sample = per_sample.copy()
                per_sample[far] = np.inf
                reseeds.append((iteration, int(j)))
            resp, ll, per_sample = self._e_step(x, weights, means, variances)
            previous = trace[-1]
            trace.append(ll)
            if abs(ll - previous) <= self.tol * max(abs(previous), 1e-300):
                converged = True
                break

        model = GmmModel(weights, means, variances, self.tap)
        self.logger.debug(
            f"EM: {iteration} iterations, log-likelihood {trace[0]:.6g} -> {trace[-1]:.6g} "
            f"({'converged' if converged else 'iteration cap'})"
        )
        return FitResult(model, trace, iteration, converged, reseeds)

    def fit(self, features: np.ndarray, seed: int = 0, stream_name: Sequence[str] = ('cluster',)) -> FitResult:
        x = self._check(features)
        return self.run(x, self.initial_model(x, seed, stream_name))


def fit(
    features: np.ndarray,
    k: int,
    seed: int = 0,
    tap: str = 'FC5',
    max_iter: int = 300,
    tol: float = 1e-7,
    jobs: int = 1,
    stream_name: Sequence[str] = ('cluster',),
) -> FitResult:
    """
    Fit a ``k``-component diagonal mixture to ``n×d`` features.

    Raises:
        DataError: fewer samples than components
    """
    return GmmFitter(k, max_iter=max_iter, tol=tol, tap=tap, jobs=jobs).fit(features, seed, stream_name)


def assign(model: GmmModel, feature: np.ndarray) -> Tuple[int, np.ndarray]:
    return model.assign(feature)


def assign_many(model: GmmModel, features: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    return model.assign_many(features)
