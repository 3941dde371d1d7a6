"""Seeded synthetic data: 2-D imbalanced Gaussian blobs and categorical
survival-style tables."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

from ._rng import check_seed, stream, standard_normal
from .data import Dataset, FeatureSpec, Schema
from .neighbors import NeighborIndex
from .sampling import SampleSet

# Overlap at which leave-one-out 1-NN balanced accuracy of the default blobs
# (n=1000, 10.4% minority) is 0.75, averaged over seeds 0..9.
# Recompute with calibrate_overlap(); tests/test_synthgen.py checks it.
CALIBRATED_OVERLAP = 0.4317

MONTHS_COLUMN = "survival_months"


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


@dataclass(frozen=True)
class BlobConfig:
    """Two isotropic Gaussian classes in the plane.

    Centers are ``max(0, 4 - 4 * overlap) * sigma`` apart: overlap 0 gives
    4 sigma separation, overlap 1 puts both classes on the same center.
    """

    n: int = 1000
    minority_frac: float = 0.104
    overlap: float = CALIBRATED_OVERLAP
    seed: int = 0
    sigma: float = 1.0

    def __post_init__(self):
        check_seed(self.seed)
        if self.n < 2:
            raise ValueError("n must be >= 2")
        if not 0.0 <= self.overlap <= 1.0:
            raise ValueError("overlap must lie in [0, 1]")
        if not 0.0 < self.minority_frac < 1.0:
            raise ValueError("minority_frac must lie in (0, 1)")
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")

    @property
    def n_minority(self) -> int:
        return _round_half_up(self.minority_frac * self.n)

    @property
    def separation(self) -> float:
        return max(0.0, 4.0 - 4.0 * self.overlap) * self.sigma

    def to_dict(self):
        return asdict(self)


def generate_blobs(config: BlobConfig) -> SampleSet:
    n_min = config.n_minority
    if n_min < 1:
        raise ValueError("minority count rounds to 0")
    if n_min >= config.n:
        raise ValueError("majority count rounds to 0")
    rng = stream(config.seed)
    y = np.zeros(config.n, dtype=np.int64)
    y[rng.permutation(config.n)[:n_min]] = 1
    z = standard_normal(rng, 2 * config.n).reshape(config.n, 2)
    centers = np.array([[config.separation, 0.0], [0.0, 0.0]])
    X = centers[y] + config.sigma * z
    return SampleSet(X, y)


def loo_1nn_accuracy(data: SampleSet, balanced: bool = True) -> float:
    """Leave-one-out 1-NN accuracy; ``balanced`` averages per-class recall."""
    ids, _ = NeighborIndex(data.X, data.metric).kneighbors(1)
    hit = data.y[ids[:, 0]] == data.y
    if not balanced:
        return float(hit.mean())
    return float(np.mean([hit[data.y == c].mean() for c in np.unique(data.y)]))


def calibrate_overlap(
    target: float = 0.75,
    n: int = 1000,
    minority_frac: float = 0.104,
    seeds: Sequence[int] = range(10),
    tol: float = 1e-4,
) -> float:
    """Bisect the overlap giving mean balanced LOO 1-NN accuracy ``target``."""

    def acc(ov):
        return float(np.mean([
            loo_1nn_accuracy(generate_blobs(BlobConfig(n, minority_frac, ov, s))) for s in seeds
        ]))

    lo, hi = 0.0, 1.0
    if not acc(hi) <= target <= acc(lo):
        raise ValueError(f"target {target} outside the attainable accuracy range")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if acc(mid) > target:
            lo = mid
        else:
            hi = mid
    return round(0.5 * (lo + hi), 4)


@dataclass(frozen=True)
class CatGenConfig:
    n: int = 2000
    n_features: int = 6
    categories_per_feature: int = 4
    minority_frac: float = 0.104
    signal_strength: float = 0.5
    seed: int = 0

    def __post_init__(self):
        check_seed(self.seed)
        if self.n < 1 or self.n_features < 1:
            raise ValueError("n and n_features must be >= 1")
        if self.categories_per_feature < 2:
            raise ValueError("categories_per_feature must be >= 2")
        if not 0.0 <= self.signal_strength <= 1.0:
            raise ValueError("signal_strength must lie in [0, 1]")
        if not 0.0 < self.minority_frac < 1.0:
            raise ValueError("minority_frac must lie in (0, 1)")

    @property
    def n_minority(self) -> int:
        return _round_half_up(self.minority_frac * self.n)

    def to_dict(self):
        return asdict(self)


def generate_categorical(config: CatGenConfig) -> Dataset:
    """Categorical features whose per-class distribution mixes uniform noise
    with a point mass that indicates the class.

    Feature ``j`` puts the class-1 mass on category ``j % m`` and the class-0
    mass on ``(j + 1) % m``. Survival months are drawn so that a 1-year
    horizon reproduces the labels: 0-11 for class 1, 12-120 for class 0.
    """
    m = config.categories_per_feature
    s = config.signal_strength
    rng = stream(config.seed)
    y = np.zeros(config.n, dtype=np.int64)
    y[rng.permutation(config.n)[: config.n_minority]] = 1
    codes = np.empty((config.n, config.n_features), dtype=np.int64)
    for j in range(config.n_features):
        u = rng.random(config.n)
        for cls, hot in ((1, j % m), (0, (j + 1) % m)):
            probs = np.full(m, (1.0 - s) / m)
            probs[hot] += s
            cdf = np.cumsum(probs)
            cdf[-1] = 1.0
            rows = y == cls
            codes[rows, j] = np.searchsorted(cdf, u[rows], side="right")
    codes = np.minimum(codes, m - 1)
    months = np.where(y == 1, rng.integers(0, 12, config.n), rng.integers(12, 121, config.n))
    names = [f"f{j + 1}" for j in range(config.n_features)]
    schema = Schema(tuple(FeatureSpec(nm) for nm in names), MONTHS_COLUMN)
    vocab = [[f"c{c}" for c in range(m)] for _ in names]
    return Dataset(schema, codes, vocab, y, months.astype(np.int64))
