"""Resampling for imbalanced binary data: ENN, RENN, SMOTE and ordered
pipelines of them.

Label 1 is the minority (positive) class by convention. Cleaning stages only
ever remove rows of the other class, and SMOTE only adds rows of class 1.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ._rng import check_seed, stream
from .data import Dataset
from .errors import DegenerateError, ImbsurvError
from .neighbors import MetricKind, NeighborIndex

MINORITY = 1


class SamplingWarning(UserWarning):
    pass


class PipelineError(ImbsurvError):
    def __init__(self, stage: int, kind: str, cause: Exception):
        super().__init__(f"stage {stage} ({kind}) failed: {cause}")
        self.stage = stage
        self.kind = kind
        self.cause = cause


@dataclass
class SampleSet:
    """Feature matrix with labels and per-row provenance.

    ``ids`` holds the row id in the originating data for original rows and
    -1 for synthetic rows, which lets callers audit what a sampler produced.
    """

    X: np.ndarray
    y: np.ndarray
    synthetic: Optional[np.ndarray] = None
    ids: Optional[np.ndarray] = None
    metric: Optional[MetricKind] = None

    def __post_init__(self):
        self.X = np.asarray(self.X)
        if self.X.ndim != 2:
            raise ValueError("X must be 2-D")
        self.y = np.asarray(self.y, dtype=np.int64)
        n = self.X.shape[0]
        if self.y.shape != (n,):
            raise ValueError("X and y differ in length")
        if self.synthetic is None:
            self.synthetic = np.zeros(n, dtype=bool)
        if self.ids is None:
            self.ids = np.arange(n, dtype=np.int64)
        self.synthetic = np.asarray(self.synthetic, dtype=bool)
        self.ids = np.asarray(self.ids, dtype=np.int64)
        if self.metric is None:
            integer = np.issubdtype(self.X.dtype, np.integer)
            self.metric = MetricKind.hamming() if integer else MetricKind.euclidean()

    @classmethod
    def from_dataset(cls, ds: Dataset, metric: Optional[MetricKind] = None) -> "SampleSet":
        return cls(ds.codes.copy(), ds.labels.copy(), metric=metric or MetricKind.hamming())

    def __len__(self):
        return int(self.y.shape[0])

    @property
    def provenance(self) -> list[str]:
        return ["synthetic" if s else "original" for s in self.synthetic]

    def counts(self, minority_label: int = MINORITY) -> tuple[int, int]:
        """(minority count, majority count)."""
        m = int((self.y == minority_label).sum())
        return m, len(self) - m

    def subset(self, mask_or_rows) -> "SampleSet":
        return SampleSet(
            self.X[mask_or_rows], self.y[mask_or_rows],
            self.synthetic[mask_or_rows], self.ids[mask_or_rows], self.metric,
        )

    def equals(self, other: "SampleSet") -> bool:
        return (
            np.array_equal(self.X, other.X)
            and np.array_equal(self.y, other.y)
            and np.array_equal(self.synthetic, other.synthetic)
            and np.array_equal(self.ids, other.ids)
        )


def _majority_rows(data: SampleSet, minority_label: int) -> Optional[np.ndarray]:
    rows = np.flatnonzero(data.y != minority_label)
    if len(rows) == 0 or len(rows) == len(data):
        return None
    return rows


def enn(
    data: SampleSet, k: int = 5, strict_unanimous: bool = True, minority_label: int = MINORITY
) -> SampleSet:
    """Edited nearest neighbours, majority class only.

    Every majority row is checked against its k nearest neighbours in the
    input (itself excluded). By default (``strict_unanimous``) it is kept only
    if all k neighbours share its label. With ``strict_unanimous=False`` this
    becomes Wilson's majority vote: removed when most neighbours disagree, an
    even split counting as agreement. All decisions are taken on the input
    before anything is removed.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if k > len(data) - 1:
        raise ValueError(f"k exceeds available neighbors (k={k}, n={len(data)})")
    maj = _majority_rows(data, minority_label)
    if maj is None:
        warnings.warn("single-class input returned unchanged", SamplingWarning, stacklevel=2)
        return data.subset(slice(None))
    ids, _ = NeighborIndex(data.X, data.metric).kneighbors(k, maj)
    disagree = (data.y[ids] != data.y[maj][:, None]).sum(axis=1)
    remove = disagree > 0 if strict_unanimous else 2 * disagree > k
    keep = np.ones(len(data), dtype=bool)
    keep[maj[remove]] = False
    return data.subset(keep)


def renn(
    data: SampleSet,
    k: int = 5,
    max_iter: int = 100,
    strict_unanimous: bool = True,
    minority_label: int = MINORITY,
    return_passes: bool = False,
):
    """Repeat :func:`enn` until a pass removes nothing or ``max_iter`` passes ran.

    With ``return_passes`` the per-pass removal counts are returned as well.
    """
    if max_iter < 1:
        raise ValueError("max_iter must be >= 1")
    if k > len(data) - 1:
        raise ValueError(f"k exceeds available neighbors (k={k}, n={len(data)})")
    passes: list[int] = []
    cur = data
    if _majority_rows(cur, minority_label) is None:
        warnings.warn("single-class input returned unchanged", SamplingWarning, stacklevel=2)
    else:
        for _ in range(max_iter):
            nxt = enn(cur, k, strict_unanimous, minority_label)
            removed = len(cur) - len(nxt)
            passes.append(removed)
            cur = nxt
            if removed == 0:
                break
            if _majority_rows(cur, minority_label) is None:
                warnings.warn("majority class exhausted", SamplingWarning, stacklevel=2)
                break
            if k > len(cur) - 1:
                warnings.warn("too few rows left for another pass", SamplingWarning, stacklevel=2)
                break
    return (cur, passes) if return_passes else cur


def _vote(rows: np.ndarray, base: np.ndarray) -> np.ndarray:
    """Per-column plurality over ``rows`` (base row first). Ties go to the
    base value when it is among the winners, otherwise to the lowest code."""
    out = base.copy()
    for j in range(rows.shape[1]):
        vals, counts = np.unique(rows[:, j], return_counts=True)
        winners = vals[counts == counts.max()]
        if base[j] not in winners:
            out[j] = winners[0]
    return out


def _target_count(target_ratio: float, n_majority: int) -> int:
    # round() first so that e.g. 0.3 * 10 gives 3, not 4
    return math.ceil(round(target_ratio * n_majority, 9))


def smote(
    data: SampleSet,
    k: int = 5,
    target_ratio: float = 1.0,
    mode: Optional[str] = None,
    seed: int = 0,
    rng: Optional[np.random.Generator] = None,
    minority_label: int = MINORITY,
) -> SampleSet:
    """Synthesize minority rows until minority = ceil(target_ratio * majority).

    Base rows are dealt round-robin from a seeded shuffle of the minority
    class, so per-base generation counts differ by at most one. Each synthetic
    row draws one of the base's k nearest minority neighbours. ``continuous``
    mode interpolates base + u * (neighbour - base); ``categorical`` mode takes
    the per-feature plurality of the base and all k neighbours. Under a heom
    metric, categorical columns are always voted.
    """
    if not 0 < target_ratio <= 1:
        raise ValueError("target_ratio must lie in (0, 1]")
    if mode is None:
        mode = "categorical" if data.metric.kind == "hamming" else "continuous"
    if mode not in ("categorical", "continuous"):
        raise ValueError(f"unknown smote mode {mode!r}")
    if rng is None:
        rng = stream(seed)
    min_rows = np.flatnonzero(data.y == minority_label)
    m = len(min_rows)
    n_maj = len(data) - m
    target = _target_count(target_ratio, n_maj)
    if m >= target:
        return data.subset(slice(None))
    if m < 2:
        raise DegenerateError(f"cannot synthesize from {m} minority row(s)")
    if not 1 <= k <= m - 1:
        raise ValueError(f"k exceeds available neighbors (k={k}, minority={m})")
    Xm = data.X[min_rows]
    nn, _ = NeighborIndex(Xm, data.metric).kneighbors(k)
    n_new = target - m
    order = rng.permutation(m)
    bases = order[np.arange(n_new) % m]
    picks = nn[bases, rng.integers(0, k, size=n_new)]

    if data.metric.kind == "heom":
        vote_cols = np.asarray(data.metric.categorical)
    else:
        vote_cols = np.full(Xm.shape[1], mode == "categorical")
    out_dtype = data.X.dtype if vote_cols.all() else np.result_type(data.X.dtype, np.float64)
    new = np.empty((n_new, Xm.shape[1]), dtype=out_dtype)
    if (~vote_cols).any():
        u = rng.random(n_new)[:, None]
        xb = Xm[bases][:, ~vote_cols].astype(np.float64)
        xn = Xm[picks][:, ~vote_cols].astype(np.float64)
        new[:, ~vote_cols] = xb + u * (xn - xb)
    if vote_cols.any():
        voted = np.stack([
            _vote(Xm[np.concatenate(([i], nn[i]))][:, vote_cols], Xm[i, vote_cols]) for i in range(m)
        ])
        new[:, vote_cols] = voted[bases]
    X = np.concatenate([data.X.astype(out_dtype, copy=False), new])
    return SampleSet(
        X,
        np.concatenate([data.y, np.full(n_new, minority_label, dtype=np.int64)]),
        np.concatenate([data.synthetic, np.ones(n_new, dtype=bool)]),
        np.concatenate([data.ids, np.full(n_new, -1, dtype=np.int64)]),
        data.metric,
    )


STAGE_KINDS = ("enn", "renn", "smote")


@dataclass(frozen=True)
class SamplerStage:
    kind: str
    k: int = 5
    max_iter: int = 100
    target_ratio: float = 1.0
    mode: Optional[str] = None
    strict_unanimous: bool = True

    def __post_init__(self):
        if self.kind not in STAGE_KINDS:
            raise ValueError(f"unknown sampler stage {self.kind!r}")
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if not 0 < self.target_ratio <= 1:
            raise ValueError("target_ratio must lie in (0, 1]")
        if self.mode not in (None, "categorical", "continuous"):
            raise ValueError(f"unknown smote mode {self.mode!r}")

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "k": self.k}
        if self.kind == "renn":
            d["max_iter"] = self.max_iter
        if self.kind in ("enn", "renn"):
            d["strict_unanimous"] = self.strict_unanimous
        if self.kind == "smote":
            d["target_ratio"] = self.target_ratio
            d["mode"] = self.mode
        return d


@dataclass(frozen=True)
class SamplerSpec:
    stages: tuple[SamplerStage, ...] = ()
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "stages", tuple(self.stages))
        check_seed(self.seed)

    @property
    def label(self) -> str:
        return "+".join(s.kind.upper() for s in self.stages) or "none"


def apply_stage(stage: SamplerStage, data: SampleSet, rng: np.random.Generator, minority_label=MINORITY):
    """Run one stage. Returns (output, extra log fields)."""
    if stage.kind == "enn":
        return enn(data, stage.k, stage.strict_unanimous, minority_label), {}
    if stage.kind == "renn":
        out, passes = renn(data, stage.k, stage.max_iter, stage.strict_unanimous, minority_label, return_passes=True)
        return out, {"passes": passes}
    return smote(data, stage.k, stage.target_ratio, stage.mode, rng=rng, minority_label=minority_label), {}


def run_pipeline(
    spec: SamplerSpec, data: SampleSet, minority_label: int = MINORITY
) -> tuple[SampleSet, list[dict]]:
    """Apply the stages of ``spec`` in order.

    Stage ``i`` draws from its own stream keyed by ``(spec.seed, i)``.
    Returns the final set and one size-log entry per stage.
    """
    log = []
    cur = data
    for i, stage in enumerate(spec.stages):
        n_min, n_maj = cur.counts(minority_label)
        try:
            with warnings.catch_warnings(record=True) as caught:
                warnings.simplefilter("always", SamplingWarning)
                out, extra = apply_stage(stage, cur, stream(spec.seed, i), minority_label)
        except (ValueError, ImbsurvError) as exc:
            raise PipelineError(i, stage.kind, exc) from exc
        o_min, o_maj = out.counts(minority_label)
        entry = {
            "stage": i,
            "kind": stage.kind,
            "n_in": len(cur),
            "n_out": len(out),
            "minority_in": n_min,
            "majority_in": n_maj,
            "minority_out": o_min,
            "majority_out": o_maj,
            "synthetic_out": int(out.synthetic.sum()),
        }
        entry.update(extra)
        if caught:
            entry["warnings"] = [str(w.message) for w in caught]
        log.append(entry)
        cur = out
    return cur, log
