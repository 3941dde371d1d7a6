"""Stratified cross-validation with resampling confined to training folds,
confusion-matrix metrics and table-shaped experiment reports."""

from __future__ import annotations

import csv
import io
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from ._rng import check_seed, child_seed, stream
from .models import FitConfig, OneHotEncoding, fit_model, predict
from .sampling import SamplerSpec, SamplerStage, SampleSet, run_pipeline

REPORT_COLUMNS = ("model", "sampler", "fold", "accuracy", "sensitivity", "specificity", "f1")
METRIC_NAMES = ("accuracy", "sensitivity", "specificity", "f1")
REPORT_SCHEMA = "v1"


@dataclass
class FoldPlan:
    k: int
    folds: list[np.ndarray]
    seed: int
    flags: list[str] = field(default_factory=list)

    def train_test(self, i: int, n: int) -> tuple[np.ndarray, np.ndarray]:
        test = self.folds[i]
        mask = np.ones(n, dtype=bool)
        mask[test] = False
        return np.flatnonzero(mask), test


def stratified_folds(labels, k: int = 5, seed: int = 0) -> FoldPlan:
    """Split row ids into ``k`` class-stratified folds.

    Each class is shuffled with the seeded stream and dealt round-robin; the
    dealing position carries over between classes so fold sizes stay level.
    """
    y = np.asarray(labels)
    n = len(y)
    if k < 2:
        raise ValueError("k must be >= 2")
    if k > n:
        raise ValueError(f"k={k} exceeds the number of rows ({n})")
    rng = stream(seed, 0)
    buckets: list[list[int]] = [[] for _ in range(k)]
    flags = []
    start = 0
    for cls in np.unique(y):
        ids = np.flatnonzero(y == cls)
        if len(ids) < k:
            flags.append(f"class {cls} has {len(ids)} rows, fewer than k={k}")
        ids = ids[rng.permutation(len(ids))]
        for j, r in enumerate(ids.tolist()):
            buckets[(start + j) % k].append(r)
        start = (start + len(ids)) % k
    return FoldPlan(k, [np.array(sorted(b), dtype=np.int64) for b in buckets], seed, flags)


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int = 0
    tn: int = 0
    fp: int = 0
    fn: int = 0

    @property
    def n(self) -> int:
        return self.tp + self.tn + self.fp + self.fn

    def __add__(self, other: "ConfusionMatrix") -> "ConfusionMatrix":
        return ConfusionMatrix(self.tp + other.tp, self.tn + other.tn, self.fp + other.fp, self.fn + other.fn)

    def to_dict(self):
        return {"tp": self.tp, "tn": self.tn, "fp": self.fp, "fn": self.fn}


def confusion(y_true, y_pred) -> ConfusionMatrix:
    """Counts with label 1 (Not-Survived) as the positive class."""
    t = np.asarray(y_true, dtype=np.int64)
    p = np.asarray(y_pred, dtype=np.int64)
    if t.shape != p.shape:
        raise ValueError(f"length mismatch: {t.shape} vs {p.shape}")
    return ConfusionMatrix(
        tp=int(((t == 1) & (p == 1)).sum()),
        tn=int(((t == 0) & (p == 0)).sum()),
        fp=int(((t == 0) & (p == 1)).sum()),
        fn=int(((t == 1) & (p == 0)).sum()),
    )


@dataclass(frozen=True)
class Metrics:
    """Rates in [0, 1]; ``None`` marks an undefined value (empty denominator)."""

    accuracy: Optional[float]
    sensitivity: Optional[float]
    specificity: Optional[float]
    f1: Optional[float]

    def to_dict(self):
        return {m: getattr(self, m) for m in METRIC_NAMES}


def f1_reciprocal_form(cm: ConfusionMatrix) -> float:
    """F1 written as 1 / (1 + FN/2TP + FP/2TP); requires tp > 0."""
    return 1.0 / (1.0 + cm.fn / (2 * cm.tp) + cm.fp / (2 * cm.tp))


def compute_metrics(cm: ConfusionMatrix) -> Metrics:
    acc = (cm.tp + cm.tn) / cm.n if cm.n else None
    sens = cm.tp / (cm.tp + cm.fn) if cm.tp + cm.fn else None
    spec = cm.tn / (cm.tn + cm.fp) if cm.tn + cm.fp else None
    denom = 2 * cm.tp + cm.fp + cm.fn
    f1 = 2 * cm.tp / denom if denom else None
    return Metrics(acc, sens, spec, f1)


def mean_metrics(items: Sequence[Metrics]) -> Metrics:
    """Arithmetic mean per metric over the folds where it is defined."""
    out = {}
    for name in METRIC_NAMES:
        vals = [getattr(m, name) for m in items if getattr(m, name) is not None]
        out[name] = float(np.mean(vals)) if vals else None
    return Metrics(**out)


@dataclass
class ExperimentSpec:
    """What to cross-validate.

    ``data`` carries the features the samplers see (category codes for
    categorical data). When ``encoding`` is given, resampled codes are
    one-hot encoded before model fitting.
    """

    data: SampleSet
    samplers: list[tuple[str, Sequence[SamplerStage]]]
    models: list[tuple[str, FitConfig]]
    seed: int
    k: int = 5
    threshold: float = 0.5
    aggregation: str = "mean"
    resample_before_cv: bool = False
    encoding: Optional[OneHotEncoding] = None

    def __post_init__(self):
        check_seed(self.seed)
        if not self.samplers or not self.models:
            raise ValueError("experiment needs at least one sampler and one model")
        for kind, items in (("sampler", self.samplers), ("model", self.models)):
            names = [name for name, _ in items]
            if len(set(names)) != len(names):
                raise ValueError(f"duplicate {kind} name")
        if self.aggregation not in ("mean", "pooled"):
            raise ValueError("aggregation must be 'mean' or 'pooled'")
        if not 0.0 <= self.threshold <= 1.0:
            raise ValueError("threshold must lie in [0, 1]")


@dataclass
class FoldResult:
    model: str
    sampler: str
    fold: int
    confusion: ConfusionMatrix
    metrics: Metrics
    n_train: int
    n_resampled: int
    n_synthetic: int
    n_test: int
    leak_count: int
    stage_log: list[dict]
    # original row ids of the resampled training set; not serialized
    train_ids: Optional[np.ndarray] = field(default=None, repr=False)
    test_ids: Optional[np.ndarray] = field(default=None, repr=False)

    def to_dict(self):
        return {
            "model": self.model, "sampler": self.sampler, "fold": self.fold,
            "confusion": self.confusion.to_dict(), "metrics": self.metrics.to_dict(),
            "n_train": self.n_train, "n_resampled": self.n_resampled,
            "n_synthetic": self.n_synthetic, "n_test": self.n_test,
            "leak_count": self.leak_count, "stage_log": self.stage_log,
        }


@dataclass
class ExperimentReport:
    spec_echo: dict
    folds: list[FoldResult]
    means: dict[tuple[str, str], Metrics]
    errors: dict[tuple[str, str], str]
    order: list[tuple[str, str]]
    fold_sizes: list[int]

    def rows(self) -> list[dict]:
        """Report rows, model outer and sampler inner, folds then the mean."""
        out = []
        by_cell: dict[tuple[str, str], list[FoldResult]] = {}
        for fr in self.folds:
            by_cell.setdefault((fr.model, fr.sampler), []).append(fr)
        for cell in self.order:
            model, sampler = cell
            if cell in self.errors:
                out.append({"model": model, "sampler": sampler, "fold": "error",
                            **{m: None for m in METRIC_NAMES}})
                continue
            for fr in sorted(by_cell[cell], key=lambda f: f.fold):
                out.append({"model": model, "sampler": sampler, "fold": fr.fold + 1, **fr.metrics.to_dict()})
            out.append({"model": model, "sampler": sampler, "fold": "mean", **self.means[cell].to_dict()})
        return out

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(REPORT_COLUMNS)
        for r in self.rows():
            w.writerow([r["model"], r["sampler"], r["fold"]]
                       + ["NA" if r[m] is None else repr(r[m]) for m in METRIC_NAMES])
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {
            "schema": REPORT_SCHEMA,
            "experiment": self.spec_echo,
            "fold_sizes": self.fold_sizes,
            "rows": self.rows(),
            "cells": [fr.to_dict() for fr in self.folds],
            "errors": [{"model": m, "sampler": s, "error": e} for (m, s), e in self.errors.items()],
        }

    def to_json(self, extra: Optional[dict] = None) -> str:
        d = self.to_dict()
        if extra:
            d.update(extra)
        return json.dumps(d, indent=2, sort_keys=True, allow_nan=False) + "\n"

    def mean(self, model: str, sampler: str) -> Metrics:
        return self.means[(model, sampler)]


def _features(spec: ExperimentSpec, X: np.ndarray) -> np.ndarray:
    return spec.encoding.transform(X) if spec.encoding is not None else np.asarray(X, dtype=np.float64)


def _run_cell(spec: ExperimentSpec, plan: FoldPlan, data: SampleSet, s: int, m: int, f: int,
              pre_logs: Optional[list]) -> FoldResult:
    s_name, stages = spec.samplers[s]
    m_name, cfg = spec.models[m]
    train_rows, test_rows = plan.train_test(f, len(data))
    train = data.subset(train_rows)
    if pre_logs is None:
        sspec = SamplerSpec(tuple(stages), child_seed(spec.seed, 1, s, m, f))
        resampled, log = run_pipeline(sspec, train)
    else:
        resampled, log = train, pre_logs[s]
    model_cfg = replace(cfg, seed=child_seed(spec.seed, 2, s, m, f))
    model = fit_model(_features(spec, resampled.X), resampled.y, model_cfg)
    test = data.subset(test_rows)
    y_pred = predict(model, _features(spec, test.X), spec.threshold)
    cm = confusion(test.y, y_pred)
    orig = resampled.ids[~resampled.synthetic]
    test_orig = test.ids[~test.synthetic]
    leaks = int(np.isin(orig, test_orig).sum())
    return FoldResult(
        m_name, s_name, f, cm, compute_metrics(cm),
        n_train=len(train), n_resampled=len(resampled), n_synthetic=int(resampled.synthetic.sum()),
        n_test=len(test), leak_count=leaks, stage_log=log,
        train_ids=orig, test_ids=test_orig,
    )


def run_experiment(spec: ExperimentSpec, threads: int = 1) -> ExperimentReport:
    """Cross-validate every (sampler, model) pair.

    Resampling touches the training split of each fold only, unless
    ``resample_before_cv`` is set, in which case each sampler runs once on the
    full data and the folds are drawn from its output (this lets synthetic
    copies of test-fold neighbours into training and is kept only for
    comparison). Cells run on ``threads`` workers; results do not depend on
    the thread count.
    """
    base = spec.data
    base = SampleSet(base.X, base.y, base.synthetic, np.arange(len(base)), base.metric)
    plans, datas, pre_logs = {}, {}, None
    if spec.resample_before_cv:
        pre_logs = []
        for s, (_, stages) in enumerate(spec.samplers):
            out, log = run_pipeline(SamplerSpec(tuple(stages), child_seed(spec.seed, 1, s)), base)
            datas[s] = out
            pre_logs.append(log)
            plans[s] = stratified_folds(out.y, spec.k, spec.seed)
    else:
        plan = stratified_folds(base.y, spec.k, spec.seed)
        for s in range(len(spec.samplers)):
            datas[s], plans[s] = base, plan

    tasks = [(s, m, f) for m in range(len(spec.models)) for s in range(len(spec.samplers)) for f in range(spec.k)]

    def work(t):
        s, m, f = t
        try:
            return _run_cell(spec, plans[s], datas[s], s, m, f, pre_logs)
        except Exception as exc:  # recorded per cell, other cells proceed
            return f"{type(exc).__name__}: {exc}"

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(work, tasks))
    else:
        results = [work(t) for t in tasks]

    order = [(spec.models[m][0], spec.samplers[s][0]) for m in range(len(spec.models)) for s in range(len(spec.samplers))]
    folds, errors, means = [], {}, {}
    by_cell: dict[tuple[str, str], list[FoldResult]] = {}
    for (s, m, f), res in zip(tasks, results):
        cell = (spec.models[m][0], spec.samplers[s][0])
        if isinstance(res, str):
            errors.setdefault(cell, f"fold {f + 1}: {res}")
        else:
            by_cell.setdefault(cell, []).append(res)
    for cell in order:
        if cell in errors:
            continue
        frs = by_cell[cell]
        folds.extend(frs)
        if spec.aggregation == "mean":
            means[cell] = mean_metrics([fr.metrics for fr in frs])
        else:
            total = ConfusionMatrix()
            for fr in frs:
                total = total + fr.confusion
            means[cell] = compute_metrics(total)

    echo = {
        "seed": spec.seed, "k": spec.k, "threshold": spec.threshold,
        "aggregation": spec.aggregation, "resample_before_cv": spec.resample_before_cv,
        "n_rows": len(base), "n_positive": int(base.y.sum()),
        "samplers": {name: [st.to_dict() for st in stages] for name, stages in spec.samplers},
        "models": {name: cfg.to_dict() for name, cfg in spec.models},
    }
    sizes = [len(fd) for fd in plans[0].folds]
    return ExperimentReport(echo, folds, means, errors, order, sizes)
