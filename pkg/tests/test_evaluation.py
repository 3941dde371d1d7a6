import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from imbsurv.evaluation import (
    REPORT_COLUMNS,
    ConfusionMatrix,
    ExperimentSpec,
    compute_metrics,
    confusion,
    f1_reciprocal_form,
    mean_metrics,
    run_experiment,
    stratified_folds,
)
from imbsurv.models import FitConfig
from imbsurv.sampling import SamplerStage
from imbsurv.synthgen import BlobConfig, generate_blobs


def test_folds_divide_evenly():
    y = np.array([1] * 10 + [0] * 90)
    plan = stratified_folds(y, 5, seed=3)
    for f in plan.folds:
        assert (y[f] == 1).sum() == 2 and (y[f] == 0).sum() == 18


def test_single_positive_lands_in_one_fold():
    y = np.array([1] + [0] * 9)
    plan = stratified_folds(y, 5, seed=0)
    assert sum(0 in f for f in plan.folds) == 1
    assert plan.flags


def test_folds_deterministic_and_partition():
    y = np.random.default_rng(0).integers(0, 2, 57)
    a, b = stratified_folds(y, 5, 11), stratified_folds(y, 5, 11)
    assert all(np.array_equal(x, z) for x, z in zip(a.folds, b.folds))
    assert sorted(np.concatenate(a.folds).tolist()) == list(range(57))
    sizes = [len(f) for f in a.folds]
    assert max(sizes) - min(sizes) <= 1


def test_folds_k_too_large():
    with pytest.raises(ValueError):
        stratified_folds([0, 1, 0], 5)


def test_confusion_examples():
    assert confusion([1, 1, 0, 0], [1, 0, 1, 0]) == ConfusionMatrix(tp=1, tn=1, fp=1, fn=1)
    cm = confusion([1, 0, 1], [1, 0, 1])
    assert cm.fp == cm.fn == 0
    with pytest.raises(ValueError):
        confusion([1, 0], [1])


def test_empty_confusion_is_undefined():
    m = compute_metrics(confusion([], []))
    assert m.accuracy is None and m.sensitivity is None and m.specificity is None and m.f1 is None


def test_metric_examples():
    m = compute_metrics(ConfusionMatrix(tp=1, tn=1, fp=1, fn=1))
    assert (m.accuracy, m.sensitivity, m.specificity, m.f1) == (0.5, 0.5, 0.5, 0.5)
    m = compute_metrics(ConfusionMatrix(tp=50, fp=30, fn=20, tn=100))
    assert m.accuracy == pytest.approx(0.75)
    assert m.sensitivity == pytest.approx(0.714286, abs=1e-6)
    assert m.specificity == pytest.approx(0.769231, abs=1e-6)
    assert m.f1 == pytest.approx(0.666667, abs=1e-6)
    m = compute_metrics(ConfusionMatrix(tp=0, fn=5, fp=0, tn=5))
    assert (m.sensitivity, m.f1, m.specificity, m.accuracy) == (0.0, 0.0, 1.0, 0.5)


@settings(max_examples=300)
@given(st.integers(1, 10**6), st.integers(0, 10**6), st.integers(0, 10**6), st.integers(0, 10**6))
def test_f1_forms_agree(tp, fp, fn, tn):
    cm = ConfusionMatrix(tp=tp, tn=tn, fp=fp, fn=fn)
    assert compute_metrics(cm).f1 == pytest.approx(f1_reciprocal_form(cm), abs=1e-12)


def test_mean_skips_undefined():
    a = compute_metrics(ConfusionMatrix(tp=0, tn=4))
    b = compute_metrics(ConfusionMatrix(tp=1, fn=1, tn=2))
    assert mean_metrics([a, b]).sensitivity == 0.5


def _blobs(seed=0, n=300):
    return generate_blobs(BlobConfig(n=n, seed=seed))


def _spec(**kw):
    base = dict(
        data=_blobs(),
        samplers=[("none", []), ("RENN+SMOTE", [SamplerStage("renn"), SamplerStage("smote")])],
        models=[("cart", FitConfig("cart", max_depth=4))],
        seed=5,
    )
    base.update(kw)
    return ExperimentSpec(**base)


def test_majority_baseline_rates():
    rep = run_experiment(_spec(samplers=[("none", [])], models=[("base", FitConfig("majority"))]))
    for fr in rep.folds:
        assert fr.metrics.sensitivity == 0.0 and fr.metrics.specificity == 1.0


def test_report_layout_and_determinism():
    a = run_experiment(_spec())
    b = run_experiment(_spec(), threads=3)
    assert a.to_json() == b.to_json() and a.to_csv() == b.to_csv()
    lines = a.to_csv().splitlines()
    assert lines[0] == ",".join(REPORT_COLUMNS)
    assert [l.split(",")[2] for l in lines[1:7]] == ["1", "2", "3", "4", "5", "mean"]
    assert lines[7].split(",")[1] == "RENN+SMOTE"
    json.loads(a.to_json())


def test_no_leakage_into_training_folds():
    rep = run_experiment(_spec())
    for fr in rep.folds:
        assert fr.leak_count == 0
        assert not np.intersect1d(fr.train_ids, fr.test_ids).size
        assert fr.n_train + fr.n_test == 300


def test_resample_before_cv_leaks_synthetics_only():
    rep = run_experiment(_spec(resample_before_cv=True))
    smote_cells = [fr for fr in rep.folds if fr.sampler == "RENN+SMOTE"]
    assert all(fr.leak_count == 0 for fr in smote_cells)
    assert rep.spec_echo["resample_before_cv"] is True


def test_pooled_aggregation():
    rep = run_experiment(_spec(aggregation="pooled", samplers=[("none", [])]))
    total = ConfusionMatrix()
    for fr in rep.folds:
        total = total + fr.confusion
    assert rep.mean("cart", "none") == compute_metrics(total)


def test_failing_cell_is_isolated():
    # k=200 neighbours cannot exist in a training fold of 240 rows with 25 minority
    bad = [SamplerStage("smote", k=200)]
    rep = run_experiment(_spec(samplers=[("none", []), ("bad", bad)]))
    assert ("cart", "bad") in rep.errors
    assert rep.mean("cart", "none").accuracy is not None
    assert "error" in rep.to_csv()


def test_spec_validation():
    with pytest.raises(ValueError):
        _spec(samplers=[("a", []), ("a", [])])
    with pytest.raises(ValueError):
        _spec(aggregation="median")
