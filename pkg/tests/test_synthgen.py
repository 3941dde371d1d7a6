import numpy as np
import pytest

from imbsurv.evaluation import ExperimentSpec, run_experiment
from imbsurv.models import FitConfig
from imbsurv.sampling import SampleSet
from imbsurv.stats import screen_by_anova
from imbsurv.synthgen import (
    CALIBRATED_OVERLAP,
    BlobConfig,
    CatGenConfig,
    calibrate_overlap,
    generate_blobs,
    generate_categorical,
    loo_1nn_accuracy,
)


def test_blob_class_counts():
    d = generate_blobs(BlobConfig(n=1000, minority_frac=0.104, seed=1))
    assert d.counts() == (104, 896)


def test_blobs_deterministic():
    a = generate_blobs(BlobConfig(seed=7))
    b = generate_blobs(BlobConfig(seed=7))
    assert a.equals(b)
    assert not a.equals(generate_blobs(BlobConfig(seed=8)))


def test_blobs_well_separated_at_zero_overlap():
    # 4 sigma between centers; leave-one-out 1-NN rarely errs
    accs = [loo_1nn_accuracy(generate_blobs(BlobConfig(overlap=0.0, seed=s)), balanced=False) for s in range(5)]
    assert min(accs) >= 0.95


def test_blob_config_errors():
    with pytest.raises(ValueError):
        generate_blobs(BlobConfig(n=10, minority_frac=0.01))
    with pytest.raises(ValueError):
        BlobConfig(overlap=1.5)


def test_calibrated_overlap_constant():
    assert calibrate_overlap() == pytest.approx(CALIBRATED_OVERLAP, abs=2e-4)


def test_categorical_counts_and_months():
    ds = generate_categorical(CatGenConfig(n=500, seed=2))
    assert int(ds.labels.sum()) == 52
    assert np.all(ds.months[ds.labels == 1] < 12) and np.all(ds.months[ds.labels == 0] >= 12)


def test_categorical_errors():
    with pytest.raises(ValueError):
        CatGenConfig(categories_per_feature=1)


def test_full_signal_is_learnable():
    ds = generate_categorical(CatGenConfig(n=400, n_features=1, signal_strength=1.0, seed=3))
    spec = ExperimentSpec(SampleSet(ds.codes.astype(float), ds.labels), [("none", [])],
                          [("cart", FitConfig("cart"))], seed=3)
    assert run_experiment(spec).mean("cart", "none").accuracy == 1.0


def test_no_signal_screened_out():
    dropped = 0
    for seed in range(100):
        ds = generate_categorical(CatGenConfig(n=10_000, n_features=1, signal_strength=0.0, seed=seed))
        dropped += screen_by_anova(ds, 0.05).kept == []
    assert dropped >= 90
