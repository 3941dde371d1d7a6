import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra import numpy as hnp

from imbsurv.errors import DegenerateError
from imbsurv.neighbors import MetricKind
from imbsurv.sampling import (
    PipelineError,
    SampleSet,
    SamplerSpec,
    SamplerStage,
    SamplingWarning,
    enn,
    renn,
    run_pipeline,
    smote,
)
from imbsurv.synthgen import BlobConfig, generate_blobs


def line(majority, minority):
    X = np.array([[v] for v in list(majority) + list(minority)], dtype=float)
    y = np.array([0] * len(majority) + [1] * len(minority))
    return SampleSet(X, y)


def values(data, label):
    return sorted(data.X[data.y == label, 0].tolist())


def test_enn_majority_vote_example():
    # 10.5 has neighbours 10, 11, 12: all minority
    out = enn(line([0, 1, 2, 10.5], [10, 11, 12]), k=3, strict_unanimous=False)
    assert values(out, 0) == [0, 1, 2]
    assert values(out, 1) == [10, 11, 12]


def test_enn_unanimity_is_stricter():
    # 6.5 has neighbours 4, 3 and 10: one disagreement removes it only by default
    data = line([0, 1, 2, 3, 4, 6.5], [10, 11, 12])
    assert values(enn(data, k=3, strict_unanimous=False), 0) == [0, 1, 2, 3, 4, 6.5]
    assert values(enn(data, k=3), 0) == [0, 1, 2, 3, 4]


def test_enn_even_split_counts_as_agreement():
    # 0 has neighbours 1 (majority) and 3 (minority), 1 vs 1 with k = 2
    out = enn(line([0, 1, -5, -6], [3, 4]), k=2, strict_unanimous=False)
    assert 0.0 in values(out, 0)


def test_enn_single_class_warns_and_returns_input():
    data = line([0, 1, 2, 3], [])
    with pytest.warns(SamplingWarning):
        out = enn(data, k=2)
    assert out.equals(data)


def test_enn_keeps_minority_outlier():
    out = enn(line([0, 1, 2, 3, 4, 5], [2.5]), k=3)
    assert values(out, 1) == [2.5]


def test_enn_k_too_large():
    with pytest.raises(ValueError, match="k exceeds"):
        enn(line([0, 1], [2]), k=3)


def test_renn_single_pass_fixed_point():
    data = line([0, 1, 2, 10.5], [10, 11, 12])
    out, passes = renn(data, k=3, strict_unanimous=False, return_passes=True)
    assert out.equals(enn(data, k=3, strict_unanimous=False))
    assert passes == [1, 0]


def test_renn_single_class_no_removals():
    data = line([], [0, 1, 2, 3])
    with pytest.warns(SamplingWarning):
        out, passes = renn(data, k=2, return_passes=True)
    assert out.equals(data) and passes == []


@pytest.mark.parametrize("seed", [0, 1])
def test_renn_smaller_than_enn_in_overlap_regime(seed):
    data = generate_blobs(BlobConfig(seed=seed))
    e, r = enn(data), renn(data)
    assert len(r) < len(e) < len(data)


def test_smote_balances_to_majority():
    data = generate_blobs(BlobConfig(seed=3))
    out = smote(data, seed=3)
    assert len(out) == 1792
    assert out.counts() == (896, 896)
    # originals preserved verbatim and first
    assert np.array_equal(out.X[:1000], data.X)
    assert out.synthetic.sum() == 792
    assert np.all(out.ids[out.synthetic] == -1)


def test_smote_identical_categorical_rows():
    X = np.array([[0, 0]] * 6 + [[2, 1]] * 3, dtype=np.int64)
    y = np.array([0] * 6 + [1] * 3)
    out = smote(SampleSet(X, y), k=2)
    assert np.all(out.X[out.synthetic] == [2, 1])
    assert out.X.dtype == np.int64


def test_smote_continuous_segment():
    X = np.array([[5.0, -5.0]] * 6 + [[0.0, 0.0], [1.0, 1.0]])
    y = np.array([0] * 6 + [1] * 2)
    out = smote(SampleSet(X, y), k=1, seed=4)
    new = out.X[out.synthetic]
    assert len(new) == 4
    assert np.all(new[:, 0] == new[:, 1])
    assert np.all((new >= 0) & (new <= 1))


def test_smote_target_ratio_and_identity():
    data = line(range(10), [20, 21, 22])
    assert smote(data, k=2, target_ratio=0.5).counts() == (5, 10)
    assert smote(data, k=2, target_ratio=0.3).equals(data)


def test_smote_errors():
    with pytest.raises(DegenerateError, match="cannot synthesize"):
        smote(line(range(5), [9]), k=1)
    with pytest.raises(ValueError, match="k exceeds"):
        smote(line(range(5), [8, 9]), k=2)


def test_smote_heom_votes_categorical_columns():
    X = np.array([[0, 0.0]] * 8 + [[1, 10.0], [1, 11.0], [1, 12.0]])
    y = np.array([0] * 8 + [1] * 3)
    m = MetricKind.heom([True, False], [1.0, 12.0])
    out = smote(SampleSet(X, y, metric=m), k=2, seed=1)
    new = out.X[out.synthetic]
    assert np.all(new[:, 0] == 1.0)
    assert np.all((new[:, 1] >= 10.0) & (new[:, 1] <= 12.0))


def test_pipeline_empty_is_identity():
    data = line([0, 1, 2], [5, 6])
    out, log = run_pipeline(SamplerSpec((), 0), data)
    assert out.equals(data) and log == []


def test_pipeline_renn_then_smote_doubles_majority():
    data = generate_blobs(BlobConfig(seed=5))
    out, log = run_pipeline(SamplerSpec((SamplerStage("renn"), SamplerStage("smote")), 5), data)
    assert len(out) == 2 * log[0]["majority_out"]
    assert [e["kind"] for e in log] == ["renn", "smote"]
    assert log[1]["n_in"] == log[0]["n_out"]


def test_pipeline_smote_then_renn_bounds():
    data = generate_blobs(BlobConfig(seed=6))
    out, _ = run_pipeline(SamplerSpec((SamplerStage("smote"), SamplerStage("renn")), 6), data)
    n_min, n_maj = out.counts()
    assert len(out) <= 1792 and n_maj <= 896
    assert n_min == 896  # synthetic minority rows are never removed


def test_pipeline_deterministic():
    data = generate_blobs(BlobConfig(seed=8))
    spec = SamplerSpec((SamplerStage("enn"), SamplerStage("smote", target_ratio=0.8)), 42)
    a, la = run_pipeline(spec, data)
    b, lb = run_pipeline(spec, data)
    assert a.equals(b) and la == lb


def test_pipeline_error_names_stage():
    with pytest.raises(PipelineError) as info:
        run_pipeline(SamplerSpec((SamplerStage("smote", k=5),), 0), line(range(5), [8, 9]))
    assert info.value.stage == 0 and info.value.kind == "smote"


def test_stage_validation():
    with pytest.raises(ValueError):
        SamplerStage("tomek")
    with pytest.raises(ValueError):
        SamplerStage("smote", target_ratio=1.5)


@st.composite
def small_sets(draw):
    n = draw(st.integers(8, 60))
    X = draw(hnp.arrays(np.int64, (n, draw(st.integers(1, 3))), elements=st.integers(0, 2)))
    y = draw(hnp.arrays(np.int64, n, elements=st.integers(0, 1)))
    return SampleSet(X, y)


@pytest.mark.filterwarnings("ignore::imbsurv.sampling.SamplingWarning")
@settings(max_examples=60, deadline=None)
@given(small_sets(), st.integers(1, 5), st.booleans())
def test_renn_reaches_fixed_point(data, k, unanimous):
    out = renn(data, k=k, strict_unanimous=unanimous)
    if len(out) - 1 >= k and 0 < out.y.sum() < len(out):
        assert enn(out, k=k, strict_unanimous=unanimous).equals(out)
    # only majority rows leave, minority rows are untouched
    assert out.counts()[0] == data.counts()[0]


@settings(max_examples=60, deadline=None)
@given(small_sets(), st.integers(1, 3), st.floats(0.1, 1.0), st.integers(0, 2**32))
def test_smote_invariants(data, k, ratio, seed):
    m, M = data.counts()
    if m < k + 1:
        return
    out = smote(data, k=k, target_ratio=ratio, seed=seed)
    assert out.counts()[1] == M
    assert out.counts()[0] == max(m, int(np.ceil(round(ratio * M, 9))))
    assert np.array_equal(out.X[: len(data)], data.X)
    # voted categorical rows stay inside the observed minority vocabulary per column
    minority = data.X[data.y == 1]
    for j in range(data.X.shape[1]):
        assert set(out.X[out.synthetic, j]) <= set(minority[:, j])
