"""Exit criteria of the build. Each test records one PASS/FAIL line that is
printed in the terminal summary under "acceptance criteria"."""

import json
import time

import mpmath
import numpy as np
import pytest
from scipy.optimize import minimize_scalar

from imbsurv.cli import run_cli
from imbsurv.evaluation import ConfusionMatrix, ExperimentSpec, compute_metrics, f1_reciprocal_form, run_experiment
from imbsurv.models import FitConfig, fit_cart, fit_gbdt, predict, split_gain
from imbsurv.sampling import SampleSet, SamplerSpec, SamplerStage, enn, renn, run_pipeline, smote
from imbsurv.stats import cramers_v_table, f_survival
from imbsurv.synthgen import CALIBRATED_OVERLAP, BlobConfig, generate_blobs

pytestmark = pytest.mark.acceptance

# Benchmark settings, fixed before the single pilot run (see README).
BENCH_SEED = 2024
SENSITIVITY_RATIO = 1.5
MIN_SPECIFICITY = 0.5


def test_c1_sampler_arithmetic(criterion):
    with criterion(1, "sampler size arithmetic over 20 seeds", 60) as notes:
        ordered = 0
        for seed in range(20):
            data = generate_blobs(BlobConfig(n=1000, minority_frac=0.104, overlap=CALIBRATED_OVERLAP, seed=seed))
            assert len(smote(data, seed=seed)) == 1792, f"seed {seed}: smote size"
            e, r = enn(data), renn(data)
            ordered += len(r) < len(e) < 1000
            out, log = run_pipeline(SamplerSpec((SamplerStage("renn"), SamplerStage("smote")), seed), data)
            assert len(out) == 2 * log[0]["majority_out"], f"seed {seed}: renn->smote size"
        notes.append(f"|renn|<|enn|<1000 in {ordered}/20 seeds")
        assert ordered >= 18


def _small_dataset(rng):
    n = int(rng.integers(20, 301))
    if rng.random() < 0.5:
        cfg = BlobConfig(n=n, minority_frac=float(rng.uniform(0.1, 0.5)), overlap=float(rng.uniform(0.2, 0.9)),
                         seed=int(rng.integers(0, 2**32)))
        return generate_blobs(cfg)
    X = rng.integers(0, 3, (n, int(rng.integers(1, 5))))
    return SampleSet(X, (rng.random(n) < rng.uniform(0.1, 0.5)).astype(np.int64))


@pytest.mark.filterwarnings("ignore::imbsurv.sampling.SamplingWarning")
def test_c2_renn_fixed_point(criterion):
    with criterion(2, "RENN is a fixed point of ENN and RENN on 50 datasets", 30) as notes:
        rng = np.random.default_rng(2)
        for i in range(50):
            data = _small_dataset(rng)
            r = renn(data)
            assert enn(r).equals(r), f"dataset {i}: enn(renn) differs"
            assert renn(r).equals(r), f"dataset {i}: renn(renn) differs"
        notes.append("50/50 bit-exact")


def test_c3_metric_identities(criterion):
    with criterion(3, "metric identities on 10,000 confusion matrices", 5) as notes:
        rng = np.random.default_rng(3)
        for tp, tn, fp, fn in rng.integers(0, 1000, (10_000, 4)).tolist():
            cm = ConfusionMatrix(tp=tp, tn=tn, fp=fp, fn=fn)
            m = compute_metrics(cm)
            n = tp + tn + fp + fn
            if n:
                assert m.accuracy == (tp + tn) / n
            if tp + fn:
                assert m.sensitivity == tp / (tp + fn)
            if tn + fp:
                assert m.specificity == tn / (tn + fp)
            if tp > 0:
                assert abs(f1_reciprocal_form(cm) - 2 * tp / (2 * tp + fp + fn)) <= 1e-12
                assert abs(m.f1 - 2 * tp / (2 * tp + fp + fn)) <= 1e-12
        notes.append("10000 matrices")


def _f_survival_quad(f, d1, d2):
    with mpmath.workdps(25):
        a, b = mpmath.mpf(d2) / 2, mpmath.mpf(d1) / 2
        y = mpmath.mpf(d2) / (d1 * mpmath.mpf(f) + d2)
        dens = lambda t: t ** (a - 1) * (1 - t) ** (b - 1)
        return float(mpmath.quad(dens, [0, y]) / mpmath.beta(a, b))


def test_c4_f_survival_oracle(criterion):
    with criterion(4, "F survival vs arbitrary-precision quadrature", 30) as notes:
        assert abs(f_survival(1, 1, 1) - 0.5) <= 1e-10
        fs = [0.1, 0.3, 1.0, 2.0, 5.0, 10.0, 30.0, 100.0]
        ds = [1, 2, 3, 5, 8, 12, 20, 30]
        worst = 0.0
        for f in fs:
            for d1 in ds:
                for d2 in ds:
                    worst = max(worst, abs(f_survival(f, d1, d2) - _f_survival_quad(f, d1, d2)))
        notes.append(f"{len(fs) * len(ds) ** 2} grid points, max abs error {worst:.1e}")
        assert worst <= 1e-8


def test_c5_association_oracle(criterion):
    with criterion(5, "Cramer's V oracle values", 5) as notes:
        assert abs(cramers_v_table([[8, 2], [2, 8]]) - 0.6) <= 1e-12
        rng = np.random.default_rng(5)
        for _ in range(100):
            k = int(rng.integers(2, 6))
            counts = rng.integers(1, 30, k)
            assert abs(cramers_v_table(np.diag(counts)) - 1.0) <= 1e-12
            r, c = rng.integers(1, 20, int(rng.integers(2, 6))), rng.integers(1, 20, int(rng.integers(2, 6)))
            assert cramers_v_table(np.outer(r, c)) <= 1e-12
        notes.append("V(X,X)=1 and exact independence=0 on 100 tables each")


def _objective(g, h, lam):
    G, H = float(g.sum()), float(h.sum())
    return minimize_scalar(lambda w: G * w + 0.5 * (H + lam) * w * w, bracket=(-10, 10),
                           options={"xtol": 1e-14}).fun


def test_c6_tree_correctness(criterion):
    with criterion(6, "CART fit, split gain, GBDT monotone loss", 180) as notes:
        rng = np.random.default_rng(6)
        for i in range(100):
            n, p = int(rng.integers(2, 201)), int(rng.integers(1, 6))
            X = rng.integers(0, 4, (n, p)).astype(float)
            # consistent labels: a random function of the row
            table = {}
            y = np.array([table.setdefault(tuple(r), int(rng.integers(0, 2))) for r in X.tolist()])
            m = fit_cart(X, y, FitConfig("cart", max_depth=None))
            assert np.array_equal(predict(m, X), y), f"CART dataset {i}"
        worst = 0.0
        for _ in range(1000):
            n = int(rng.integers(2, 50))
            p = rng.uniform(0.01, 0.99, n)
            y = rng.integers(0, 2, n).astype(float)
            g, h = p - y, p * (1 - p)
            cut, lam = int(rng.integers(1, n)), float(rng.uniform(0, 5))
            brute = _objective(g, h, lam) - _objective(g[:cut], h[:cut], lam) - _objective(g[cut:], h[cut:], lam)
            gain = split_gain(g[:cut].sum(), h[:cut].sum(), g[cut:].sum(), h[cut:].sum(), lam)
            worst = max(worst, abs(gain - brute))
        assert worst <= 1e-9, f"gain error {worst:.2e}"
        for i in range(20):
            n = int(rng.integers(50, 200))
            X = rng.normal(size=(n, 4))
            y = (X[:, 0] + rng.normal(size=n) > 0).astype(int)
            for growth in ("level", "leaf"):
                trace = []
                fit_gbdt(X, y, FitConfig("gbdt", growth=growth, learning_rate=0.1, n_rounds=50), loss_trace=trace)
                assert np.all(np.diff(trace) <= 1e-8), f"GBDT dataset {i} {growth}"
        notes.append(f"100 CART fits exact; max gain error {worst:.1e}; 40 GBDT traces monotone")


@pytest.fixture(scope="module")
def benchmark_report():
    """The criterion 7 run and its wall time in seconds."""
    t0 = time.perf_counter()
    data = generate_blobs(BlobConfig(n=1000, minority_frac=0.104, overlap=CALIBRATED_OVERLAP, seed=BENCH_SEED))
    spec = ExperimentSpec(
        data=data,
        samplers=[("none", []), ("RENN+SMOTE", [SamplerStage("renn"), SamplerStage("smote")])],
        models=[("LGBM", FitConfig("gbdt", growth="leaf"))],
        seed=BENCH_SEED,
        k=5,
    )
    report = run_experiment(spec)
    return report, time.perf_counter() - t0


def test_c7_directional_claim(criterion, benchmark_report):
    report, run_s = benchmark_report
    with criterion(7, "RENN+SMOTE lifts leaf-wise GBDT sensitivity", 300) as notes:
        notes.append(f"CV run {run_s:.1f}s")
        assert run_s < 300
        base = report.mean("LGBM", "none")
        hyb = report.mean("LGBM", "RENN+SMOTE")
        ratio = hyb.sensitivity / base.sensitivity
        notes.append(f"sens {base.sensitivity:.4f} -> {hyb.sensitivity:.4f} (x{ratio:.2f}), spec {hyb.specificity:.4f}")
        assert ratio >= SENSITIVITY_RATIO
        assert hyb.specificity >= MIN_SPECIFICITY


def test_c8_leakage_audit(criterion, benchmark_report):
    report, _ = benchmark_report
    with criterion(8, "no test row in any resampled training set", 300) as notes:
        for fr in report.folds:
            assert fr.leak_count == 0
            assert np.intersect1d(fr.train_ids, fr.test_ids).size == 0
        notes.append(f"{len(report.folds)} folds clean")


def test_c9_determinism(criterion, tmp_path):
    with criterion(9, "evaluate is byte-identical across runs and thread counts", 600) as notes:
        assert run_cli(["synth", "--kind", "categorical", "--n", "1500", "--seed", "9",
                        "--out", str(tmp_path / "cohort.csv")]) == 0
        (tmp_path / "run.toml").write_text(
            'seed = 9\n[data]\npath = "cohort.csv"\n'
            '[samplers]\nnone = []\nENN = [{kind = "enn"}]\n'
            '"RENN+SMOTE" = [{kind = "renn"}, {kind = "smote"}]\n'
            '"SMOTE+RENN" = [{kind = "smote"}, {kind = "renn"}]\n'
            '[models.DT]\nfamily = "cart"\n'
            '[models.RF]\nfamily = "random_forest"\nn_trees = 20\n'
            '[models.ET]\nfamily = "extra_trees"\nn_trees = 20\n'
            '[models.XGB]\nfamily = "gbdt"\ngrowth = "level"\nn_rounds = 30\n'
            '[models.LGBM]\nfamily = "gbdt"\ngrowth = "leaf"\nn_rounds = 30\n')
        blobs = []
        for name, extra in (("a", []), ("b", []), ("c", ["--threads", "4"])):
            assert run_cli(["evaluate", "--config", str(tmp_path / "run.toml"),
                            "--out", str(tmp_path / name)] + extra) == 0
            blobs.append((tmp_path / name / "report.json").read_bytes())
        assert blobs[0] == blobs[1] == blobs[2]
        n_rows = len(json.loads(blobs[0])["rows"])
        notes.append(f"3 runs identical, {n_rows} report rows")
