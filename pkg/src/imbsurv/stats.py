"""Feature screening statistics: one-way ANOVA with F-distribution p-values
and pairwise Cramér's V.

The F survival function is evaluated through a regularized incomplete beta
implemented here (modified Lentz continued fraction), so the module has no
dependency on scipy.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .data import Dataset
from .errors import DegenerateError

_EPS = 1e-16
_TINY = 1e-300
_MAX_ITER = 10_000


def _betacf(a: float, b: float, x: float) -> float:
    """Continued fraction for I_x(a, b), modified Lentz's method."""
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _TINY:
        d = _TINY
    d = 1.0 / d
    h = d
    for m in range(1, _MAX_ITER + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _TINY:
            d = _TINY
        c = 1.0 + aa / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _TINY:
            d = _TINY
        c = 1.0 + aa / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            return h
    raise ArithmeticError(f"incomplete beta continued fraction did not converge (a={a}, b={b}, x={x})")


def betainc(a: float, b: float, x: float, xc: float | None = None) -> float:
    """Regularized incomplete beta I_x(a, b).

    ``xc`` may carry ``1 - x`` computed without cancellation.
    """
    if a <= 0 or b <= 0:
        raise ValueError("a and b must be positive")
    if xc is None:
        xc = 1.0 - x
    if not (0.0 <= x <= 1.0):
        raise ValueError(f"x must lie in [0, 1], got {x}")
    if x == 0.0:
        return 0.0
    if xc == 0.0:
        return 1.0
    log_front = (
        a * math.log(x) + b * math.log(xc)
        + math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
    )
    front = math.exp(log_front)
    if x <= a / (a + b):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, xc) / b


def f_survival(f: float, d1: int, d2: int) -> float:
    """P(F > f) for an F(d1, d2) variable.

    Computed as I_y(d2/2, d1/2) with y = d2 / (d1 f + d2), which equals
    1 - I_x(d1/2, d2/2) without the subtraction.
    """
    if d1 < 1 or d2 < 1:
        raise ValueError("degrees of freedom must be >= 1")
    f = float(f)
    if math.isnan(f) or f == -math.inf:
        raise ValueError(f"f must be a non-negative number, got {f}")
    if f == math.inf:
        return 0.0
    if f < 0:
        raise ValueError(f"f must be non-negative, got {f}")
    if f == 0.0:
        return 1.0
    denom = d1 * f + d2
    y = d2 / denom
    yc = d1 * f / denom
    p = betainc(d2 / 2.0, d1 / 2.0, y, yc)
    return min(1.0, max(0.0, p))


@dataclass(frozen=True)
class AnovaResult:
    f_stat: float
    df_between: int
    df_within: int
    p_value: float

    @property
    def infinite(self) -> bool:
        return math.isinf(self.f_stat)


def _anova_result(ssb: Fraction, ssw: Fraction, dfb: int, dfw: int) -> AnovaResult:
    if ssb == 0:
        return AnovaResult(0.0, dfb, dfw, 1.0)
    if ssw == 0:
        return AnovaResult(math.inf, dfb, dfw, 0.0)
    f = float((ssb / dfb) / (ssw / dfw))
    return AnovaResult(f, dfb, dfw, f_survival(f, dfb, dfw))


def anova_oneway(*groups) -> AnovaResult:
    """One-way ANOVA of arbitrary numeric responses, one sequence per group.

    Floats are converted to exact fractions, so the sums of squares carry no
    rounding error.
    """
    groups = [[Fraction(v) for v in g] for g in groups if len(g)]
    g = len(groups)
    if g < 2:
        raise DegenerateError("degenerate: one group")
    n_total = sum(len(x) for x in groups)
    if n_total <= g:
        raise DegenerateError("degenerate: no within-group degrees of freedom")
    grand = sum(sum(x) for x in groups) / n_total
    means = [sum(x) / len(x) for x in groups]
    ssb = sum(len(x) * (m - grand) ** 2 for x, m in zip(groups, means))
    ssw = sum(sum((v - m) ** 2 for v in x) for x, m in zip(groups, means))
    return _anova_result(ssb, ssw, g - 1, n_total - g)


def anova_from_groups(counts: Sequence[int], positives: Sequence[int]) -> AnovaResult:
    """One-way ANOVA of a 0/1 response given per-group sizes and positive counts.

    Sums of squares are computed in exact rational arithmetic, so exact
    independence gives F = 0 rather than round-off noise.
    """
    pairs = [(int(n), int(s)) for n, s in zip(counts, positives) if n > 0]
    g = len(pairs)
    if g < 2:
        raise DegenerateError("degenerate: one group")
    n_total = sum(n for n, _ in pairs)
    if n_total <= g:
        raise DegenerateError("degenerate: no within-group degrees of freedom")
    s_total = sum(s for _, s in pairs)
    # 0/1 responses: sum of squares within a group equals the sum itself
    ssw = sum(Fraction(s) - Fraction(s * s, n) for n, s in pairs)
    ssb = sum(Fraction(s * s, n) for n, s in pairs) - Fraction(s_total * s_total, n_total)
    return _anova_result(ssb, ssw, g - 1, n_total - g)


def anova_f(dataset: Dataset, feature: str) -> AnovaResult:
    col = dataset.column(feature)
    size = len(dataset.vocab[dataset.feature_names.index(feature)])
    counts = np.bincount(col, minlength=size)
    pos = np.bincount(col, weights=dataset.labels, minlength=size)
    return anova_from_groups(counts.tolist(), np.rint(pos).astype(np.int64).tolist())


@dataclass(frozen=True)
class FeatureScreen:
    name: str
    f_stat: float
    p_value: float
    decision: str
    degenerate: bool = False


@dataclass
class ScreeningReport:
    alpha: float
    features: list[FeatureScreen]

    @property
    def kept(self) -> list[str]:
        return [f.name for f in self.features if f.decision == "keep"]

    @property
    def dropped(self) -> list[str]:
        return [f.name for f in self.features if f.decision == "drop"]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["feature", "F", "p", "decision"])
        for f in self.features:
            F = "inf" if math.isinf(f.f_stat) else ("nan" if math.isnan(f.f_stat) else repr(f.f_stat))
            decision = "drop (degenerate)" if f.degenerate else f.decision
            w.writerow([f.name, F, repr(f.p_value), decision])
        return buf.getvalue()


def screen_by_anova(dataset: Dataset, alpha: float = 0.05) -> ScreeningReport:
    """Keep features whose ANOVA p-value is at most ``alpha``."""
    if len(dataset) == 0:
        raise ValueError("dataset is empty")
    rows = []
    for name in dataset.feature_names:
        try:
            res = anova_f(dataset, name)
        except DegenerateError:
            rows.append(FeatureScreen(name, math.nan, 1.0, "drop", degenerate=True))
            continue
        rows.append(FeatureScreen(name, res.f_stat, res.p_value, "drop" if res.p_value > alpha else "keep"))
    return ScreeningReport(alpha, rows)


def contingency(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=np.int64)
    b = np.asarray(b, dtype=np.int64)
    table = np.zeros((int(a.max()) + 1, int(b.max()) + 1), dtype=np.int64)
    np.add.at(table, (a, b), 1)
    return table


def cramers_v_table(table) -> float:
    """Cramér's V of an r x c table of observed counts (no bias correction).

    Rows and columns with zero margin are dropped first.
    """
    t = np.asarray(table, dtype=np.float64)
    t = t[t.sum(axis=1) > 0][:, t.sum(axis=0) > 0]
    r, c = t.shape
    if r < 2 or c < 2:
        raise DegenerateError("degenerate association: a variable has one observed category")
    n = t.sum()
    expected = np.outer(t.sum(axis=1), t.sum(axis=0)) / n
    chi2 = float(((t - expected) ** 2 / expected).sum())
    v = math.sqrt(chi2 / (n * (min(r, c) - 1)))
    return min(v, 1.0)


def cramers_v(dataset: Dataset, feature_a: str, feature_b: str) -> float:
    if len(dataset) == 0:
        raise DegenerateError("degenerate association: no rows")
    return cramers_v_table(contingency(dataset.column(feature_a), dataset.column(feature_b)))


@dataclass
class AssociationMatrix:
    names: list[str]
    values: np.ndarray

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow([""] + self.names)
        for name, row in zip(self.names, self.values.tolist()):
            w.writerow([name] + [repr(v) for v in row])
        return buf.getvalue()


def association_matrix(dataset: Dataset) -> AssociationMatrix:
    names = dataset.feature_names
    p = len(names)
    if p < 2:
        raise ValueError("need at least two features")
    for name in names:
        if len(np.unique(dataset.column(name))) < 2:
            raise DegenerateError(f"degenerate association: feature {name!r} has one observed category")
    values = np.eye(p)
    for i in range(p):
        for j in range(i + 1, p):
            values[i, j] = values[j, i] = cramers_v(dataset, names[i], names[j])
    return AssociationMatrix(list(names), values)
