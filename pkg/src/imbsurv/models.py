"""Tree classifiers: CART, random forest / extra trees, and gradient-boosted
trees with level-wise or leaf-wise growth.

All learners work on a numeric matrix. Categorical data enters through
:func:`encode_onehot`. Split search is exact: every feature is reduced to its
sorted distinct values once per tree, and each node aggregates counts (or
gradients) per distinct value, so every midpoint between neighbouring values
present in a node is a candidate.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, fields
from typing import Optional, Sequence, Union

import numpy as np

from ._rng import check_seed, stream
from .data import Dataset
from .errors import ConfigError, DegenerateError

FAMILIES = ("cart", "random_forest", "extra_trees", "gbdt", "majority")
MODEL_FORMAT = "imbsurv-model"
MODEL_VERSION = 1
AUTO = "auto"


# --------------------------------------------------------------------------
# encoding


@dataclass
class OneHotEncoding:
    """Maps integer category codes to indicator columns, ordered by
    (feature, vocabulary position)."""

    feature_names: list[str]
    vocab: list[list[str]]

    @property
    def offsets(self) -> np.ndarray:
        return np.concatenate([[0], np.cumsum([len(v) for v in self.vocab])]).astype(np.int64)

    @property
    def n_columns(self) -> int:
        return int(self.offsets[-1])

    @property
    def empty_features(self) -> list[str]:
        return [n for n, v in zip(self.feature_names, self.vocab) if not v]

    def column_names(self) -> list[str]:
        return [f"{n}={c}" for n, v in zip(self.feature_names, self.vocab) for c in v]

    def transform(self, codes) -> np.ndarray:
        codes = np.asarray(codes, dtype=np.int64)
        if codes.ndim != 2 or codes.shape[1] != len(self.vocab):
            raise ValueError(f"expected {len(self.vocab)} code columns")
        X = np.zeros((codes.shape[0], self.n_columns))
        off = self.offsets
        for j, size in enumerate(len(v) for v in self.vocab):
            col = codes[:, j]
            ok = (col >= 0) & (col < size)
            X[np.flatnonzero(ok), off[j] + col[ok]] = 1.0
        return X

    def inverse(self, X) -> np.ndarray:
        X = np.asarray(X)
        off = self.offsets
        out = np.empty((X.shape[0], len(self.vocab)), dtype=np.int64)
        for j in range(len(self.vocab)):
            block = X[:, off[j] : off[j + 1]]
            if block.shape[1] == 0 or not np.all(block.sum(axis=1) == 1):
                raise ValueError(f"row is not a valid one-hot encoding for feature {self.feature_names[j]!r}")
            out[:, j] = block.argmax(axis=1)
        return out

    def codes_from_text(self, rows: Sequence[Sequence[str]]) -> np.ndarray:
        """Encode text rows; unseen categories map to ``Others`` when the
        vocabulary has it, otherwise to code -1 (all-zero indicators)."""
        lookups = [{c: i for i, c in enumerate(v)} for v in self.vocab]
        out = np.empty((len(rows), len(self.vocab)), dtype=np.int64)
        for i, row in enumerate(rows):
            for j, cell in enumerate(row):
                lk = lookups[j]
                out[i, j] = lk.get(cell, lk.get("Others", -1))
        return out

    def to_dict(self) -> dict:
        return {"features": self.feature_names, "vocab": self.vocab}

    @classmethod
    def from_dict(cls, d) -> "OneHotEncoding":
        return cls(list(d["features"]), [list(v) for v in d["vocab"]])


def encode_onehot(dataset: Dataset) -> tuple[np.ndarray, OneHotEncoding]:
    enc = OneHotEncoding(list(dataset.feature_names), [list(v) for v in dataset.vocab])
    return enc.transform(dataset.codes), enc


# --------------------------------------------------------------------------
# configuration


@dataclass
class FitConfig:
    """Hyperparameters for every family. Fields set to ``"auto"`` resolve to
    family defaults; ``max_depth=None`` means unlimited depth."""

    family: str = "cart"
    max_depth: Union[int, None, str] = AUTO
    min_samples_leaf: Union[int, str] = AUTO
    n_trees: int = 100
    feature_subsample: Union[float, str] = AUTO
    bootstrap: bool = True
    n_rounds: int = 100
    learning_rate: float = 0.1
    growth: str = "level"
    max_leaves: int = 31
    l2_lambda: float = 1.0
    min_child_hessian: float = 1e-3
    seed: int = 0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ConfigError(f"unknown model family {self.family!r}", key="family")
        if self.growth not in ("level", "leaf"):
            raise ConfigError(f"growth must be 'level' or 'leaf', got {self.growth!r}", key="growth")
        if self.max_depth == AUTO:
            if self.family == "gbdt":
                self.max_depth = 6 if self.growth == "level" else None
            else:
                self.max_depth = 12
        if self.min_samples_leaf == AUTO:
            self.min_samples_leaf = 1 if self.family == "cart" else 5
        if self.max_depth is not None and (not isinstance(self.max_depth, int) or self.max_depth < 1):
            raise ConfigError("max_depth must be a positive integer or None", key="max_depth")
        for name in ("min_samples_leaf", "n_trees", "n_rounds", "max_leaves"):
            v = getattr(self, name)
            if not isinstance(v, int) or isinstance(v, bool) or v < 1:
                raise ConfigError(f"{name} must be an integer >= 1", key=name)
        if self.growth == "leaf" and self.max_leaves < 2 and self.family == "gbdt":
            raise ConfigError("max_leaves must be >= 2", key="max_leaves")
        if not 0 < self.learning_rate <= 1:
            raise ConfigError("learning_rate must lie in (0, 1]", key="learning_rate")
        if self.feature_subsample != AUTO and not 0 < float(self.feature_subsample) <= 1:
            raise ConfigError("feature_subsample must lie in (0, 1]", key="feature_subsample")
        if self.l2_lambda < 0:
            raise ConfigError("l2_lambda must be >= 0", key="l2_lambda")
        if self.min_child_hessian < 0:
            raise ConfigError("min_child_hessian must be >= 0", key="min_child_hessian")
        try:
            check_seed(self.seed)
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc), key="seed") from None

    def features_per_split(self, p: int) -> int:
        fs = self.feature_subsample
        if fs == AUTO:
            fs = math.sqrt(p) / p if self.family == "random_forest" and p > 0 else 1.0
        return max(1, min(p, int(round(float(fs) * p))))

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "FitConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            key = sorted(unknown)[0]
            raise ConfigError(f"unknown model option {key!r}", key=key)
        return cls(**d)


# --------------------------------------------------------------------------
# tree structure


@dataclass
class Tree:
    """Flat binary tree. Leaves have ``feature == -1``; rows go left when
    ``x[feature] <= threshold``."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    count: np.ndarray

    @classmethod
    def from_nodes(cls, nodes: list[list]) -> "Tree":
        cols = list(zip(*nodes))
        return cls(
            np.array(cols[0], dtype=np.int64), np.array(cols[1], dtype=np.float64),
            np.array(cols[2], dtype=np.int64), np.array(cols[3], dtype=np.int64),
            np.array(cols[4], dtype=np.float64), np.array(cols[5], dtype=np.int64),
        )

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    @property
    def n_leaves(self) -> int:
        return int((self.feature < 0).sum())

    @property
    def depth(self) -> int:
        depth = np.zeros(self.n_nodes, dtype=np.int64)
        for i in range(self.n_nodes):
            if self.feature[i] >= 0:
                depth[self.left[i]] = depth[self.right[i]] = depth[i] + 1
        return int(depth.max())

    def apply(self, X: np.ndarray) -> np.ndarray:
        node = np.zeros(X.shape[0], dtype=np.int64)
        active = np.flatnonzero(self.feature[node] >= 0)
        while active.size:
            nd = node[active]
            go_left = X[active, self.feature[nd]] <= self.threshold[nd]
            node[active] = np.where(go_left, self.left[nd], self.right[nd])
            active = active[self.feature[node[active]] >= 0]
        return node

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self.value[self.apply(X)]

    def to_dict(self) -> dict:
        return {
            "feature": self.feature.tolist(), "threshold": self.threshold.tolist(),
            "left": self.left.tolist(), "right": self.right.tolist(),
            "value": self.value.tolist(), "count": self.count.tolist(),
        }

    @classmethod
    def from_dict(cls, d) -> "Tree":
        return cls(
            np.array(d["feature"], dtype=np.int64), np.array(d["threshold"], dtype=np.float64),
            np.array(d["left"], dtype=np.int64), np.array(d["right"], dtype=np.int64),
            np.array(d["value"], dtype=np.float64), np.array(d["count"], dtype=np.int64),
        )


class _Binned:
    """Per-feature sorted distinct values and the value index of every row."""

    def __init__(self, X: np.ndarray):
        self.p = X.shape[1]
        self.uniq = [np.unique(X[:, f]) for f in range(self.p)]
        self.codes = np.empty(X.shape, dtype=np.int64)
        for f, u in enumerate(self.uniq):
            self.codes[:, f] = np.searchsorted(u, X[:, f])
        sizes = [len(u) for u in self.uniq]
        self.offsets = np.concatenate([[0], np.cumsum(sizes)]).astype(np.int64)
        self._flat = self.codes + self.offsets[:-1]

    def hist(self, rows: np.ndarray, *weights: np.ndarray) -> list[np.ndarray]:
        """Per-bin sums over ``rows``: counts first, then each weight vector."""
        flat = self._flat[rows].ravel()
        total = int(self.offsets[-1])
        out = [np.bincount(flat, minlength=total).astype(np.float64)]
        for w in weights:
            out.append(np.bincount(flat, weights=np.repeat(w[rows], self.p), minlength=total))
        return out

    def segment(self, f: int, arrays):
        s = slice(self.offsets[f], self.offsets[f + 1])
        cnt = arrays[0][s]
        present = cnt > 0
        return self.uniq[f][present], [a[s][present] for a in arrays]


def _midpoint(lo: float, hi: float) -> float:
    mid = (lo + hi) / 2.0
    return lo if mid >= hi else mid


# --------------------------------------------------------------------------
# CART and forests


def _gini_score(pl, nl, pr, nr):
    """Sum over children of (sum of squared class counts) / size. Larger is
    better; weighted Gini impurity equals 1 - score / n."""
    return (pl * pl + (nl - pl) ** 2) / nl + (pr * pr + (nr - pr) ** 2) / nr


def _best_class_split(binned: _Binned, hists, feats, msl, rng=None):
    """Best (score, feature, threshold) over ``feats``; None if no admissible
    split. ``rng`` switches to one random threshold per feature."""
    best = None
    for f in feats:
        vals, (cnt, pos) = binned.segment(f, hists)
        if len(vals) < 2:
            continue
        N, P = cnt.sum(), pos.sum()
        cumc = np.cumsum(cnt)[:-1]
        cump = np.cumsum(pos)[:-1]
        if rng is not None:
            thr = float(rng.uniform(vals[0], vals[-1]))
            j = int(np.searchsorted(vals, thr, side="right")) - 1
            nl, pl = cumc[j], cump[j]
            if nl < msl or N - nl < msl:
                continue
            score = _gini_score(pl, nl, P - pl, N - nl)
        else:
            valid = (cumc >= msl) & (N - cumc >= msl)
            if not valid.any():
                continue
            scores = np.full(len(cumc), -np.inf)
            nl, pl = cumc[valid], cump[valid]
            scores[valid] = _gini_score(pl, nl, P - pl, N - nl)
            j = int(np.argmax(scores))
            score = scores[j]
            thr = _midpoint(vals[j], vals[j + 1])
        if best is None or score > best[0]:
            best = (float(score), f, thr)
    return best


def _grow_classifier(X: np.ndarray, y: np.ndarray, cfg: FitConfig, rng=None, random_thresholds=False) -> Tree:
    n, p = X.shape
    binned = _Binned(X)
    yf = y.astype(np.float64)
    m = cfg.features_per_split(p)
    msl = cfg.min_samples_leaf
    nodes: list[list] = []
    stack = [(np.arange(n), 0, None, None)]
    while stack:
        rows, depth, parent, side = stack.pop()
        nid = len(nodes)
        if parent is not None:
            nodes[parent][2 if side == 0 else 3] = nid
        pos = float(yf[rows].sum())
        value = pos / len(rows)
        nodes.append([-1, 0.0, -1, -1, value, len(rows)])
        if pos == 0 or pos == len(rows) or (cfg.max_depth is not None and depth >= cfg.max_depth) or len(rows) < 2 * msl:
            continue
        hists = binned.hist(rows, yf)
        thr_rng = rng if random_thresholds else None
        if m < p:
            perm = rng.permutation(p)
            best = _best_class_split(binned, hists, sorted(perm[:m].tolist()), msl, thr_rng)
            # no admissible split among the sampled features: keep drawing
            for f in perm[m:].tolist():
                if best is not None:
                    break
                best = _best_class_split(binned, hists, [f], msl, thr_rng)
        else:
            best = _best_class_split(binned, hists, range(p), msl, thr_rng)
        if best is None:
            continue
        _, f, thr = best
        go_left = X[rows, f] <= thr
        nodes[nid][0], nodes[nid][1] = f, thr
        # push right first so the left subtree is numbered first
        stack.append((rows[~go_left], depth + 1, nid, 1))
        stack.append((rows[go_left], depth + 1, nid, 0))
    return Tree.from_nodes(nodes)


def _check_xy(X, y):
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise ValueError("X must be a non-empty 2-D matrix")
    if X.shape[1] == 0:
        raise ValueError("X has no feature columns")
    if y.shape != (X.shape[0],):
        raise ValueError("X and y differ in length")
    if not np.isin(y, (0, 1)).all():
        raise ValueError("labels must be 0 or 1")
    return X, y


# --------------------------------------------------------------------------
# models


@dataclass
class _BaseModel:
    n_features: int
    config: FitConfig
    encoding: Optional[OneHotEncoding] = field(default=None, kw_only=True)

    def _check(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise ValueError(f"expected {self.n_features} columns, got shape {X.shape}")
        return X

    def predict_proba(self, X) -> np.ndarray:
        raise NotImplementedError

    def predict(self, X, threshold: float = 0.5) -> np.ndarray:
        return predict(self, X, threshold)


@dataclass
class MajorityModel(_BaseModel):
    """Constant baseline: always the training majority class."""

    probability: float = 0.0

    def predict_proba(self, X):
        X = self._check(X)
        return np.full(X.shape[0], self.probability)


@dataclass
class CartModel(_BaseModel):
    tree: Tree = None

    def predict_proba(self, X):
        return self.tree.predict(self._check(X))


@dataclass
class ForestModel(_BaseModel):
    trees: list[Tree] = field(default_factory=list)
    mode: str = "random_forest"

    def predict_proba(self, X):
        X = self._check(X)
        return np.mean(np.stack([t.predict(X) for t in self.trees]), axis=0)


@dataclass
class GbdtModel(_BaseModel):
    base_score: float = 0.0
    learning_rate: float = 0.1
    trees: list[Tree] = field(default_factory=list)

    def decision_function(self, X) -> np.ndarray:
        X = self._check(X)
        score = np.full(X.shape[0], self.base_score)
        for t in self.trees:
            score += self.learning_rate * t.predict(X)
        return score

    def predict_proba(self, X):
        return _sigmoid(self.decision_function(X))


Model = Union[MajorityModel, CartModel, ForestModel, GbdtModel]


def fit_majority(X, y, config: Optional[FitConfig] = None) -> MajorityModel:
    X, y = _check_xy(X, y)
    cfg = config or FitConfig(family="majority")
    return MajorityModel(X.shape[1], cfg, probability=1.0 if 2 * y.sum() > len(y) else 0.0)


def fit_cart(X, y, config: Optional[FitConfig] = None) -> CartModel:
    """Greedy Gini CART.

    Any split with two admissible children is accepted, including zero-gain
    ones; growth stops on pure nodes, ``max_depth``, ``min_samples_leaf`` or
    when every feature is constant in the node.
    """
    X, y = _check_xy(X, y)
    cfg = config or FitConfig(family="cart")
    return CartModel(X.shape[1], cfg, tree=_grow_classifier(X, y, cfg))


def fit_forest(X, y, config: FitConfig, mode: Optional[str] = None) -> ForestModel:
    """Bagged trees.

    ``random_forest``: bootstrap rows (unless ``bootstrap=False``) and sample
    features at every split. ``extra_trees``: all rows, one uniform random
    threshold per candidate feature, best candidate kept. Tree ``t`` uses the
    stream ``(seed, t)``.
    """
    X, y = _check_xy(X, y)
    mode = mode or config.family
    if mode not in ("random_forest", "extra_trees"):
        raise ValueError(f"unknown forest mode {mode!r}")
    n = X.shape[0]
    trees = []
    for t in range(config.n_trees):
        rng = stream(config.seed, t)
        if mode == "random_forest" and config.bootstrap:
            idx = rng.integers(0, n, size=n)
            trees.append(_grow_classifier(X[idx], y[idx], config, rng))
        else:
            trees.append(_grow_classifier(X, y, config, rng, random_thresholds=mode == "extra_trees"))
    return ForestModel(X.shape[1], config, trees=trees, mode=mode)


# --------------------------------------------------------------------------
# gradient boosting


def _sigmoid(z):
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def log_loss(y, p) -> float:
    p = np.clip(np.asarray(p, dtype=np.float64), 1e-300, 1 - 1e-16)
    y = np.asarray(y, dtype=np.float64)
    return float(-np.mean(y * np.log(p) + (1 - y) * np.log1p(-p)))


def log_loss_from_scores(y, score) -> float:
    """Mean binomial log-loss computed stably from raw scores."""
    y = np.asarray(y, dtype=np.float64)
    s = np.asarray(score, dtype=np.float64)
    return float(np.mean(np.logaddexp(0.0, s) - y * s))


def split_gain(GL: float, HL: float, GR: float, HR: float, lam: float) -> float:
    """Second-order gain of splitting a leaf into (L, R)."""
    return 0.5 * (GL * GL / (HL + lam) + GR * GR / (HR + lam) - (GL + GR) ** 2 / (HL + HR + lam))


def leaf_weight(G: float, H: float, lam: float) -> float:
    return -G / (H + lam)


def _best_gbdt_split(binned: _Binned, rows, g, h, cfg: FitConfig):
    """Best (gain, feature, threshold) for a node; None if nothing admissible."""
    hists = binned.hist(rows, g, h)
    lam = cfg.l2_lambda
    msl, mch = cfg.min_samples_leaf, cfg.min_child_hessian
    best = None
    for f in range(binned.p):
        vals, (cnt, gs, hs) = binned.segment(f, hists)
        if len(vals) < 2:
            continue
        N, G, H = cnt.sum(), gs.sum(), hs.sum()
        cn = np.cumsum(cnt)[:-1]
        GL = np.cumsum(gs)[:-1]
        HL = np.cumsum(hs)[:-1]
        GR, HR = G - GL, H - HL
        valid = (cn >= msl) & (N - cn >= msl) & (HL >= mch) & (HR >= mch)
        if not valid.any():
            continue
        gains = np.full(len(cn), -np.inf)
        gains[valid] = split_gain(GL[valid], HL[valid], GR[valid], HR[valid], lam)
        j = int(np.argmax(gains))
        if best is None or gains[j] > best[0]:
            best = (float(gains[j]), f, _midpoint(vals[j], vals[j + 1]))
    return best


def _grow_gbdt_tree(X, binned: _Binned, g, h, cfg: FitConfig) -> Tree:
    lam = cfg.l2_lambda
    nodes: list[list] = []

    def new_node(rows):
        nodes.append([-1, 0.0, -1, -1, leaf_weight(g[rows].sum(), h[rows].sum(), lam), len(rows)])
        return len(nodes) - 1

    def split(nid, rows, cand):
        _, f, thr = cand
        go_left = X[rows, f] <= thr
        lrows, rrows = rows[go_left], rows[~go_left]
        nodes[nid][0], nodes[nid][1] = f, thr
        nodes[nid][2] = new_node(lrows)
        nodes[nid][3] = new_node(rrows)
        return (nodes[nid][2], lrows), (nodes[nid][3], rrows)

    root_rows = np.arange(X.shape[0])
    root = new_node(root_rows)
    if cfg.growth == "level":
        level = [(root, root_rows)]
        depth = 0
        while level and (cfg.max_depth is None or depth < cfg.max_depth):
            nxt = []
            for nid, rows in level:
                cand = _best_gbdt_split(binned, rows, g, h, cfg)
                if cand is not None and cand[0] > 0:
                    nxt.extend(split(nid, rows, cand))
            level = nxt
            depth += 1
    else:
        depth_of = {root: 0}
        frontier = {}

        def consider(nid, rows):
            if cfg.max_depth is not None and depth_of[nid] >= cfg.max_depth:
                return
            cand = _best_gbdt_split(binned, rows, g, h, cfg)
            if cand is not None and cand[0] > 0:
                frontier[nid] = (cand, rows)

        consider(root, root_rows)
        n_leaves = 1
        while frontier and n_leaves < cfg.max_leaves:
            # highest gain; ties go to the earliest-created leaf
            nid = min(frontier, key=lambda k: (-frontier[k][0][0], k))
            cand, rows = frontier.pop(nid)
            for child, crows in split(nid, rows, cand):
                depth_of[child] = depth_of[nid] + 1
                consider(child, crows)
            n_leaves += 1
    return Tree.from_nodes(nodes)


def fit_gbdt(X, y, config: Optional[FitConfig] = None, loss_trace: Optional[list] = None) -> GbdtModel:
    """Newton boosting of binomial log-loss.

    Starts from the prior log-odds; each round fits one tree to gradients
    ``p - y`` and hessians ``p (1 - p)`` with L2-regularized leaf weights.
    ``loss_trace``, if given, receives the training log-loss before the first
    round and after every round.
    """
    X, y = _check_xy(X, y)
    cfg = config or FitConfig(family="gbdt")
    pbar = y.mean()
    if pbar == 0 or pbar == 1:
        raise DegenerateError("degenerate prior: training labels have one class")
    base = math.log(pbar / (1 - pbar))
    binned = _Binned(X)
    yf = y.astype(np.float64)
    score = np.full(X.shape[0], base)
    trees = []
    if loss_trace is not None:
        loss_trace.append(log_loss_from_scores(yf, score))
    for _ in range(cfg.n_rounds):
        p = _sigmoid(score)
        g = p - yf
        h = p * (1.0 - p)
        tree = _grow_gbdt_tree(X, binned, g, h, cfg)
        trees.append(tree)
        score = score + cfg.learning_rate * tree.predict(X)
        if loss_trace is not None:
            loss_trace.append(log_loss_from_scores(yf, score))
    return GbdtModel(X.shape[1], cfg, base_score=base, learning_rate=cfg.learning_rate, trees=trees)


# --------------------------------------------------------------------------
# dispatch, prediction, serialization


def fit_model(X, y, config: FitConfig, encoding: Optional[OneHotEncoding] = None) -> Model:
    if config.family == "cart":
        model = fit_cart(X, y, config)
    elif config.family in ("random_forest", "extra_trees"):
        model = fit_forest(X, y, config)
    elif config.family == "gbdt":
        model = fit_gbdt(X, y, config)
    else:
        model = fit_majority(X, y, config)
    model.encoding = encoding
    return model


def predict_proba(model: Model, X) -> np.ndarray:
    return model.predict_proba(X)


def predict(model: Model, X, threshold: float = 0.5) -> np.ndarray:
    """Label 1 where the predicted probability is at least ``threshold``."""
    if not 0.0 <= threshold <= 1.0:
        raise ValueError(f"threshold must lie in [0, 1], got {threshold}")
    return (model.predict_proba(X) >= threshold).astype(np.int64)


def model_to_dict(model: Model) -> dict:
    d = {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "family": model.config.family,
        "n_features": model.n_features,
        "config": model.config.to_dict(),
        "encoding": None if model.encoding is None else model.encoding.to_dict(),
    }
    if isinstance(model, MajorityModel):
        d["probability"] = model.probability
    elif isinstance(model, CartModel):
        d["trees"] = [model.tree.to_dict()]
    elif isinstance(model, ForestModel):
        d["mode"] = model.mode
        d["trees"] = [t.to_dict() for t in model.trees]
    else:
        d["base_score"] = model.base_score
        d["learning_rate"] = model.learning_rate
        d["trees"] = [t.to_dict() for t in model.trees]
    return d


def model_from_dict(d: dict) -> Model:
    if d.get("format") != MODEL_FORMAT:
        raise ValueError("not a model document")
    if d.get("version") != MODEL_VERSION:
        raise ValueError(f"unsupported model version {d.get('version')!r}")
    cfg = FitConfig.from_dict(d["config"])
    enc = None if d.get("encoding") is None else OneHotEncoding.from_dict(d["encoding"])
    n = int(d["n_features"])
    trees = [Tree.from_dict(t) for t in d.get("trees", [])]
    fam = d["family"]
    if fam == "majority":
        return MajorityModel(n, cfg, probability=float(d["probability"]), encoding=enc)
    if fam == "cart":
        return CartModel(n, cfg, tree=trees[0], encoding=enc)
    if fam in ("random_forest", "extra_trees"):
        return ForestModel(n, cfg, trees=trees, mode=d["mode"], encoding=enc)
    return GbdtModel(n, cfg, base_score=float(d["base_score"]), learning_rate=float(d["learning_rate"]), trees=trees, encoding=enc)
