"""Exact brute-force k-nearest-neighbor queries.

Results are ordered by (distance, row id), so ties at the k-th distance always
resolve to the lower row id and every query is deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

_BLOCK_ELEMS = 4_000_000


@dataclass(frozen=True)
class MetricKind:
    """Distance used for neighbor search.

    ``euclidean`` for numeric rows, ``hamming`` (overlap count) for integer
    category codes, ``heom`` for mixed rows: ``categorical`` flags the overlap
    columns and ``ranges`` normalizes the numeric ones.
    """

    kind: str
    categorical: Optional[tuple[bool, ...]] = None
    ranges: Optional[tuple[float, ...]] = None

    def __post_init__(self):
        if self.kind not in ("euclidean", "hamming", "heom"):
            raise ValueError(f"unknown metric {self.kind!r}")
        if self.kind == "heom":
            if self.categorical is None or self.ranges is None:
                raise ValueError("heom needs per-column kinds and ranges")
            if len(self.categorical) != len(self.ranges):
                raise ValueError("heom kinds and ranges differ in length")
            for is_cat, r in zip(self.categorical, self.ranges):
                if not is_cat and not r > 0:
                    raise ValueError("heom ranges must be strictly positive")

    @classmethod
    def euclidean(cls):
        return cls("euclidean")

    @classmethod
    def hamming(cls):
        return cls("hamming")

    @classmethod
    def heom(cls, categorical, ranges):
        return cls("heom", tuple(bool(c) for c in categorical), tuple(float(r) for r in ranges))

    @property
    def width(self) -> Optional[int]:
        return None if self.categorical is None else len(self.categorical)

    def to_dict(self) -> dict:
        d = {"kind": self.kind}
        if self.kind == "heom":
            d["categorical"] = list(self.categorical)
            d["ranges"] = list(self.ranges)
        return d


def _pairwise(a: np.ndarray, b: np.ndarray, metric: MetricKind) -> np.ndarray:
    """Distances between every row of ``a`` (m, p) and ``b`` (n, p)."""
    if metric.kind == "hamming":
        return (a[:, None, :] != b[None, :, :]).sum(axis=2).astype(np.float64)
    diff = a[:, None, :] - b[None, :, :]
    if metric.kind == "heom":
        cat = np.asarray(metric.categorical)
        rng = np.where(cat, 1.0, np.asarray(metric.ranges))
        per = np.where(cat, (diff != 0).astype(np.float64), np.minimum(np.abs(diff) / rng, 1.0))
        return np.sqrt(np.sum(per * per, axis=2))
    return np.sqrt(np.sum(diff * diff, axis=2))


def distance(a, b, metric: MetricKind) -> float:
    a = np.asarray(a)
    b = np.asarray(b)
    if a.ndim != 1 or a.shape != b.shape:
        raise ValueError(f"row widths differ: {a.shape} vs {b.shape}")
    if metric.width is not None and a.shape[0] != metric.width:
        raise ValueError(f"row width {a.shape[0]} does not match metric width {metric.width}")
    if metric.kind != "hamming":
        a = a.astype(np.float64)
        b = b.astype(np.float64)
    return float(_pairwise(a[None, :], b[None, :], metric)[0, 0])


def _select(D: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray]:
    """k smallest entries per row of D, ordered by (value, column)."""
    m = D.shape[0]
    kth = np.partition(D, k - 1, axis=1)[:, k - 1 : k]
    mask = D <= kth
    per_row = mask.sum(axis=1)
    ids = np.empty((m, k), dtype=np.int64)
    simple = per_row == k
    if simple.any():
        _, cols = np.nonzero(mask[simple])
        cols = cols.reshape(-1, k)
        d = np.take_along_axis(D[simple], cols, axis=1)
        order = np.argsort(d, axis=1, kind="stable")
        ids[simple] = np.take_along_axis(cols, order, axis=1)
    for i in np.flatnonzero(~simple):
        cand = np.flatnonzero(mask[i])
        ids[i] = cand[np.argsort(D[i, cand], kind="stable")][:k]
    return ids, np.take_along_axis(D, ids, axis=1)


class NeighborIndex:
    """Immutable view over an (n, p) matrix for exact neighbor queries."""

    def __init__(self, X, metric: MetricKind):
        X = np.array(X, dtype=np.int64 if metric.kind == "hamming" else np.float64, copy=True)
        if X.ndim != 2:
            raise ValueError("X must be 2-D")
        if metric.width is not None and X.shape[1] != metric.width:
            raise ValueError(f"matrix width {X.shape[1]} does not match metric width {metric.width}")
        X.setflags(write=False)
        self._X = X
        self.metric = metric

    @property
    def n(self) -> int:
        return self._X.shape[0]

    def _blocks(self, rows: np.ndarray):
        step = max(1, _BLOCK_ELEMS // max(1, self.n * max(1, self._X.shape[1])))
        for s in range(0, len(rows), step):
            yield rows[s : s + step]

    def kneighbors(self, k: int, rows=None) -> tuple[np.ndarray, np.ndarray]:
        """Neighbors of indexed rows, each excluding itself.

        Returns ``(ids, distances)`` of shape (len(rows), k).
        """
        if k < 1:
            raise ValueError("k must be >= 1")
        if k > self.n - 1:
            raise ValueError(f"k exceeds available neighbors (k={k}, n={self.n})")
        rows = np.arange(self.n) if rows is None else np.asarray(rows, dtype=np.int64)
        out_ids = np.empty((len(rows), k), dtype=np.int64)
        out_d = np.empty((len(rows), k))
        pos = 0
        for blk in self._blocks(rows):
            D = _pairwise(self._X[blk], self._X, self.metric)
            D[np.arange(len(blk)), blk] = np.inf
            ids, d = _select(D, k)
            out_ids[pos : pos + len(blk)] = ids
            out_d[pos : pos + len(blk)] = d
            pos += len(blk)
        return out_ids, out_d

    def k_nearest(self, query_row_id: int, k: int) -> list[tuple[int, float]]:
        if not 0 <= query_row_id < self.n:
            raise IndexError(f"row {query_row_id} not in index")
        ids, d = self.kneighbors(k, [query_row_id])
        return list(zip(ids[0].tolist(), d[0].tolist()))

    def query(self, points, k: int) -> tuple[np.ndarray, np.ndarray]:
        """Neighbors of external points; nothing is excluded."""
        pts = np.asarray(points, dtype=self._X.dtype)
        if pts.ndim == 1:
            pts = pts[None, :]
        if pts.shape[1] != self._X.shape[1]:
            raise ValueError("query width does not match index")
        if not 1 <= k <= self.n:
            raise ValueError(f"k must be in [1, {self.n}]")
        if len(pts) == 0:
            return np.empty((0, k), dtype=np.int64), np.empty((0, k))
        ids_all, d_all = [], []
        for blk in self._blocks(np.arange(len(pts))):
            ids, d = _select(_pairwise(pts[blk], self._X, self.metric), k)
            ids_all.append(ids)
            d_all.append(d)
        return np.concatenate(ids_all), np.concatenate(d_all)
