"""Tabular ingestion, preprocessing policies and survival-horizon labeling.

The pipeline on raw text is::

    load_csv -> filter_range (optional) -> drop_incomplete
             -> merge_rare_categories -> derive_survival_label

Everything before ``derive_survival_label`` works on a :class:`RawTable` of
text cells; labeling turns it into an integer-coded :class:`Dataset`.
"""

from __future__ import annotations

import csv
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import ParseError, SchemaError

DEFAULT_MISSING = frozenset({"Unknown", "", "NA"})
OTHERS = "Others"


@dataclass(frozen=True)
class FeatureSpec:
    name: str
    categories: Optional[tuple[str, ...]] = None


@dataclass(frozen=True)
class Schema:
    """Categorical feature columns plus the column holding survival months."""

    features: tuple[FeatureSpec, ...]
    label_source: str
    missing_tokens: frozenset = DEFAULT_MISSING

    def __post_init__(self):
        feats = tuple(f if isinstance(f, FeatureSpec) else FeatureSpec(str(f)) for f in self.features)
        object.__setattr__(self, "features", feats)
        object.__setattr__(self, "missing_tokens", frozenset(self.missing_tokens))
        names = [f.name for f in feats]
        dup = [n for n, c in Counter(names).items() if c > 1]
        if dup:
            raise SchemaError(f"duplicate feature name: {dup[0]}", key=dup[0])
        if self.label_source in names:
            raise SchemaError(
                f"label column {self.label_source!r} is also listed as a feature",
                key=self.label_source,
            )

    @classmethod
    def from_names(cls, features: Iterable[str], label_source: str, missing_tokens=DEFAULT_MISSING):
        return cls(tuple(FeatureSpec(n) for n in features), label_source, frozenset(missing_tokens))

    @property
    def feature_names(self) -> list[str]:
        return [f.name for f in self.features]

    def with_features(self, names: Sequence[str]) -> "Schema":
        by_name = {f.name: f for f in self.features}
        return Schema(tuple(by_name[n] for n in names), self.label_source, self.missing_tokens)


@dataclass
class RawTable:
    """Row-major text cells. ``columns`` starts with the schema features,
    followed by the label column and any extra columns that were requested."""

    schema: Schema
    columns: list[str]
    rows: list[list[str]]

    def __len__(self):
        return len(self.rows)

    def column(self, name: str) -> list[str]:
        j = self.columns.index(name)
        return [r[j] for r in self.rows]

    def _replace_rows(self, rows):
        return RawTable(self.schema, list(self.columns), rows)


@dataclass(frozen=True)
class HorizonSpec:
    years: int

    def __post_init__(self):
        if self.years not in (1, 3, 5):
            raise ValueError(f"horizon must be 1, 3 or 5 years, got {self.years}")

    @property
    def cutoff_months(self) -> int:
        return 12 * self.years


@dataclass
class MergeMap:
    threshold: float
    mapping: dict[str, dict[str, str]] = field(default_factory=dict)

    def merged(self, feature: str) -> list[str]:
        return [k for k, v in self.mapping[feature].items() if v == OTHERS and k != OTHERS]

    def to_dict(self) -> dict:
        return {"threshold": self.threshold, "mapping": self.mapping}


@dataclass
class Dataset:
    """Integer-coded categorical features with binary labels.

    ``labels`` uses 1 for Not-Survived, the positive (minority) class.
    ``months`` keeps the survival months the labels were derived from, when
    available.
    """

    schema: Schema
    codes: np.ndarray
    vocab: list[list[str]]
    labels: np.ndarray
    months: Optional[np.ndarray] = None

    def __post_init__(self):
        self.codes = np.asarray(self.codes, dtype=np.int64).reshape(-1, len(self.schema.features))
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.codes.shape[0] != self.labels.shape[0]:
            raise ValueError("codes and labels differ in length")
        if len(self.vocab) != self.codes.shape[1]:
            raise ValueError("one vocabulary per feature is required")
        if self.labels.size and not np.isin(self.labels, (0, 1)).all():
            raise ValueError("labels must be 0 or 1")
        for j, voc in enumerate(self.vocab):
            col = self.codes[:, j]
            if col.size and (col.min() < 0 or col.max() >= len(voc)):
                raise ValueError(f"code out of range for feature {self.feature_names[j]!r}")

    def __len__(self):
        return int(self.labels.shape[0])

    @property
    def feature_names(self) -> list[str]:
        return self.schema.feature_names

    @property
    def n_features(self) -> int:
        return self.codes.shape[1]

    def column(self, name: str) -> np.ndarray:
        return self.codes[:, self.feature_names.index(name)]

    def decode(self) -> list[list[str]]:
        return [[self.vocab[j][c] for j, c in enumerate(row)] for row in self.codes.tolist()]

    def select_features(self, names: Sequence[str]) -> "Dataset":
        idx = [self.feature_names.index(n) for n in names]
        return Dataset(
            self.schema.with_features(names),
            self.codes[:, idx],
            [self.vocab[i] for i in idx],
            self.labels.copy(),
            None if self.months is None else self.months.copy(),
        )

    def take(self, rows) -> "Dataset":
        rows = np.asarray(rows, dtype=np.int64)
        return Dataset(
            self.schema,
            self.codes[rows],
            self.vocab,
            self.labels[rows],
            None if self.months is None else self.months[rows],
        )


def load_csv(path, schema: Schema, extra_columns: Sequence[str] = ()) -> RawTable:
    """Read a UTF-8 CSV with a header row into a :class:`RawTable`.

    Only the schema columns (and ``extra_columns``) are kept, in schema order.
    Cells are stripped of surrounding whitespace. Blank lines are skipped.
    """
    wanted = schema.feature_names + [schema.label_source]
    wanted += [c for c in extra_columns if c not in wanted]
    with open(Path(path), newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise ParseError("empty file: no header row", row=None) from None
        for name in wanted:
            if name not in header:
                raise SchemaError(f"column not found in CSV header: {name}", key=name)
        idx = [header.index(n) for n in wanted]
        rows = []
        for i, rec in enumerate(reader):
            if not rec:
                continue
            if len(rec) != len(header):
                raise ParseError(
                    f"row {i}: expected {len(header)} cells, found {len(rec)}", row=i
                )
            rows.append([rec[j].strip() for j in idx])
    return RawTable(schema, wanted, rows)


def filter_range(table: RawTable, column: str, lo: float, hi: float) -> RawTable:
    """Keep rows whose numeric ``column`` lies in ``[lo, hi]``.

    Missing-token cells pass through untouched; ``drop_incomplete`` handles them.
    """
    if column not in table.columns:
        raise SchemaError(f"filter column not loaded: {column}", key=column)
    j = table.columns.index(column)
    missing = table.schema.missing_tokens
    kept = []
    for i, row in enumerate(table.rows):
        cell = row[j]
        if cell in missing:
            kept.append(row)
            continue
        try:
            v = float(cell)
        except ValueError:
            raise ParseError(f"row {i}: non-numeric value {cell!r} in {column}", row=i) from None
        if lo <= v <= hi:
            kept.append(row)
    return table._replace_rows(kept)


def drop_incomplete(table: RawTable, missing_tokens=None) -> tuple[RawTable, int]:
    """Drop every row containing a missing token. Returns (table, n_dropped)."""
    tokens = table.schema.missing_tokens if missing_tokens is None else frozenset(missing_tokens)
    kept = [r for r in table.rows if not any(c in tokens for c in r)]
    return table._replace_rows(kept), len(table.rows) - len(kept)


def merge_rare_categories(table: RawTable, threshold: float = 0.02) -> tuple[RawTable, MergeMap]:
    """Rename categories with share strictly below ``threshold`` to ``"Others"``.

    Shares come from the input table in one pass; a merged "Others" bucket is
    never re-examined.
    """
    if not 0.0 < threshold < 1.0:
        raise ValueError(f"threshold must lie in (0, 1), got {threshold}")
    n = len(table.rows)
    if n == 0:
        raise ValueError("no rows")
    mm = MergeMap(threshold=threshold)
    rows = [list(r) for r in table.rows]
    for name in table.schema.feature_names:
        j = table.columns.index(name)
        counts = Counter(r[j] for r in table.rows)
        # count/n < threshold, written without the division
        mapping = {c: (OTHERS if cnt < threshold * n else c) for c, cnt in counts.items()}
        mm.mapping[name] = mapping
        for r in rows:
            r[j] = mapping[r[j]]
    return table._replace_rows(rows), mm


def parse_months(table: RawTable) -> np.ndarray:
    col = table.column(table.schema.label_source)
    out = np.empty(len(col), dtype=np.int64)
    for i, cell in enumerate(col):
        try:
            v = int(cell)
        except ValueError:
            raise ParseError(f"row {i}: survival months {cell!r} is not an integer", row=i) from None
        if v < 0:
            raise ParseError(f"row {i}: negative survival months {v}", row=i)
        out[i] = v
    return out


def encode(table: RawTable) -> tuple[np.ndarray, list[list[str]]]:
    """Integer codes with per-feature vocabularies in first-appearance order."""
    names = table.schema.feature_names
    codes = np.zeros((len(table.rows), len(names)), dtype=np.int64)
    vocab = []
    for j, spec in enumerate(table.schema.features):
        col_idx = table.columns.index(spec.name)
        lookup: dict[str, int] = {}
        allowed = None if spec.categories is None else set(spec.categories) | {OTHERS}
        for i, r in enumerate(table.rows):
            cell = r[col_idx]
            if allowed is not None and cell not in allowed:
                raise ParseError(f"row {i}: undeclared category {cell!r} for {spec.name}", row=i)
            codes[i, j] = lookup.setdefault(cell, len(lookup))
        vocab.append(list(lookup))
    return codes, vocab


def derive_survival_label(
    table: RawTable, horizon: HorizonSpec, cutoff_inclusive: bool = False
) -> Dataset:
    """Encode features and label each row Not-Survived (1) or Survived (0).

    Not-Survived means ``months < cutoff`` (``<=`` with ``cutoff_inclusive``).
    """
    months = parse_months(table)
    cutoff = horizon.cutoff_months
    labels = (months <= cutoff) if cutoff_inclusive else (months < cutoff)
    codes, vocab = encode(table)
    return Dataset(table.schema, codes, vocab, labels.astype(np.int64), months)


@dataclass(frozen=True)
class LabelHistogram:
    count_positive: int
    count_negative: int
    positive_fraction: float
    empty: bool = False


def label_histogram(dataset: Dataset) -> LabelHistogram:
    n = len(dataset)
    pos = int(dataset.labels.sum())
    if n == 0:
        return LabelHistogram(0, 0, 0.0, empty=True)
    return LabelHistogram(pos, n - pos, pos / n)


def months_histogram(dataset: Dataset, bin_width: int = 12) -> list[tuple[int, int, int]]:
    """(bin_start, bin_end_exclusive, count) rows of survival months."""
    if dataset.months is None or len(dataset) == 0:
        return []
    top = int(dataset.months.max()) // bin_width + 1
    counts = np.bincount(dataset.months // bin_width, minlength=top)
    return [(b * bin_width, (b + 1) * bin_width, int(c)) for b, c in enumerate(counts)]
