"""Dataset model, delimited-text ingestion, attribute alignment and z-scores.

Cells are stored in a single float matrix. Continuous attributes hold their
values directly; categorical attributes hold the index of the category in
the attribute's ``categories`` tuple. Missing cells are NaN in both cases,
and a categorical cell that is not one of the declared categories (only
possible after :func:`conform`) is stored as ``-1``.
"""

from __future__ import annotations

import csv
import io
import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

CONTINUOUS = "continuous"
CATEGORICAL = "categorical"
MISSING = "?"
UNSEEN = -1.0


class DatasetError(ValueError):
    """Raised for malformed input files and schema violations."""


@dataclass(frozen=True)
class AttributeSchema:
    name: str
    kind: str = CONTINUOUS
    categories: tuple[str, ...] = ()

    def __post_init__(self):
        if not self.name:
            raise DatasetError("attribute names must be non-empty")
        if self.kind not in (CONTINUOUS, CATEGORICAL):
            raise DatasetError(f"unknown attribute kind {self.kind!r}")
        if self.kind == CATEGORICAL and not self.categories:
            raise DatasetError(f"categorical attribute {self.name!r} has no categories")
        if self.kind == CONTINUOUS and self.categories:
            raise DatasetError(f"continuous attribute {self.name!r} cannot declare categories")

    @property
    def is_continuous(self) -> bool:
        return self.kind == CONTINUOUS


@dataclass(frozen=True, eq=False)
class Dataset:
    """Named attribute columns plus one class label per row.

    Instances are immutable: the value matrix is flagged read-only on
    construction and every transformation returns a new object.
    """

    schema: tuple[AttributeSchema, ...]
    X: np.ndarray
    labels: np.ndarray
    name: str = ""

    def __post_init__(self):
        schema = tuple(self.schema)
        X = np.array(self.X, dtype=np.float64, copy=True)
        labels = np.asarray(self.labels, dtype=str).copy()
        if X.ndim != 2:
            X = X.reshape(len(labels), len(schema))
        if X.shape[1] != len(schema):
            raise DatasetError(f"row length {X.shape[1]} does not match schema length {len(schema)}")
        if X.shape[0] != labels.shape[0]:
            raise DatasetError(f"{labels.shape[0]} labels for {X.shape[0]} rows")
        names = [a.name for a in schema]
        if len(set(names)) != len(names):
            dup = next(n for n in names if names.count(n) > 1)
            raise DatasetError(f"duplicate attribute name {dup!r}")
        for j, attr in enumerate(schema):
            col = X[:, j]
            known = col[~np.isnan(col)]
            if attr.is_continuous:
                if not np.all(np.isfinite(known)):
                    raise DatasetError(f"attribute {attr.name!r} holds non-finite values")
            else:
                ok = (known == np.round(known)) & (known >= UNSEEN) & (known < len(attr.categories))
                if not np.all(ok):
                    raise DatasetError(f"attribute {attr.name!r} holds undeclared category codes")
        X.flags.writeable = False
        labels.flags.writeable = False
        object.__setattr__(self, "schema", schema)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "labels", labels)

    # construction helpers

    @classmethod
    def from_columns(
        cls,
        columns: Mapping[str, Sequence],
        labels: Sequence,
        name: str = "",
    ) -> "Dataset":
        """Build a dataset from raw column values, inferring kinds as
        :func:`load_dataset` does (``None`` or ``"?"`` mean missing)."""
        schema = []
        cols = []
        for col_name, values in columns.items():
            tokens = [MISSING if v is None else (v if isinstance(v, str) else repr(float(v))) for v in values]
            attr, encoded = _infer_column(col_name, tokens)
            schema.append(attr)
            cols.append(encoded)
        X = np.column_stack(cols) if cols else np.empty((len(labels), 0))
        return cls(tuple(schema), X, np.asarray(labels, dtype=str), name)

    @classmethod
    def from_arrays(cls, X, labels, names: Sequence[str] | None = None, name: str = "") -> "Dataset":
        """All-continuous dataset from a numeric matrix."""
        X = np.asarray(X, dtype=np.float64)
        if names is None:
            width = len(str(X.shape[1]))
            names = [f"a{j:0{width}d}" for j in range(X.shape[1])]
        schema = tuple(AttributeSchema(n) for n in names)
        return cls(schema, X, np.asarray(labels).astype(str), name)

    # basic accessors

    @property
    def n_rows(self) -> int:
        return self.X.shape[0]

    @property
    def n_attributes(self) -> int:
        return len(self.schema)

    @property
    def names(self) -> list[str]:
        return [a.name for a in self.schema]

    @property
    def classes(self) -> tuple[str, ...]:
        return tuple(sorted(set(self.labels.tolist())))

    def class_codes(self, classes: Sequence[str] | None = None) -> np.ndarray:
        classes = self.classes if classes is None else tuple(classes)
        lookup = {c: i for i, c in enumerate(classes)}
        try:
            return np.array([lookup[v] for v in self.labels.tolist()], dtype=np.intp)
        except KeyError as exc:
            raise DatasetError(f"label {exc.args[0]!r} is not a known class") from None

    def class_priors(self) -> dict[str, float]:
        codes = self.class_codes()
        counts = np.bincount(codes, minlength=len(self.classes))
        return {c: counts[i] / self.n_rows for i, c in enumerate(self.classes)}

    def index_of(self, attribute: str) -> int:
        for j, a in enumerate(self.schema):
            if a.name == attribute:
                return j
        raise DatasetError(f"unknown attribute {attribute!r}")

    def attribute(self, name: str) -> AttributeSchema:
        return self.schema[self.index_of(name)]

    def continuous_indices(self) -> list[int]:
        return [j for j, a in enumerate(self.schema) if a.is_continuous]

    def row_values(self, i: int) -> list:
        """Decoded row: floats, category strings, or ``None`` for missing."""
        out = []
        for attr, v in zip(self.schema, self.X[i]):
            if math.isnan(v):
                out.append(None)
            elif attr.is_continuous:
                out.append(float(v))
            else:
                out.append(attr.categories[int(v)] if v >= 0 else None)
        return out

    # derived datasets

    def subset(self, rows) -> "Dataset":
        rows = np.asarray(rows, dtype=np.intp) if not isinstance(rows, np.ndarray) or rows.dtype != bool else rows
        return Dataset(self.schema, self.X[rows], self.labels[rows], self.name)

    def select(self, names: Sequence[str]) -> "Dataset":
        idx = [self.index_of(n) for n in names]
        return Dataset(tuple(self.schema[j] for j in idx), self.X[:, idx], self.labels, self.name)

    def with_values(self, X: np.ndarray) -> "Dataset":
        return Dataset(self.schema, X, self.labels, self.name)

    def renamed(self, name: str) -> "Dataset":
        return Dataset(self.schema, self.X, self.labels, name)

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return (
            self.schema == other.schema
            and np.array_equal(self.labels, other.labels)
            and np.array_equal(self.X, other.X, equal_nan=True)
        )

    __hash__ = None

    def __repr__(self):
        return f"Dataset(name={self.name!r}, rows={self.n_rows}, attributes={self.n_attributes})"


@dataclass(frozen=True)
class NormalizationStats:
    """Per continuous attribute ``(mean, stddev)``; stddev uses ``n - 1``."""

    entries: Mapping[str, tuple[float, float]] = field(default_factory=dict)

    def __post_init__(self):
        entries = {str(k): (float(m), float(s)) for k, (m, s) in self.entries.items()}
        for k, (_, s) in entries.items():
            if not s >= 0:
                raise DatasetError(f"negative stddev for {k!r}")
        object.__setattr__(self, "entries", entries)

    def __getitem__(self, name: str) -> tuple[float, float]:
        return self.entries[name]

    def __contains__(self, name: str) -> bool:
        return name in self.entries

    def to_text(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["attribute", "mean", "stddev"])
        for name, (m, s) in self.entries.items():
            w.writerow([name, repr(m), repr(s)])
        return buf.getvalue()

    @classmethod
    def from_text(cls, text: str) -> "NormalizationStats":
        rows = list(csv.reader(io.StringIO(text)))
        if not rows or [c.strip() for c in rows[0]] != ["attribute", "mean", "stddev"]:
            raise DatasetError("normalization sidecar must start with 'attribute,mean,stddev'")
        entries = {}
        for lineno, row in enumerate(rows[1:], start=2):
            if not row:
                continue
            if len(row) != 3:
                raise DatasetError(f"line {lineno}: expected 3 fields, got {len(row)}")
            entries[row[0]] = (float(row[1]), float(row[2]))
        return cls(entries)


# ingestion


def _parse_real(token: str) -> float | None:
    try:
        v = float(token)
    except ValueError:
        return None
    return v if math.isfinite(v) else None


def _infer_column(name: str, tokens: Sequence[str]) -> tuple[AttributeSchema, np.ndarray]:
    known = [t for t in tokens if t != MISSING]
    parsed = [_parse_real(t) for t in known]
    if all(p is not None for p in parsed):
        col = np.array([math.nan if t == MISSING else float(t) for t in tokens], dtype=np.float64)
        return AttributeSchema(name), col
    categories = tuple(sorted(set(known)))
    lookup = {c: float(i) for i, c in enumerate(categories)}
    col = np.array([math.nan if t == MISSING else lookup[t] for t in tokens], dtype=np.float64)
    return AttributeSchema(name, CATEGORICAL, categories), col


def parse_dataset(text: str, class_column: str | None, name: str = "") -> Dataset:
    """Parse comma-separated text with a header row.

    ``class_column=None`` loads an unlabelled file (every label is ``"?"``),
    which is what prediction on new data needs.
    """
    reader = csv.reader(io.StringIO(text))
    rows = []
    header = None
    for lineno, raw in enumerate(reader, start=1):
        if not raw or all(not c.strip() for c in raw):
            continue
        cells = [c.strip() for c in raw]
        if header is None:
            header = cells
            continue
        if len(cells) != len(header):
            raise DatasetError(
                f"line {lineno}: malformed row with {len(cells)} fields, header has {len(header)}"
            )
        rows.append(cells)
    if header is None:
        raise DatasetError("empty file")
    if any(not h for h in header):
        raise DatasetError("header contains an empty column name")
    if len(set(header)) != len(header):
        dup = next(h for h in header if header.count(h) > 1)
        raise DatasetError(f"duplicate column name {dup!r}")
    if class_column is not None and class_column not in header:
        raise DatasetError(f"class column {class_column!r} not found in header")
    if len(rows) < 2:
        raise DatasetError(f"need at least 2 data rows, found {len(rows)}")

    if class_column is None:
        label_pos = None
        labels = [MISSING] * len(rows)
    else:
        label_pos = header.index(class_column)
        labels = [r[label_pos] for r in rows]
        if MISSING in labels:
            line = labels.index(MISSING)
            raise DatasetError(f"data row {line + 1}: missing class label")
    schema = []
    cols = []
    for j, col_name in enumerate(header):
        if j == label_pos:
            continue
        attr, encoded = _infer_column(col_name, [r[j] for r in rows])
        schema.append(attr)
        cols.append(encoded)
    X = np.column_stack(cols) if cols else np.empty((len(rows), 0))
    return Dataset(tuple(schema), X, np.asarray(labels, dtype=str), name)


def load_dataset(path, class_column: str | None, name: str | None = None) -> Dataset:
    path = Path(path)
    if not path.is_file():
        raise DatasetError(f"no such file: {path}")
    text = path.read_text(encoding="utf-8")
    return parse_dataset(text, class_column, name=path.stem if name is None else name)


def _format_cell(attr: AttributeSchema, v: float) -> str:
    if math.isnan(v) or v < 0 and not attr.is_continuous:
        return MISSING
    if attr.is_continuous:
        return repr(float(v))
    return attr.categories[int(v)]


def dataset_to_text(d: Dataset, class_column: str = "class") -> str:
    if class_column in d.names:
        raise DatasetError(f"class column name {class_column!r} collides with an attribute")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(d.names + [class_column])
    for i in range(d.n_rows):
        w.writerow([_format_cell(a, v) for a, v in zip(d.schema, d.X[i])] + [d.labels[i]])
    return buf.getvalue()


def save_dataset(d: Dataset, path, class_column: str = "class") -> None:
    write_atomic(path, dataset_to_text(d, class_column))


def write_atomic(path, text: str) -> None:
    """Write via a sibling temp file and rename, so readers never see a
    partially written file."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(f".{path.name}.{os.getpid()}.tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


# alignment


def _merge_attribute(a: AttributeSchema, b: AttributeSchema) -> AttributeSchema:
    if a.kind != b.kind:
        raise DatasetError(f"attribute {a.name!r} is {a.kind} in one dataset and {b.kind} in the other")
    if a.is_continuous:
        return a
    return AttributeSchema(a.name, CATEGORICAL, tuple(sorted(set(a.categories) | set(b.categories))))


def conform(d: Dataset, schema: Sequence[AttributeSchema]) -> np.ndarray:
    """Re-encode ``d`` column-by-column into ``schema``.

    Columns are matched by name; categorical codes are translated through
    the category names, and values unknown to ``schema`` become ``-1``.
    """
    n = d.n_rows
    out = np.empty((n, len(schema)), dtype=np.float64)
    positions = {a.name: j for j, a in enumerate(d.schema)}
    for j, target in enumerate(schema):
        if target.name not in positions:
            raise DatasetError(f"attribute {target.name!r} is missing from dataset {d.name or '<unnamed>'}")
        src_j = positions[target.name]
        src = d.schema[src_j]
        if src.kind != target.kind:
            raise DatasetError(f"attribute {target.name!r} is {src.kind}, expected {target.kind}")
        col = d.X[:, src_j]
        if target.is_continuous or src.categories == target.categories:
            out[:, j] = col
            continue
        lookup = {c: float(i) for i, c in enumerate(target.categories)}
        mapping = np.array([lookup.get(c, UNSEEN) for c in src.categories] + [UNSEEN])
        codes = np.where(np.isnan(col), 0, col).astype(np.intp)
        out[:, j] = np.where(np.isnan(col), np.nan, mapping[codes])
    return out


def align_datasets(a: Dataset, b: Dataset) -> tuple[Dataset, Dataset]:
    """Restrict both datasets to their shared attribute names, sorted
    lexicographically, with categorical category sets unified."""
    if set(a.classes) != set(b.classes):
        raise DatasetError(f"class sets differ: {a.classes} vs {b.classes}")
    b_attrs = {attr.name: attr for attr in b.schema}
    shared = sorted(set(a.names) & set(b_attrs))
    if not shared:
        raise DatasetError("datasets share no attribute names")
    merged = tuple(_merge_attribute(a.attribute(n), b_attrs[n]) for n in shared)
    return (
        Dataset(merged, conform(a, merged), a.labels, a.name),
        Dataset(merged, conform(b, merged), b.labels, b.name),
    )


# z-scores


def _column_stats(col: np.ndarray) -> tuple[float, float]:
    known = col[~np.isnan(col)]
    if known.size == 0:
        return 0.0, 0.0
    mean = float(known.mean())
    std = float(known.std(ddof=1)) if known.size > 1 else 0.0
    return mean, std


def fit_normalization(d: Dataset) -> NormalizationStats:
    return NormalizationStats({d.schema[j].name: _column_stats(d.X[:, j]) for j in d.continuous_indices()})


def apply_normalization(d: Dataset, stats: NormalizationStats) -> Dataset:
    X = np.array(d.X)
    for j in d.continuous_indices():
        name = d.schema[j].name
        if name not in stats:
            raise DatasetError(f"normalization stats lack attribute {name!r}")
        mean, std = stats[name]
        col = X[:, j]
        if std > 0:
            X[:, j] = (col - mean) / std
        else:
            X[:, j] = np.where(np.isnan(col), np.nan, 0.0)
    return d.with_values(X)


def znormalize(d: Dataset) -> tuple[Dataset, NormalizationStats]:
    if d.n_rows < 2:
        raise DatasetError("z-score normalization needs at least 2 rows")
    stats = fit_normalization(d)
    return apply_normalization(d, stats), stats
