"""Project instances onto a shapelet bank and reduce the projections to features."""
from __future__ import annotations

import csv
import math
import os
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from . import kernels
from .dataset import TimeSeriesDataset
from .errors import AltError, ParseError, ValidationError
from .lawcore import WindowConfig
from .model import ShapeletBank

MEAN_ALL = "mean_all"
PER_ROW = "per_row"

# aggregator name -> order of the central moment it reports (1 = plain mean)
AGGREGATORS = {"mean": 1, "2nd_moment": 2, "3rd_moment": 3, "4th_moment": 4}
DEGENERATE_M2 = 1e-24

CLASS_COLUMN = "class"


@dataclass(frozen=True)
class ExtractionMethod:
    """``mean_all``, or a per-row quantile ``p`` followed by an aggregator.

    Aggregators over the per-row quantiles: ``mean``; ``2nd_moment`` (population
    standard deviation); ``3rd_moment`` (standardised skewness);
    ``4th_moment`` (standardised, non-excess kurtosis).
    """

    kind: str
    p: Optional[float] = None
    aggregator: Optional[str] = None

    def __post_init__(self):
        if self.kind == MEAN_ALL:
            if self.p is not None or self.aggregator is not None:
                raise ValidationError("mean_all takes no quantile or aggregator")
        elif self.kind == PER_ROW:
            if self.aggregator not in AGGREGATORS:
                raise ValidationError(f"unknown aggregator {self.aggregator!r}; expected one of {sorted(AGGREGATORS)}")
            if self.p is None or not (0.0 < float(self.p) < 1.0):
                raise ValidationError(f"quantile must lie strictly inside (0, 1), got {self.p!r}")
            object.__setattr__(self, "p", float(self.p))
        else:
            raise ValidationError(f"unknown extraction kind {self.kind!r}")

    def __str__(self):
        if self.kind == MEAN_ALL:
            return MEAN_ALL
        return f"{self.aggregator}@{self.p!r}"

    @classmethod
    def parse(cls, text: str) -> "ExtractionMethod":
        """Parse ``mean_all`` or ``<aggregator>@<p>``, e.g. ``4th_moment@0.05``."""
        text = text.strip()
        if text == MEAN_ALL:
            return cls(MEAN_ALL)
        name, sep, p = text.partition("@")
        if not sep:
            raise ValidationError(f"method {text!r} needs a quantile, e.g. {text}@0.05")
        try:
            pv = float(p)
        except ValueError:
            raise ValidationError(f"bad quantile in method {text!r}") from None
        if not math.isfinite(pv):
            raise ValidationError(f"bad quantile in method {text!r}")
        return cls(PER_ROW, pv, name)

    @classmethod
    def coerce(cls, spec) -> "ExtractionMethod":
        """Accept an ExtractionMethod, a method string, or a ``[name]`` / ``[name, p]`` list."""
        if isinstance(spec, cls):
            return spec
        if isinstance(spec, str):
            return cls.parse(spec)
        spec = list(spec)
        if len(spec) == 1:
            return cls.parse(str(spec[0]))
        if len(spec) == 2:
            return cls(PER_ROW, float(spec[1]), str(spec[0]))
        raise ValidationError(f"cannot interpret extraction method {spec!r}")


def parse_methods(spec) -> list:
    """Comma-separated method string, or a list accepted by :meth:`ExtractionMethod.coerce`."""
    if isinstance(spec, str):
        items = [s for s in spec.split(",") if s.strip()]
    else:
        items = list(spec)
    if not items:
        raise ValidationError("at least one extraction method is required")
    return [ExtractionMethod.coerce(s) for s in items]


# --------------------------------------------------------------------------
# core maths
# --------------------------------------------------------------------------


def build_embedding_matrix(series, cfg: WindowConfig) -> np.ndarray:
    """``A[p, q] = x[p*k + q*s]`` for ``p < o = floor((h - s*l + 1)/k)``, ``q < l``."""
    x = np.ascontiguousarray(series, dtype=np.float64)
    h = x.shape[0]
    o = cfg.num_rows(h)
    if o < 1:
        raise ValidationError(
            f"instance of length {h} is too short for (r={cfg.r}, l={cfg.l}, k={cfg.k}): "
            f"needs at least {cfg.s * cfg.l - 1 + cfg.k}"
        )
    st = x.strides[0]
    return np.lib.stride_tricks.as_strided(x, shape=(o, cfg.l), strides=(cfg.k * st, cfg.s * st), writeable=False)


def project(A, P) -> np.ndarray:
    """``|A @ P|`` elementwise."""
    A = np.asarray(A, dtype=np.float64)
    P = np.asarray(P, dtype=np.float64)
    if A.ndim != 2 or P.ndim != 2 or A.shape[1] != P.shape[0]:
        raise ValidationError(f"cannot project {A.shape} onto {P.shape}")
    return np.abs(A @ P)


def _aggregate(q: np.ndarray, order: int) -> float:
    mu = float(np.mean(q))
    if order == 1:
        return mu
    d = q - mu
    m2 = float(np.mean(d * d))
    if order == 2:
        return math.sqrt(m2)
    if m2 <= DEGENERATE_M2:
        return 0.0
    if order == 3:
        return float(np.mean(d * d * d)) / m2**1.5
    return float(np.mean(d * d * d * d)) / (m2 * m2)


def extract_one(O: np.ndarray, method: ExtractionMethod) -> float:
    if O.size == 0:
        raise AltError("internal: empty class block")
    if method.kind == MEAN_ALL:
        return float(np.mean(O))
    q = kernels.row_quantiles(O, method.p)
    return _aggregate(q, AGGREGATORS[method.aggregator])


def extract_features(O_by_class, methods) -> np.ndarray:
    """Features of each class block, shape ``(classes, methods)`` in ascending class order."""
    methods = parse_methods(methods)
    keys = sorted(O_by_class)
    out = np.empty((len(keys), len(methods)))
    for a, y in enumerate(keys):
        O = np.asarray(O_by_class[y], dtype=np.float64)
        for b, m in enumerate(methods):
            out[a, b] = extract_one(O, m)
    return out


# --------------------------------------------------------------------------
# instance / set transformation
# --------------------------------------------------------------------------


def feature_names(bank: ShapeletBank, methods) -> list:
    methods = parse_methods(methods)
    return [
        f"ch{bank.channels[j] + 1}.cfg{g + 1}.cls{y}.{m}"
        for j in range(bank.num_channels)
        for g in range(bank.num_configs)
        for y in range(1, bank.num_classes + 1)
        for m in methods
    ]


def transform_instance(instance, bank: ShapeletBank, methods) -> np.ndarray:
    """Feature vector of one instance (``(channels, h)`` array) in canonical column order."""
    methods = parse_methods(methods)
    x = np.asarray(instance, dtype=np.float64)
    if x.ndim == 1:
        x = x[None, :]
    if x.shape[0] != bank.source_channels:
        raise ValidationError(f"instance has {x.shape[0]} channels, model expects {bank.source_channels}")
    if not np.all(np.isfinite(x)):
        raise ValidationError("instance contains non-finite values")
    out = []
    for j, ch in enumerate(bank.channels):
        series = x[ch]
        for g, cfg in enumerate(bank.configs):
            A = build_embedding_matrix(series, cfg)
            for y in range(1, bank.num_classes + 1):
                O = project(A, bank.banks[(g, j, y)])
                out.extend(extract_one(O, m) for m in methods)
    return np.array(out, dtype=np.float64)


@dataclass(frozen=True)
class FeatureTable:
    """Rows = instances, columns = named features, plus optional class labels."""

    columns: tuple
    values: np.ndarray
    labels: Optional[tuple] = None

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.float64).reshape(-1, len(self.columns))
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "columns", tuple(self.columns))
        if self.labels is not None:
            labels = tuple(str(x) for x in self.labels)
            if len(labels) != vals.shape[0]:
                raise ValidationError(f"{len(labels)} labels for {vals.shape[0]} rows")
            object.__setattr__(self, "labels", labels)

    @property
    def num_rows(self) -> int:
        return self.values.shape[0]

    def column(self, name: str) -> np.ndarray:
        try:
            return self.values[:, self.columns.index(name)]
        except ValueError:
            raise ValidationError(f"unknown feature {name!r}; available: {', '.join(self.columns)}") from None

    def select(self, names) -> np.ndarray:
        return np.column_stack([self.column(n) for n in names]) if names else np.empty((self.num_rows, 0))


def _instances_of(instances, lengths=None):
    if isinstance(instances, TimeSeriesDataset):
        return list(instances.values)
    if isinstance(instances, (list, tuple)):
        items = [np.asarray(x, dtype=np.float64) for x in instances]
    else:
        arr = np.asarray(instances, dtype=np.float64)
        if arr.ndim == 2:
            arr = arr[:, None, :]
        items = list(arr)
    if lengths is not None:
        if len(lengths) != len(items):
            raise ValidationError(f"{len(lengths)} lengths for {len(items)} instances")
        items = [np.atleast_2d(x)[:, : int(n)] for x, n in zip(items, lengths)]
    return items


def transform_set(instances, bank: ShapeletBank, methods, lengths=None, labels=None, threads=1) -> FeatureTable:
    """Transform many instances; rows keep input order whatever the thread count."""
    methods = parse_methods(methods)
    items = _instances_of(instances, lengths)
    if labels is None and isinstance(instances, TimeSeriesDataset):
        labels = instances.label_names()

    def run(x):
        try:
            return transform_instance(x, bank, methods), None
        except AltError as exc:
            return None, str(exc)

    if threads and threads > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run, items))
    else:
        results = [run(x) for x in items]
    errors = [(i, err) for i, (_, err) in enumerate(results) if err is not None]
    if errors:
        detail = "; ".join(f"instance {i + 1}: {e}" for i, e in errors[:10])
        more = f" (+{len(errors) - 10} more)" if len(errors) > 10 else ""
        raise ValidationError(f"{len(errors)} instance(s) failed: {detail}{more}")
    cols = feature_names(bank, methods)
    vals = np.array([v for v, _ in results]).reshape(len(items), len(cols))
    return FeatureTable(tuple(cols), vals, None if labels is None else tuple(str(x) for x in labels))


# --------------------------------------------------------------------------
# feature CSV
# --------------------------------------------------------------------------

NEW_FILE = "new"
APPEND_FEATURE = "append-feature"
APPEND_INSTANCE = "append-instance"

_MODE_ALIASES = {
    "new": NEW_FILE, "new_file": NEW_FILE, "new file": NEW_FILE, "new-file": NEW_FILE,
    "append-feature": APPEND_FEATURE, "append feature": APPEND_FEATURE, "append_feature": APPEND_FEATURE,
    "append-instance": APPEND_INSTANCE, "append instance": APPEND_INSTANCE, "append_instance": APPEND_INSTANCE,
}


def canonical_mode(mode: str) -> str:
    try:
        return _MODE_ALIASES[str(mode).strip().lower()]
    except KeyError:
        raise ValidationError(
            f"unknown save mode {mode!r}; expected {NEW_FILE}, {APPEND_FEATURE} or {APPEND_INSTANCE}"
        ) from None


def _fmt(x: float) -> str:
    return repr(float(x))


def read_features(path) -> FeatureTable:
    path = Path(path)
    with open(path, encoding="utf-8", newline="") as fh:
        rows = [r for r in csv.reader(fh) if r]
    if not rows:
        raise ParseError("empty feature file", path)
    header = rows[0]
    has_class = bool(header) and header[-1] == CLASS_COLUMN
    cols = header[:-1] if has_class else header
    vals, labels = [], []
    for n, r in enumerate(rows[1:], 2):
        if len(r) != len(header):
            raise ParseError(f"{len(r)} cells, header has {len(header)}", path, n)
        try:
            vals.append([float(v) for v in (r[:-1] if has_class else r)])
        except ValueError as exc:
            raise ParseError(str(exc), path, n) from None
        if has_class:
            labels.append(r[-1])
    arr = np.array(vals, dtype=np.float64).reshape(len(vals), len(cols))
    return FeatureTable(tuple(cols), arr, tuple(labels) if has_class else None)


def _rows_of(table: FeatureTable, include_class: bool):
    for i in range(table.num_rows):
        row = [_fmt(v) for v in table.values[i]]
        if include_class:
            row.append(table.labels[i])
        yield row


def _atomic_write(path: Path, header, rows):
    fd, tmp = tempfile.mkstemp(dir=str(path.parent) or ".", prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            w.writerows(rows)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_features(table: FeatureTable, path, mode=NEW_FILE, include_class=True) -> None:
    """Write ``table`` as CSV in one of three modes.

    ``new`` replaces the file. ``append-feature`` adds columns to an existing
    file with the same row count (and identical class column, if both have
    one), inserting them before the class column. ``append-instance`` appends
    rows to a file whose header matches exactly.
    """
    path = Path(path)
    mode = canonical_mode(mode)
    include_class = include_class and table.labels is not None
    header = list(table.columns) + ([CLASS_COLUMN] if include_class else [])
    if mode == NEW_FILE:
        _atomic_write(path, header, _rows_of(table, include_class))
        return
    if not path.exists():
        raise ValidationError(f"{mode}: {path} does not exist")
    old = read_features(path)
    old_header = list(old.columns) + ([CLASS_COLUMN] if old.labels is not None else [])
    if mode == APPEND_INSTANCE:
        if old_header != header:
            raise ValidationError(f"{mode}: header of {path} does not match the new table")
        with open(path, "a", encoding="utf-8", newline="") as fh:
            csv.writer(fh, lineterminator="\n").writerows(_rows_of(table, include_class))
        return
    # append-feature
    if old.num_rows != table.num_rows:
        raise ValidationError(f"{mode}: {path} has {old.num_rows} rows, new table has {table.num_rows}")
    dup = set(old.columns) & set(table.columns)
    if dup:
        raise ValidationError(f"{mode}: columns already present: {', '.join(sorted(dup))}")
    labels = old.labels
    if old.labels is not None and include_class and old.labels != table.labels:
        raise ValidationError(f"{mode}: class column of {path} differs from the new table's")
    if labels is None and include_class:
        labels = table.labels
    merged = FeatureTable(old.columns + table.columns, np.hstack([old.values, table.values]), labels)
    out_header = list(merged.columns) + ([CLASS_COLUMN] if labels is not None else [])
    _atomic_write(path, out_header, _rows_of(merged, labels is not None))
