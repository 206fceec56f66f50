"""Labelled multichannel time series: container, file readers/writers and splits."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import ParseError, ValidationError

MIN_LENGTH = 3


def _label_sort_key(label: str):
    try:
        return (0, float(label), label)
    except ValueError:
        return (1, 0.0, label)


def canonical_classes(labels) -> tuple:
    """Distinct labels in canonical order: numerically if all numeric, else as text."""
    uniq = {str(x) for x in labels}
    keys = [_label_sort_key(u) for u in uniq]
    if any(k[0] == 1 for k in keys):
        return tuple(sorted(uniq))
    return tuple(sorted(uniq, key=_label_sort_key))


@dataclass(frozen=True)
class TimeSeriesDataset:
    """Instances x channels x time, plus integer labels in ``1..c``.

    ``values[i]`` is a read-only ``(m, h_i)`` float64 array. ``classes[y-1]``
    is the original label text of canonical class ``y``.
    """

    values: tuple
    labels: np.ndarray
    classes: tuple
    name: str = ""

    def __post_init__(self):
        vals = []
        m = None
        for i, x in enumerate(self.values):
            x = np.array(x, dtype=np.float64)
            if x.ndim == 1:
                x = x[None, :]
            if x.ndim != 2:
                raise ValidationError(f"instance {i}: expected (channels, time) array, got shape {x.shape}")
            if m is None:
                m = x.shape[0]
            elif x.shape[0] != m:
                raise ValidationError(f"instance {i}: {x.shape[0]} channels, expected {m}")
            if x.shape[1] < MIN_LENGTH:
                raise ValidationError(f"instance {i}: length {x.shape[1]} < {MIN_LENGTH}")
            if not np.all(np.isfinite(x)):
                raise ValidationError(f"instance {i}: non-finite value")
            x.setflags(write=False)
            vals.append(x)
        labels = np.array(self.labels, dtype=np.int64).reshape(-1)
        if labels.shape[0] != len(vals):
            raise ValidationError(f"{labels.shape[0]} labels for {len(vals)} instances")
        c = len(self.classes)
        if labels.size and (labels.min() < 1 or labels.max() > c):
            raise ValidationError(f"labels must lie in 1..{c}")
        labels.setflags(write=False)
        object.__setattr__(self, "values", tuple(vals))
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "classes", tuple(str(x) for x in self.classes))

    @classmethod
    def from_arrays(cls, X, y, lengths=None, classes=None, name=""):
        """Build from an array ``(tau, m, h)`` or ``(tau, h)`` and raw labels.

        ``lengths`` truncates instance ``i`` to its first ``lengths[i]`` samples.
        ``classes`` fixes the label universe (defaults to the labels present).
        """
        X = np.asarray(X, dtype=np.float64) if not isinstance(X, (list, tuple)) else X
        y = [str(v.item() if hasattr(v, "item") else v) for v in np.asarray(y).reshape(-1)]
        if classes is None:
            classes = canonical_classes(y)
        classes = tuple(str(c) for c in classes)
        index = {c: i + 1 for i, c in enumerate(classes)}
        try:
            labels = [index[v] for v in y]
        except KeyError as exc:
            raise ValidationError(f"label {exc.args[0]!r} not among classes {classes}") from None
        vals = []
        for i in range(len(y)):
            x = np.asarray(X[i], dtype=np.float64)
            if x.ndim == 1:
                x = x[None, :]
            if lengths is not None:
                x = x[:, : int(lengths[i])]
            vals.append(x)
        return cls(tuple(vals), np.array(labels, dtype=np.int64), classes, name)

    @property
    def num_instances(self) -> int:
        return len(self.values)

    @property
    def num_channels(self) -> int:
        return self.values[0].shape[0] if self.values else 0

    @property
    def num_classes(self) -> int:
        return len(self.classes)

    @property
    def lengths(self) -> np.ndarray:
        return np.array([x.shape[1] for x in self.values], dtype=np.int64)

    @property
    def is_equal_length(self) -> bool:
        return len(set(self.lengths.tolist())) <= 1

    def label_names(self):
        return [self.classes[y - 1] for y in self.labels]

    def as_array(self) -> np.ndarray:
        if not self.is_equal_length:
            raise ValidationError("dataset has unequal instance lengths")
        if not self.values:
            return np.empty((0, 0, 0))
        return np.stack(self.values)

    def subset(self, indices: Sequence[int]) -> "TimeSeriesDataset":
        idx = [int(i) for i in indices]
        return TimeSeriesDataset(
            tuple(self.values[i] for i in idx),
            self.labels[idx] if idx else np.empty(0, dtype=np.int64),
            self.classes,
            self.name,
        )

    def select_channels(self, channels: Sequence[int]) -> "TimeSeriesDataset":
        """Keep the given zero-based channels, in the given order."""
        ch = [int(c) for c in channels]
        for c in ch:
            if not 0 <= c < self.num_channels:
                raise ValidationError(f"channel {c + 1} out of range 1..{self.num_channels}")
        return TimeSeriesDataset(tuple(x[ch] for x in self.values), self.labels, self.classes, self.name)

    def scaled(self, instance: int, alpha: float) -> "TimeSeriesDataset":
        vals = list(self.values)
        vals[instance] = vals[instance] * alpha
        return TimeSeriesDataset(tuple(vals), self.labels, self.classes, self.name)


# --------------------------------------------------------------------------
# .ts reader
# --------------------------------------------------------------------------


def _parse_float(tok, path, lineno):
    tok = tok.strip()
    if tok == "?" or tok.lower() == "nan":
        raise ParseError("missing values are not supported", path, lineno)
    try:
        v = float(tok)
    except ValueError:
        raise ParseError(f"non-numeric value {tok!r}", path, lineno) from None
    if not math.isfinite(v):
        raise ParseError(f"non-finite value {tok!r}", path, lineno)
    return v


def load_ts(path) -> TimeSeriesDataset:
    """Read a UCR/UEA ``.ts`` text file (equal or unequal length, no timestamps)."""
    path = Path(path)
    header = {}
    declared = None
    has_labels = True
    dims = None
    values, raw_labels = [], []
    in_data = False
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\r\n").strip()
            if not line or line.startswith("#"):
                continue
            if not in_data:
                if not line.startswith("@"):
                    raise ParseError("expected a header directive before @data", path, lineno)
                parts = line.split()
                key = parts[0].lower()
                if key == "@data":
                    in_data = True
                    continue
                header[key] = parts[1:]
                if key == "@classlabel":
                    if not parts[1:] or parts[1].lower() not in ("true", "false"):
                        raise ParseError("malformed @classLabel", path, lineno)
                    has_labels = parts[1].lower() == "true"
                    declared = parts[2:] if has_labels else None
                    if has_labels and not declared:
                        raise ParseError("@classLabel true without class values", path, lineno)
                elif key == "@dimensions":
                    try:
                        dims = int(parts[1])
                    except (IndexError, ValueError):
                        raise ParseError("malformed @dimensions", path, lineno) from None
                elif key == "@timestamps" and parts[1:2] and parts[1].lower() == "true":
                    raise ParseError("timestamped .ts files are not supported", path, lineno)
                elif key == "@univariate" and parts[1:2] and parts[1].lower() == "true":
                    dims = 1 if dims is None else dims
                continue
            fields = line.split(":")
            if has_labels:
                if len(fields) < 2:
                    raise ParseError("missing class label", path, lineno)
                label = fields[-1].strip()
                fields = fields[:-1]
                if label not in declared:
                    raise ParseError(f"label {label!r} not in declared set {declared}", path, lineno)
                raw_labels.append(label)
            else:
                raw_labels.append("0")
            chans = [[_parse_float(t, path, lineno) for t in f.split(",")] for f in fields]
            if dims is not None and len(chans) != dims:
                raise ParseError(f"{len(chans)} channels, expected {dims}", path, lineno)
            if len({len(c) for c in chans}) != 1:
                raise ParseError("channels of one instance differ in length", path, lineno)
            if len(chans[0]) < MIN_LENGTH:
                raise ParseError(f"series shorter than {MIN_LENGTH}", path, lineno)
            values.append(np.array(chans, dtype=np.float64))
    for required in ("@problemname",):
        if required not in header:
            raise ParseError(f"missing {required} directive", path)
    if not in_data:
        raise ParseError("missing @data section", path)
    if values and len({v.shape[0] for v in values}) != 1:
        raise ParseError("instances differ in channel count", path)
    classes = canonical_classes(declared) if declared else ("0",)
    name = " ".join(header.get("@problemname", []))
    index = {c: i + 1 for i, c in enumerate(classes)}
    return TimeSeriesDataset(tuple(values), np.array([index[x] for x in raw_labels], dtype=np.int64), classes, name)


def write_ts(ds: TimeSeriesDataset, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"@problemName {ds.name or 'dataset'}\n@timeStamps false\n@missing false\n")
        fh.write(f"@univariate {'true' if ds.num_channels == 1 else 'false'}\n")
        if ds.num_channels != 1:
            fh.write(f"@dimensions {ds.num_channels}\n")
        fh.write(f"@equalLength {'true' if ds.is_equal_length else 'false'}\n")
        fh.write(f"@classLabel true {' '.join(ds.classes)}\n@data\n")
        for x, y in zip(ds.values, ds.labels):
            body = ":".join(",".join(repr(float(v)) for v in ch) for ch in x)
            fh.write(f"{body}:{ds.classes[y - 1]}\n")


# --------------------------------------------------------------------------
# CSV reader / writer
# --------------------------------------------------------------------------

ROW_PER_INSTANCE = "row"
LONG_FORMAT = "long"
LONG_COLUMNS = ("instance", "channel", "time", "value", "label")


def _ordered_ids(ids):
    return sorted(set(ids), key=_label_sort_key)


def load_csv(path, layout=ROW_PER_INSTANCE, has_labels=True, has_lengths=False, classes=None):
    """Read a CSV dataset.

    ``layout="row"``: one univariate instance per row, optional trailing label.
    With ``has_lengths`` the first column holds the instance length and any
    cells after that many values are ignored (for ragged data).

    ``layout="long"``: a header naming ``instance,channel,time,value`` and,
    when labelled, ``label``; one observation per row.
    """
    path = Path(path)
    with open(path, encoding="utf-8", newline="") as fh:
        rows = [(n, [c.strip() for c in r]) for n, r in enumerate(csv.reader(fh), 1) if any(c.strip() for c in r)]
    if layout == ROW_PER_INSTANCE:
        values, raw = [], []
        width = None
        for lineno, r in rows:
            if has_lengths:
                try:
                    h = int(r[0])
                except ValueError:
                    raise ParseError(f"bad length {r[0]!r}", path, lineno) from None
                body = r[1:]
                label = body[-1] if has_labels else None
                if has_labels:
                    body = body[:-1]
                cells = [c for c in body if c != ""]
                if len(cells) < h:
                    raise ParseError(f"declared length {h} but {len(cells)} values", path, lineno)
                cells = cells[:h]
            else:
                if width is None:
                    width = len(r)
                elif len(r) != width:
                    raise ParseError(f"ragged row: {len(r)} cells, expected {width}", path, lineno)
                label = r[-1] if has_labels else None
                cells = r[:-1] if has_labels else r
            values.append(np.array([[_parse_float(c, path, lineno) for c in cells]]))
            raw.append(label if has_labels else "0")
    elif layout == LONG_FORMAT:
        if not rows:
            raise ParseError("empty file", path)
        head = [c.lower() for c in rows[0][1]]
        need = LONG_COLUMNS if has_labels else LONG_COLUMNS[:4]
        missing = [c for c in need if c not in head]
        if missing:
            raise ParseError(f"missing columns {missing}", path, rows[0][0])
        col = {c: head.index(c) for c in need}
        cells = {}
        inst_label = {}
        for lineno, r in rows[1:]:
            inst, ch, t = r[col["instance"]], r[col["channel"]], r[col["time"]]
            key = (inst, ch, t)
            if key in cells:
                raise ParseError(f"duplicate observation {key}", path, lineno)
            try:
                tnum = float(t)
            except ValueError:
                raise ParseError(f"non-numeric time {t!r}", path, lineno) from None
            cells[key] = (tnum, _parse_float(r[col["value"]], path, lineno))
            if has_labels:
                lab = r[col["label"]]
                if inst_label.setdefault(inst, lab) != lab:
                    raise ParseError(f"instance {inst!r} has conflicting labels", path, lineno)
        insts = _ordered_ids(k[0] for k in cells)
        chans = _ordered_ids(k[1] for k in cells)
        grouped = {}
        for (inst, ch, _), (t, v) in cells.items():
            grouped.setdefault(inst, {}).setdefault(ch, []).append((t, v))
        values, raw = [], []
        for inst in insts:
            per = grouped[inst]
            if set(per) != set(chans):
                raise ParseError(f"instance {inst!r} lacks some channels", path)
            series = [[v for _, v in sorted(per[ch])] for ch in chans]
            if len({len(s) for s in series}) != 1:
                raise ParseError(f"instance {inst!r}: channels differ in length", path)
            values.append(np.array(series))
            raw.append(inst_label[inst] if has_labels else "0")
    else:
        raise ValidationError(f"unknown CSV layout {layout!r}")
    if classes is None:
        classes = canonical_classes(raw) if raw else ()
    index = {c: i + 1 for i, c in enumerate(classes)}
    try:
        labels = np.array([index[x] for x in raw], dtype=np.int64)
    except KeyError as exc:
        raise ValidationError(f"label {exc.args[0]!r} not among classes {tuple(classes)}") from None
    return TimeSeriesDataset(tuple(values), labels, tuple(classes), path.stem)


def write_csv(ds: TimeSeriesDataset, path, layout=ROW_PER_INSTANCE) -> None:
    """Write ``ds`` so that :func:`load_csv` reads back identical values.

    Row layout needs a univariate dataset; unequal lengths get a leading
    length column (read back with ``has_lengths=True``).
    """
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if layout == ROW_PER_INSTANCE:
            if ds.num_channels > 1:
                raise ValidationError("row layout holds univariate data only; use layout='long'")
            ragged = not ds.is_equal_length
            width = int(ds.lengths.max()) if ds.num_instances else 0
            for x, y in zip(ds.values, ds.labels):
                row = [repr(float(v)) for v in x[0]]
                if ragged:
                    row = [str(len(row))] + row + [""] * (width - len(row))
                w.writerow(row + [ds.classes[y - 1]])
        elif layout == LONG_FORMAT:
            w.writerow(LONG_COLUMNS)
            for i, (x, y) in enumerate(zip(ds.values, ds.labels), 1):
                for j, ch in enumerate(x, 1):
                    for t, v in enumerate(ch, 1):
                        w.writerow([i, j, t, repr(float(v)), ds.classes[y - 1]])
        else:
            raise ValidationError(f"unknown CSV layout {layout!r}")


# --------------------------------------------------------------------------
# splitting
# --------------------------------------------------------------------------

_MASK64 = (1 << 64) - 1


class SplitMix64:
    """SplitMix64 generator (Steele, Lea & Flood constants); portable across platforms."""

    def __init__(self, seed: int):
        self.state = int(seed) & _MASK64

    def next_u64(self) -> int:
        self.state = (self.state + 0x9E3779B97F4A7C15) & _MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        return z ^ (z >> 31)

    def below(self, n: int) -> int:
        """Unbiased integer in ``[0, n)`` by rejection."""
        limit = (1 << 64) - ((1 << 64) % n)
        while True:
            x = self.next_u64()
            if x < limit:
                return x % n

    def shuffle(self, items: list) -> list:
        items = list(items)
        for i in range(len(items) - 1, 0, -1):
            j = self.below(i + 1)
            items[i], items[j] = items[j], items[i]
        return items


STRATIFIED = "stratified"
TAKE_FIRST = "take_first"


@dataclass(frozen=True)
class SplitSpec:
    """Sizes of the learn / train / test lists.

    Each list takes a count or a fraction of the dataset (rounded half up).
    Unset train/test sizes absorb the remainder: with neither given, train
    takes everything after learn; with one given, the other takes the rest.
    """

    learn_count: Optional[int] = None
    learn_fraction: Optional[float] = None
    train_count: Optional[int] = None
    train_fraction: Optional[float] = None
    test_count: Optional[int] = None
    test_fraction: Optional[float] = None
    seed: int = 0
    mode: str = STRATIFIED

    def sizes(self, tau: int):
        def resolve(count, frac, name):
            if count is not None and frac is not None:
                raise ValidationError(f"give either {name}_count or {name}_fraction, not both")
            if count is not None:
                if count < 0:
                    raise ValidationError(f"{name}_count must be >= 0")
                return int(count)
            if frac is not None:
                if not 0.0 <= frac <= 1.0:
                    raise ValidationError(f"{name}_fraction must lie in [0, 1]")
                return int(math.floor(frac * tau + 0.5))
            return None

        n_learn = resolve(self.learn_count, self.learn_fraction, "learn")
        if n_learn is None:
            raise ValidationError("learn size is required")
        n_train = resolve(self.train_count, self.train_fraction, "train")
        n_test = resolve(self.test_count, self.test_fraction, "test")
        if n_train is None and n_test is None:
            n_test = 0
        if n_train is None:
            n_train = tau - n_learn - n_test
        if n_test is None:
            n_test = tau - n_learn - n_train
        if min(n_train, n_test) < 0 or n_learn + n_train + n_test > tau:
            raise ValidationError(f"split sizes {n_learn}+{n_train}+{n_test} exceed {tau} instances")
        return n_learn, n_train, n_test, tau - n_learn - n_train - n_test


@dataclass(frozen=True)
class Split:
    """Zero-based, ascending instance indices of each list."""

    learn: tuple
    train: tuple
    test: tuple
    leftover: tuple = field(default=())


def _gale_ryser_greedy(need_rows, col_sizes, fracs):
    """0/1 matrix with given row/column sums, columns filled left to right.

    Each column takes the rows with the most outstanding need, ties broken by
    larger fractional share and then by lower row index. Taking rows with the
    largest remaining need keeps the problem feasible whenever it was.
    """
    need = list(need_rows)
    nrows = len(need)
    out = [[0] * len(col_sizes) for _ in range(nrows)]
    for s, size in enumerate(col_sizes):
        order = sorted(range(nrows), key=lambda q: (-need[q], -fracs[q][s], q))
        chosen = [q for q in order if need[q] > 0][:size]
        if len(chosen) < size:
            raise ValidationError("internal: stratified allocation infeasible")
        for q in chosen:
            out[q][s] = 1
            need[q] -= 1
    return out


def allocate(class_sizes, list_sizes):
    """Per-class counts for each list, each within 1 of ``n_S * tau_q / tau``.

    Rows are classes, columns lists; row sums equal class sizes and column
    sums equal list sizes.
    """
    tau = sum(class_sizes)
    if sum(list_sizes) != tau:
        raise ValidationError("list sizes must cover all instances")
    exact = [[Fraction(n * tq, tau) if tau else Fraction(0) for n in list_sizes] for tq in class_sizes]
    floors = [[math.floor(x) for x in row] for row in exact]
    fracs = [[x - f for x, f in zip(r, fr)] for r, fr in zip(exact, floors)]
    need_rows = [tq - sum(fr) for tq, fr in zip(class_sizes, floors)]
    col_extra = [n - sum(floors[q][s] for q in range(len(class_sizes))) for s, n in enumerate(list_sizes)]
    bump = _gale_ryser_greedy(need_rows, col_extra, fracs)
    return [[floors[q][s] + bump[q][s] for s in range(len(list_sizes))] for q in range(len(class_sizes))]


def stratified_split(ds: TimeSeriesDataset, spec: SplitSpec) -> Split:
    """Partition instance indices into learn / train / test (+ leftover)."""
    tau = ds.num_instances
    sizes = spec.sizes(tau)
    if spec.mode == TAKE_FIRST:
        bounds = np.cumsum((0,) + sizes)
        lists = [tuple(range(int(bounds[i]), int(bounds[i + 1]))) for i in range(4)]
    elif spec.mode == STRATIFIED:
        c = ds.num_classes
        members = [[i for i in range(tau) if ds.labels[i] == y] for y in range(1, c + 1)]
        counts = allocate([len(m) for m in members], list(sizes))
        rng = SplitMix64(spec.seed)
        lists = [[], [], [], []]
        for q, mem in enumerate(members):
            perm = rng.shuffle(mem)
            start = 0
            for s in range(4):
                lists[s].extend(perm[start : start + counts[q][s]])
                start += counts[q][s]
        lists = [tuple(sorted(x)) for x in lists]
    else:
        raise ValidationError(f"unknown split mode {spec.mode!r}")
    present = set(int(ds.labels[i]) for i in range(tau))
    got = set(int(ds.labels[i]) for i in lists[0])
    empty = sorted(present - got)
    if empty:
        names = ", ".join(ds.classes[y - 1] for y in empty)
        raise ValidationError(f"class(es) {names} would receive no learn instance")
    return Split(*lists)
