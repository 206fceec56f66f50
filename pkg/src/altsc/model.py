"""The trained shapelet bank and its on-disk format.

File layout (UTF-8, ``\\n`` line endings)::

    {"format": "alt-model", "version": 1, ...header...}
    <bank 1: l rows of N space-separated floats>
    <bank 1 provenance: N tokens "instance:start", one-based>
    <bank 2 ...>

Banks are stored in ascending (config, channel, class) order. Floats use the
shortest repr that round-trips, so reloading is bit-exact. The header carries a
SHA-256 of everything after the first line.
"""
from __future__ import annotations

import hashlib
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dataset import TimeSeriesDataset
from .errors import ModelFormatError, ValidationError
from .lawcore import WindowConfig, series_shapelets

MODEL_FORMAT = "alt-model"
MODEL_VERSION = 1


@dataclass(frozen=True)
class ShapeletBank:
    """Shapelet matrices keyed by ``(config, channel, class)``.

    ``configs`` index from 0; ``channels`` are the zero-based dataset channels
    the bank was trained on, in feature order; classes run ``1..c``.
    ``banks[(g, jpos, y)]`` is an ``l_g x N`` matrix whose columns are unit
    shapelets; ``provenance`` holds the matching ``(instance, window start)``
    pairs (zero-based).
    """

    configs: tuple
    channels: tuple
    source_channels: int
    classes: tuple
    learn_indices: tuple
    banks: dict
    provenance: dict

    @property
    def num_configs(self) -> int:
        return len(self.configs)

    @property
    def num_channels(self) -> int:
        return len(self.channels)

    @property
    def num_classes(self) -> int:
        return len(self.classes)

    def keys(self):
        return [
            (g, j, y)
            for g in range(self.num_configs)
            for j in range(self.num_channels)
            for y in range(1, self.num_classes + 1)
        ]

    def summary(self) -> str:
        lines = []
        for g, j, y in self.keys():
            P = self.banks[(g, j, y)]
            r, l, k = self.configs[g].as_tuple()
            lines.append(
                f"cfg{g + 1}(r={r},l={l},k={k}) ch{self.channels[j] + 1} "
                f"cls{y}[{self.classes[y - 1]}]: {P.shape[1]} shapelets x {P.shape[0]}"
            )
        return "\n".join(lines)


def _map(fn, items, threads):
    if threads is None or threads <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def train_bank(ds: TimeSeriesDataset, learn_indices, configs, channels=None, threads=1) -> ShapeletBank:
    """Compute every learn window's shapelet and group them per (config, channel, class)."""
    learn = sorted(int(i) for i in learn_indices)
    if len(set(learn)) != len(learn):
        raise ValidationError("duplicate learn indices")
    for i in learn:
        if not 0 <= i < ds.num_instances:
            raise ValidationError(f"learn index {i} out of range")
    configs = tuple(configs)
    if not configs:
        raise ValidationError("at least one window configuration is required")
    chans = tuple(range(ds.num_channels)) if channels is None else tuple(int(c) for c in channels)
    if not chans:
        raise ValidationError("at least one channel is required")
    for c in chans:
        if not 0 <= c < ds.num_channels:
            raise ValidationError(f"channel {c + 1} out of range 1..{ds.num_channels}")
    covered = {int(ds.labels[i]) for i in learn}
    missing = [y for y in range(1, ds.num_classes + 1) if y not in covered]
    if missing:
        names = ", ".join(ds.classes[y - 1] for y in missing)
        raise ValidationError(f"learn set has no instance of class(es) {names}")
    for g, cfg in enumerate(configs):
        for i in learn:
            h = ds.values[i].shape[1]
            if cfg.r > h:
                raise ValidationError(
                    f"config {g + 1} (r={cfg.r}, l={cfg.l}, k={cfg.k}) needs length >= {cfg.r}, "
                    f"learn instance {i + 1} has {h}"
                )

    tasks = [(g, j, i) for g in range(len(configs)) for j in range(len(chans)) for i in learn]

    def run(task):
        g, j, i = task
        return series_shapelets(ds.values[i][chans[j]], configs[g], instance=i + 1)

    results = dict(zip(tasks, _map(run, tasks, threads)))
    banks, prov = {}, {}
    for g, cfg in enumerate(configs):
        for j in range(len(chans)):
            for y in range(1, ds.num_classes + 1):
                members = [i for i in learn if ds.labels[i] == y]
                mats = [results[(g, j, i)] for i in members]
                P = np.ascontiguousarray(np.hstack(mats))
                P.setflags(write=False)
                pv = np.array(
                    [(i, p * cfg.k) for i, M in zip(members, mats) for p in range(M.shape[1])],
                    dtype=np.int64,
                ).reshape(-1, 2)
                banks[(g, j, y)] = P
                prov[(g, j, y)] = pv
    return ShapeletBank(
        configs=configs,
        channels=chans,
        source_channels=ds.num_channels,
        classes=tuple(ds.classes),
        learn_indices=tuple(learn),
        banks=banks,
        provenance=prov,
    )


# --------------------------------------------------------------------------
# persistence
# --------------------------------------------------------------------------


def _fmt(x: float) -> str:
    return repr(float(x))


def _body(bank: ShapeletBank) -> str:
    out = []
    for key in bank.keys():
        P = bank.banks[key]
        for row in P:
            out.append(" ".join(_fmt(v) for v in row))
        out.append(" ".join(f"{i + 1}:{s + 1}" for i, s in bank.provenance[key]))
    return "\n".join(out) + "\n"


def dumps_model(bank: ShapeletBank) -> str:
    body = _body(bank)
    header = {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "configs": [list(c.as_tuple()) for c in bank.configs],
        "channels": [c + 1 for c in bank.channels],
        "source_channels": bank.source_channels,
        "classes": list(bank.classes),
        "learn_indices": [i + 1 for i in bank.learn_indices],
        "banks": [
            {"config": g + 1, "channel": bank.channels[j] + 1, "class": y,
             "rows": int(bank.banks[(g, j, y)].shape[0]), "cols": int(bank.banks[(g, j, y)].shape[1])}
            for g, j, y in bank.keys()
        ],
        "body_sha256": hashlib.sha256(body.encode("utf-8")).hexdigest(),
    }
    return json.dumps(header, sort_keys=True, separators=(",", ":")) + "\n" + body


def save_model(bank: ShapeletBank, path) -> None:
    text = dumps_model(bank)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def loads_model(text: str, source="<string>") -> ShapeletBank:
    first, sep, body = text.partition("\n")
    try:
        header = json.loads(first)
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"{source}: malformed header ({exc.msg})") from None
    if not isinstance(header, dict) or header.get("format") != MODEL_FORMAT:
        raise ModelFormatError(f"{source}: not an {MODEL_FORMAT} file")
    if header.get("version") != MODEL_VERSION:
        raise ModelFormatError(
            f"{source}: unsupported {MODEL_FORMAT} version {header.get('version')!r} (expected {MODEL_VERSION})"
        )
    try:
        digest = header["body_sha256"]
        configs = tuple(WindowConfig(*c) for c in header["configs"])
        channels = tuple(int(c) - 1 for c in header["channels"])
        classes = tuple(str(c) for c in header["classes"])
        source_channels = int(header["source_channels"])
        learn = tuple(int(i) - 1 for i in header["learn_indices"])
        entries = header["banks"]
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelFormatError(f"{source}: incomplete header ({exc})") from None
    if hashlib.sha256(body.encode("utf-8")).hexdigest() != digest:
        raise ModelFormatError(f"{source}: checksum mismatch (file truncated or modified)")
    lines = body.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    pos = 0
    banks, prov = {}, {}
    chan_pos = {c: j for j, c in enumerate(channels)}
    try:
        for e in entries:
            key = (int(e["config"]) - 1, chan_pos[int(e["channel"]) - 1], int(e["class"]))
            rows, cols = int(e["rows"]), int(e["cols"])
            P = np.array([[float(t) for t in lines[pos + r].split()] for r in range(rows)], dtype=np.float64)
            pos += rows
            if P.shape != (rows, cols):
                raise ModelFormatError(f"{source}: bank {key} has shape {P.shape}, header says {(rows, cols)}")
            toks = lines[pos].split()
            pos += 1
            pv = np.array([[int(a) - 1 for a in t.split(":")] for t in toks], dtype=np.int64).reshape(-1, 2)
            if pv.shape[0] != cols:
                raise ModelFormatError(f"{source}: bank {key} provenance length mismatch")
            P.setflags(write=False)
            banks[key] = P
            prov[key] = pv
    except (IndexError, ValueError, KeyError) as exc:
        raise ModelFormatError(f"{source}: truncated or malformed body ({exc})") from None
    if pos != len(lines):
        raise ModelFormatError(f"{source}: trailing data after last bank")
    bank = ShapeletBank(configs, channels, source_channels, classes, learn, banks, prov)
    if set(banks) != set(bank.keys()):
        raise ModelFormatError(f"{source}: bank list does not cover every (config, channel, class)")
    return bank


def load_model(path) -> ShapeletBank:
    path = Path(path)
    with open(path, encoding="utf-8", newline="") as fh:
        text = fh.read()
    return loads_model(text, source=str(path))
