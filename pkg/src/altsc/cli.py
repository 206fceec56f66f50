"""``altsc`` command line: split, train, transform, eval, scatter, sweep.

Exit codes: 0 success, 2 validation error, 3 I/O error, 4 numerical failure.
Failures print a single ``error: ...`` line on stderr.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from ._accel import backend_name
from .classify import KNN, evaluate, lda_fit
from .dataset import (
    LONG_FORMAT,
    ROW_PER_INSTANCE,
    STRATIFIED,
    TAKE_FIRST,
    SplitSpec,
    load_csv,
    load_ts,
    stratified_split,
)
from .errors import AltError, ValidationError
from .lawcore import make_configs
from .model import MODEL_VERSION, load_model, save_model, train_bank
from .transform import (
    APPEND_FEATURE,
    APPEND_INSTANCE,
    NEW_FILE,
    FeatureTable,
    parse_methods,
    read_features,
    transform_set,
    write_features,
)

FEATURE_CSV_VERSION = 1


# --------------------------------------------------------------------------
# argument helpers
# --------------------------------------------------------------------------


def int_list(text):
    try:
        return [int(t) for t in str(text).split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def parse_rows(text, n=None):
    """``"1..40,45"`` -> zero-based indices ``[0..39, 44]`` (one-based, inclusive input)."""
    out = []
    for part in str(text).split(","):
        part = part.strip()
        if not part:
            continue
        try:
            if ".." in part:
                a, b = part.split("..", 1)
                lo = int(a)
                hi = int(b) if b else n
                if hi is None:
                    raise ValueError
                out.extend(range(lo - 1, hi))
            else:
                out.append(int(part) - 1)
        except ValueError:
            raise ValidationError(f"bad row range {part!r}") from None
    if n is not None:
        for i in out:
            if not 0 <= i < n:
                raise ValidationError(f"row {i + 1} out of range 1..{n}")
    return out


def load_dataset(path, args):
    path = Path(path)
    if path.suffix.lower() == ".csv":
        layout = getattr(args, "csv_layout", ROW_PER_INSTANCE)
        return load_csv(path, layout=layout, has_labels=not getattr(args, "no_labels", False))
    return load_ts(path)


def split_spec_from_args(args) -> SplitSpec:
    if args.take_first:
        mode = TAKE_FIRST
    elif args.seed is not None:
        mode = STRATIFIED
    elif args.learn_count is not None:
        mode = TAKE_FIRST
    else:
        mode = STRATIFIED
    return SplitSpec(
        learn_count=args.learn_count,
        learn_fraction=args.learn_fraction,
        train_count=args.train_count,
        train_fraction=args.train_fraction,
        test_count=args.test_count,
        test_fraction=args.test_fraction,
        seed=args.seed if args.seed is not None else 0,
        mode=mode,
    )


def add_split_flags(p, learn_required=False):
    g = p.add_argument_group("split")
    g.add_argument("--learn-count", type=int)
    g.add_argument("--learn-fraction", type=float)
    g.add_argument("--train-count", type=int)
    g.add_argument("--train-fraction", type=float)
    g.add_argument("--test-count", type=int)
    g.add_argument("--test-fraction", type=float)
    g.add_argument("--seed", type=int, help="stratified split seed (implies stratified mode)")
    g.add_argument("--take-first", action="store_true", help="take instances in file order")


def add_data_flags(p):
    p.add_argument("--csv-layout", choices=[ROW_PER_INSTANCE, LONG_FORMAT], default=ROW_PER_INSTANCE)
    p.add_argument("--no-labels", action="store_true", help="CSV input has no label column")


def config_flags(p):
    p.add_argument("--r", type=int_list, help="window length(s), comma-separated (default 2l-1)")
    p.add_argument("--l", type=int_list, default=[5], help="embedding dimension(s) (default 5)")
    p.add_argument("--k", type=int_list, default=[1], help="window shift(s) (default 1)")


def configs_from_args(args):
    return make_configs(args.r, args.l, args.k)


def learn_indices_from_args(args, ds):
    if getattr(args, "split", None):
        with open(args.split, encoding="utf-8") as fh:
            data = json.load(fh)
        return [i - 1 for i in data["learn"]]
    if getattr(args, "learn_rows", None):
        return parse_rows(args.learn_rows, ds.num_instances)
    if args.learn_count is None and args.learn_fraction is None:
        raise ValidationError("give --split, --learn-rows, --learn-count or --learn-fraction")
    return list(stratified_split(ds, split_spec_from_args(args)).learn)


def _range_text(idx):
    idx = sorted(idx)
    parts, i = [], 0
    while i < len(idx):
        j = i
        while j + 1 < len(idx) and idx[j + 1] == idx[j] + 1:
            j += 1
        parts.append(f"{idx[i] + 1}" if i == j else f"{idx[i] + 1}..{idx[j] + 1}")
        i = j + 1
    return ",".join(parts) or "-"


# --------------------------------------------------------------------------
# subcommands
# --------------------------------------------------------------------------


def cmd_split(args):
    ds = load_dataset(args.data, args)
    spec = split_spec_from_args(args)
    sp = stratified_split(ds, spec)
    out = {
        "dataset": str(args.data),
        "mode": spec.mode,
        "seed": spec.seed,
        "learn": [i + 1 for i in sp.learn],
        "train": [i + 1 for i in sp.train],
        "test": [i + 1 for i in sp.test],
        "leftover": [i + 1 for i in sp.leftover],
    }
    text = json.dumps(out, indent=1) + "\n"
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    for name in ("learn", "train", "test", "leftover"):
        idx = getattr(sp, name)
        print(f"{name}: {len(idx)} [{_range_text(idx)}]")
    return 0


def cmd_train(args):
    ds = load_dataset(args.data, args)
    configs = configs_from_args(args)
    learn = learn_indices_from_args(args, ds)
    channels = [c - 1 for c in args.channels] if args.channels else None
    t0 = time.perf_counter()
    bank = train_bank(ds, learn, configs, channels=channels, threads=args.threads)
    elapsed = time.perf_counter() - t0
    save_model(bank, args.out)
    print(f"learn instances: {len(learn)} [{_range_text(learn)}]")
    print(bank.summary())
    print(f"trained in {elapsed:.3f} s ({backend_name()} backend, {args.threads} thread(s)); wrote {args.out}")
    return 0


def cmd_transform(args):
    bank = load_model(args.model)
    ds = load_dataset(args.data, args)
    rows = list(range(ds.num_instances))
    if args.rows:
        rows = parse_rows(args.rows, ds.num_instances)
    if args.exclude_learn:
        learn = set(bank.learn_indices)
        rows = [i for i in rows if i not in learn]
    methods = parse_methods(args.methods)
    t0 = time.perf_counter()
    table = transform_set(ds.subset(rows), bank, methods, threads=args.threads)
    elapsed = time.perf_counter() - t0
    write_features(table, args.out, mode=args.mode, include_class=args.with_class)
    print(f"transformed {table.num_rows} instance(s) x {len(table.columns)} feature(s) in {elapsed:.3f} s; "
          f"wrote {args.out} ({args.mode})")
    return 0


def _pick_features(table: FeatureTable, names):
    if not names:
        return list(table.columns)
    names = [n.strip() for n in names.split(",") if n.strip()]
    for n in names:
        table.column(n)
    return names


def cmd_eval(args):
    table = read_features(args.features_csv)
    if table.labels is None:
        raise ValidationError(f"{args.features_csv} has no '{'class'}' column")
    names = _pick_features(table, args.features)
    n = table.num_rows
    train = parse_rows(args.train_rows, n) if args.train_rows else list(range(n))
    if args.test_rows:
        test = parse_rows(args.test_rows, n)
    elif args.train_rows:
        held = set(train)
        test = [i for i in range(n) if i not in held]
    else:
        test = list(range(n))
    X = table.select(names)
    y = np.array(table.labels, dtype=object)
    if args.classifier == "lda":
        model = lda_fit(X[train], y[train])
    else:
        model = KNN(args.k).fit(X[train], y[train])
    pred = model.predict(X[test])
    labels = sorted(set(table.labels), key=lambda s: (0, float(s), s) if _isnum(s) else (1, 0.0, s))
    ev = evaluate(pred, y[test], labels=labels)
    print(f"classifier: {args.classifier}" + (f" (k={args.k})" if args.classifier == "knn" else ""))
    print(f"features: {', '.join(names)}")
    print(f"train rows: {len(train)}, test rows: {len(test)}")
    print(ev.format())
    if args.report:
        rep = {"classifier": args.classifier, "features": names, "train_rows": len(train), "test_rows": len(test)}
        if args.classifier == "knn":
            rep["k"] = args.k
        else:
            rep["w"] = [float(v) for v in model.w]
            rep["b"] = model.b
        rep.update(ev.to_dict())
        Path(args.report).write_text(json.dumps(rep, indent=1) + "\n", encoding="utf-8")
    return 0


def _isnum(s):
    try:
        float(s)
        return True
    except ValueError:
        return False


PALETTE = ("#1f77b4", "#2ca02c", "#d62728", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f")


def scatter_svg(xs, ys, classes, splits, xlabel, ylabel, width=640, height=480):
    pad = 60
    uniq = sorted(set(classes), key=lambda s: (0, float(s), s) if _isnum(s) else (1, 0.0, s))
    color = {c: PALETTE[i % len(PALETTE)] for i, c in enumerate(uniq)}
    if len(xs):
        x0, x1 = float(np.min(xs)), float(np.max(xs))
        y0, y1 = float(np.min(ys)), float(np.max(ys))
    else:
        x0 = y0 = 0.0
        x1 = y1 = 1.0
    x1 = x1 if x1 > x0 else x0 + 1.0
    y1 = y1 if y1 > y0 else y0 + 1.0

    def px(x):
        return pad + (x - x0) / (x1 - x0) * (width - 2 * pad)

    def py(y):
        return height - pad - (y - y0) / (y1 - y0) * (height - 2 * pad)

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">',
        f'<rect x="{pad}" y="{pad}" width="{width - 2 * pad}" height="{height - 2 * pad}" fill="none" stroke="black"/>',
        f'<text x="{width / 2}" y="{height - 15}" text-anchor="middle" font-size="12">{xlabel}</text>',
        f'<text x="15" y="{height / 2}" text-anchor="middle" font-size="12" '
        f'transform="rotate(-90 15 {height / 2})">{ylabel}</text>',
    ]
    for x, y, c, s in zip(xs, ys, classes, splits):
        cx, cy = px(x), py(y)
        if s == "test":
            out.append(
                f'<polygon points="{cx:.2f},{cy - 4:.2f} {cx - 4:.2f},{cy + 3:.2f} {cx + 4:.2f},{cy + 3:.2f}" '
                f'fill="{color[c]}"/>'
            )
        else:
            out.append(f'<circle cx="{cx:.2f}" cy="{cy:.2f}" r="3" fill="{color[c]}"/>')
    for i, c in enumerate(uniq):
        out.append(f'<circle cx="{width - pad + 10}" cy="{pad + 14 * i}" r="4" fill="{color[c]}"/>')
        out.append(f'<text x="{width - pad + 18}" y="{pad + 14 * i + 4}" font-size="10">{c}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def cmd_scatter(args):
    table = read_features(args.features_csv)
    xs, ys = table.column(args.x), table.column(args.y)
    n = table.num_rows
    train = set(parse_rows(args.train_rows, n)) if args.train_rows else set()
    splits = ["train" if i in train else "test" for i in range(n)]
    classes = list(table.labels) if table.labels is not None else [""] * n
    with open(args.out, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["x", "y", "class", "split"])
        for row in zip(xs, ys, classes, splits):
            w.writerow([repr(float(row[0])), repr(float(row[1])), row[2], row[3]])
    if args.svg:
        Path(args.svg).write_text(scatter_svg(xs, ys, classes, splits, args.x, args.y), encoding="utf-8")
    print(f"wrote {n} point(s) to {args.out}" + (f" and {args.svg}" if args.svg else ""))
    return 0


def cmd_sweep(args):
    """Accuracy for each (r, l, k) triplet on its own, two class-wise features per method."""
    train_ds = load_dataset(args.data, args)
    test_ds = load_dataset(args.test_data, args)
    if test_ds.classes != train_ds.classes:
        raise ValidationError("train and test files declare different classes")
    configs = configs_from_args(args)
    learn = learn_indices_from_args(args, train_ds)
    held = set(learn)
    fit_rows = [i for i in range(train_ds.num_instances) if i not in held]
    channels = [c - 1 for c in args.channels] if args.channels else [0]
    methods = parse_methods(args.methods)
    lines = [["r", "l", "k", "channel", "method", "classifier", "accuracy", "seconds"]]
    for cfg in configs:
        t0 = time.perf_counter()
        bank = train_bank(train_ds, learn, [cfg], channels=channels, threads=args.threads)
        fit_tab = transform_set(train_ds.subset(fit_rows), bank, methods, threads=args.threads)
        test_tab = transform_set(test_ds, bank, methods, threads=args.threads)
        elapsed = time.perf_counter() - t0
        y_fit = np.array(fit_tab.labels, dtype=object)
        y_test = np.array(test_tab.labels, dtype=object)
        for ch in bank.channels:
            for m in methods:
                names = [f"ch{ch + 1}.cfg1.cls{y}.{m}" for y in range(1, bank.num_classes + 1)]
                Xf, Xt = fit_tab.select(names), test_tab.select(names)
                if args.classifier == "lda":
                    model = lda_fit(Xf, y_fit)
                else:
                    model = KNN(args.knn_k).fit(Xf, y_fit)
                acc = evaluate(model.predict(Xt), y_test).accuracy
                lines.append([cfg.r, cfg.l, cfg.k, ch + 1, str(m), args.classifier, f"{acc:.4f}", f"{elapsed:.3f}"])
                print(f"r={cfg.r} l={cfg.l} k={cfg.k} ch{ch + 1} {m}: accuracy {acc:.4f} ({elapsed:.2f} s)")
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            csv.writer(fh, lineterminator="\n").writerows(lines)
    return 0


# --------------------------------------------------------------------------
# parser
# --------------------------------------------------------------------------


def build_parser():
    p = argparse.ArgumentParser(prog="altsc", description="Adaptive law-based time series features.")
    p.add_argument(
        "--version",
        action="version",
        version=f"altsc {__version__} (alt-model format v{MODEL_VERSION}, feature-csv v{FEATURE_CSV_VERSION})",
    )
    sub = p.add_subparsers(dest="command", required=True)
    subs = {}

    def common(sp):
        sp.add_argument("--manifest", help="key = value file supplying defaults for any flag")
        return sp

    sp = common(sub.add_parser("split", help="partition a dataset into learn/train/test lists"))
    sp.add_argument("data", nargs="?")
    add_data_flags(sp)
    add_split_flags(sp)
    sp.add_argument("--out", help="write the split as JSON (one-based indices)")
    sp.set_defaults(func=cmd_split)
    subs["split"] = sp

    sp = common(sub.add_parser("train", help="learn shapelet banks and write a model file"))
    sp.add_argument("data", nargs="?")
    add_data_flags(sp)
    config_flags(sp)
    sp.add_argument("--channels", type=int_list, help="one-based channels to use (default all)")
    sp.add_argument("--split", help="split JSON from 'altsc split' (uses its learn list)")
    sp.add_argument("--learn-rows", help="explicit one-based learn rows, e.g. 1..10")
    add_split_flags(sp)
    sp.add_argument("--threads", type=int, default=1)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_train)
    subs["train"] = sp

    sp = common(sub.add_parser("transform", help="turn instances into a feature CSV"))
    sp.add_argument("model", nargs="?")
    sp.add_argument("data", nargs="?")
    add_data_flags(sp)
    sp.add_argument("--methods", default="mean_all", help="e.g. mean_all,mean@0.05,4th_moment@0.05")
    sp.add_argument("--rows", help="one-based rows of the data file to transform, e.g. 11..50")
    sp.add_argument("--exclude-learn", action="store_true", help="skip the rows the model was learned from")
    sp.add_argument("--mode", choices=[NEW_FILE, APPEND_FEATURE, APPEND_INSTANCE], default=NEW_FILE)
    sp.add_argument("--with-class", action="store_true", help="append the class label column")
    sp.add_argument("--threads", type=int, default=1)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_transform)
    subs["transform"] = sp

    sp = common(sub.add_parser("eval", help="fit a classifier on feature rows and report accuracy"))
    sp.add_argument("features_csv", nargs="?")
    sp.add_argument("--classifier", choices=["lda", "knn"], default="knn")
    sp.add_argument("--k", type=int, default=1, help="neighbours for knn")
    sp.add_argument("--features", help="comma-separated feature columns (default all)")
    sp.add_argument("--train-rows")
    sp.add_argument("--test-rows")
    sp.add_argument("--report", help="write a JSON report")
    sp.set_defaults(func=cmd_eval)
    subs["eval"] = sp

    sp = common(sub.add_parser("scatter", help="emit two feature columns as plot data (+ optional SVG)"))
    sp.add_argument("features_csv", nargs="?")
    sp.add_argument("--x")
    sp.add_argument("--y")
    sp.add_argument("--train-rows", help="rows marked 'train'; all others are 'test'")
    sp.add_argument("--out")
    sp.add_argument("--svg")
    sp.set_defaults(func=cmd_scatter)
    subs["scatter"] = sp

    sp = common(sub.add_parser("sweep", help="accuracy table over (r, l, k) triplets"))
    sp.add_argument("data", nargs="?", help="file the learn set and classifier training rows come from")
    sp.add_argument("test_data", nargs="?")
    add_data_flags(sp)
    config_flags(sp)
    sp.add_argument("--channels", type=int_list)
    sp.add_argument("--learn-rows")
    add_split_flags(sp)
    sp.add_argument("--methods", default="mean_all,mean@0.05")
    sp.add_argument("--classifier", choices=["lda", "knn"], default="lda")
    sp.add_argument("--knn-k", type=int, default=1)
    sp.add_argument("--threads", type=int, default=1)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_sweep)
    subs["sweep"] = sp
    return p, subs


REQUIRED = {
    "split": ["data"],
    "train": ["data", "out"],
    "transform": ["model", "data", "out"],
    "eval": ["features_csv"],
    "scatter": ["features_csv", "x", "y", "out"],
    "sweep": ["data", "test_data"],
}


def read_manifest(path):
    """``key = value`` lines; ``#`` starts a comment; keys use flag spelling."""
    out = {}
    with open(path, encoding="utf-8") as fh:
        for n, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise ValidationError(f"{path}:{n}: expected 'key = value'")
            out[key.strip().lstrip("-").replace("-", "_")] = value.strip()
    return out


def _apply_manifest(subparser, manifest):
    actions = {a.dest: a for a in subparser._actions}
    defaults = {}
    for key, value in manifest.items():
        if key in ("command", "manifest"):
            continue
        act = actions.get(key)
        if act is None:
            raise ValidationError(f"manifest key {key!r} is not an option of this command")
        if isinstance(act, argparse._StoreTrueAction):
            defaults[key] = value.lower() in ("1", "true", "yes", "on")
        else:
            defaults[key] = value  # argparse converts string defaults with the action's type
    subparser.set_defaults(**defaults)


def main(argv=None):
    parser, subs = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        pre, _ = parser.parse_known_args(argv)
        if getattr(pre, "manifest", None):
            _apply_manifest(subs[pre.command], read_manifest(pre.manifest))
        args = parser.parse_args(argv)
        missing = [k for k in REQUIRED[args.command] if getattr(args, k, None) in (None, "")]
        if missing:
            raise ValidationError(f"{args.command}: missing {', '.join(missing)}")
        return args.func(args)
    except AltError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
