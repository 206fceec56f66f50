"""Convert the GunPoint / BasicMotions copies shipped in the ``pyts`` wheel to ``.ts``.

Usage: python tools/convert_pyts_cache.py <path to pyts/datasets/cached_datasets> <out dir>
"""
import sys
from pathlib import Path


def _fmt(tok):
    return repr(float(tok))


def write_ts(path, name, rows, labels, univariate, dims):
    classes = sorted(set(labels), key=lambda s: (not s.lstrip("-").isdigit(), int(s) if s.lstrip("-").isdigit() else 0, s))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"@problemName {name}\n@timeStamps false\n@missing false\n")
        fh.write(f"@univariate {'true' if univariate else 'false'}\n")
        if not univariate:
            fh.write(f"@dimensions {dims}\n")
        fh.write(f"@equalLength true\n@seriesLength {len(rows[0][0])}\n")
        fh.write(f"@classLabel true {' '.join(classes)}\n@data\n")
        for chans, lab in zip(rows, labels):
            fh.write(":".join(",".join(_fmt(v) for v in ch) for ch in chans) + f":{lab}\n")


def ucr_txt(src, name, split, out):
    rows, labels = [], []
    for line in open(src / "UCR" / name / f"{name}_{split}.txt"):
        toks = line.split()
        if toks:
            labels.append(str(int(float(toks[0]))))
            rows.append([toks[1:]])
    write_ts(out / f"{name}_{split}.ts", name, rows, labels, True, 1)


def uea_arff(src, name, split, out):
    rows, labels = [], []
    for line in open(src / "UEA" / name / f"{name}_{split}.arff"):
        if line.startswith("'"):
            body, lab = line.strip().rsplit(",", 1)
            rows.append([ch.split(",") for ch in body.strip("'").split("\\n")])
            labels.append(lab)
    write_ts(out / f"{name}_{split}.ts", name, rows, labels, False, len(rows[0]))


if __name__ == "__main__":
    src, out = Path(sys.argv[1]), Path(sys.argv[2])
    for split in ("TRAIN", "TEST"):
        ucr_txt(src, "GunPoint", split, out)
        uea_arff(src, "BasicMotions", split, out)
