"""Prepare raw UCI benchmark files into canonical labeled CSVs.

Raw files are not redistributed; download them yourself and point this
script at the directory holding them:

    abalone.data    https://archive.ics.uci.edu/dataset/1/abalone
    ann-test.data   https://archive.ics.uci.edu/dataset/102/thyroid+disease
    ctg.csv         https://archive.ics.uci.edu/dataset/193/cardiotocography
                    (export the measurement block of CTG.xls as CSV with
                    an NSP column)

Each prepared benchmark is written as <name>.csv with an anomaly/nominal
label column plus a .manifest.json sidecar recording counts and checksum.
Expected published shapes: abalone (1920, 9, 29), ann-thyroid-1v3
(3251, 21, 73), cardiotocography (1700, 22, 45).

Run: python demos/prepare_benchmarks.py <raw-dir> [out-dir]
"""

import sys
from pathlib import Path

from ifaad.data import prepare_abalone, prepare_ann_thyroid, prepare_cardiotocography, write_canonical

PREPARERS = {
    "abalone.data": ("abalone", prepare_abalone),
    "ann-test.data": ("ann-thyroid-1v3", prepare_ann_thyroid),
    "ctg.csv": ("cardiotocography", prepare_cardiotocography),
}


def main() -> int:
    if len(sys.argv) < 2:
        print(__doc__)
        return 2
    raw_dir = Path(sys.argv[1])
    out_dir = Path(sys.argv[2]) if len(sys.argv) > 2 else Path(__file__).parent / "output" / "benchmarks"

    prepared = 0
    for filename, (name, prepare) in PREPARERS.items():
        raw = raw_dir / filename
        if not raw.exists():
            print(f"skip {name}: {raw} not found")
            continue
        ds = prepare(raw)
        out = write_canonical(ds, out_dir / f"{name}.csv")
        print(f"{name}: {ds.n} instances, {ds.dim} dims, {ds.anomaly_count} anomalies -> {out}")
        prepared += 1

    if not prepared:
        print("\nno raw files found; nothing prepared")
        return 1
    print(f"\nprepared {prepared} benchmark(s); feed them to the CLI via --dataset <path>")
    return 0


if __name__ == "__main__":
    sys.exit(main())
