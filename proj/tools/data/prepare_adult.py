#!/usr/bin/env python3
"""Writes a seeded row downsample of the UCI Adult training file plus its schema.

usage: prepare_adult.py ADULT_DATA OUT_DIR [--rows 5000] [--seed 7]

ADULT_DATA is the original comma-separated `adult.data` (32,561 rows, no
header). Missing cells stay as `?`; the loader imputes them.
"""
import argparse
import csv
import json
import pathlib
import random

COLUMNS = [
    ("age", "numerical"), ("workclass", "categorical"), ("fnlwgt", "numerical"),
    ("education", "categorical"), ("education-num", "numerical"),
    ("marital-status", "categorical"), ("occupation", "categorical"),
    ("relationship", "categorical"), ("race", "categorical"), ("sex", "categorical"),
    ("capital-gain", "numerical"), ("capital-loss", "numerical"),
    ("hours-per-week", "numerical"), ("native-country", "categorical"),
    ("income", "categorical"),
]


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("adult_data")
    ap.add_argument("out_dir")
    ap.add_argument("--rows", type=int, default=5000)
    ap.add_argument("--seed", type=int, default=7)
    args = ap.parse_args()

    with open(args.adult_data, newline="") as fh:
        rows = [[c.strip() for c in r] for r in csv.reader(fh) if len(r) == len(COLUMNS)]
    rng = random.Random(args.seed)
    sample = sorted(rng.sample(range(len(rows)), args.rows))

    out = pathlib.Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / f"adult_{args.rows}.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([name for name, _ in COLUMNS])
        for i in sample:
            w.writerow(rows[i])
    schema = {"columns": [
        {"name": name, "kind": kind, **({"label": True} if name == "income" else {})}
        for name, kind in COLUMNS
    ]}
    (out / "adult_schema.json").write_text(json.dumps(schema, indent=2) + "\n")


if __name__ == "__main__":
    main()
