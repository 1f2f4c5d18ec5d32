#!/usr/bin/env python3
"""Extract the columns sbnet reads from the college-proximity wage data.

Input is the Card (1995) extract as distributed with Wooldridge's textbook
data (card.csv or card.csv.bz2, e.g. from the `wooldridge` Python package).
Rows with a missing value in any kept column are dropped.

    python3 tools/prepare_college.py card.csv.bz2 data/college.csv
"""

import argparse
import bz2
import csv
import sys

COLUMNS = ["lwage", "educ", "exper", "black", "south", "married", "smsa", "nearc4"]


def open_text(path):
    if path.endswith(".bz2"):
        return bz2.open(path, "rt", newline="")
    return open(path, newline="")


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("source", help="card.csv or card.csv.bz2")
    parser.add_argument("out", help="output CSV")
    args = parser.parse_args()

    with open_text(args.source) as f:
        reader = csv.DictReader(f)
        missing = [c for c in COLUMNS if c not in (reader.fieldnames or [])]
        if missing:
            sys.exit(f"{args.source}: missing columns {', '.join(missing)}")
        kept, dropped = [], 0
        for row in reader:
            values = [row[c].strip() for c in COLUMNS]
            if any(v in ("", "NA", "nan", "NaN", ".") for v in values):
                dropped += 1
                continue
            kept.append(values)

    with open(args.out, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(COLUMNS)
        writer.writerows(kept)
    print(f"wrote {len(kept)} rows to {args.out} ({dropped} incomplete rows dropped)")


if __name__ == "__main__":
    main()
