"""Shared argument handling for the experiment scripts."""

import argparse
import csv
import os
import sys

from lsdml.config import ExperimentConfig


def parser(description):
    p = argparse.ArgumentParser(description=description)
    p.add_argument("--config", help="base INI config (defaults to the built-in synthetic benchmark)")
    p.add_argument("--seeds", type=int, default=10, help="number of paired seeds")
    p.add_argument("--out", help="write a CSV of per-seed results here")
    p.add_argument("--override", action="append", default=[], metavar="KEY=VALUE")
    return p


def base_config(args):
    return ExperimentConfig.load(args.config, args.override)


def write_rows(path, rows):
    if not path:
        return
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
        w.writeheader()
        w.writerows(rows)


def say(*parts):
    print(*parts, flush=True, file=sys.stdout)
