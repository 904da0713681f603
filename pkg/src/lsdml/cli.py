"""Command-line driver: ``lsdml {gen-data,train,eval,sweep,diagnose}``.

Exit codes: 0 success, 2 configuration / input error, 3 numeric divergence.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

from . import datasets
from .config import ExperimentConfig
from .encoder import MlpEncoder
from .errors import ConfigError, DivergenceError, LsdError
from .numerics import Rng
from .trainer import diagnose, evaluate, load_data, sweep, train

EXIT_OK, EXIT_CONFIG, EXIT_DIVERGED = 0, 2, 3


def _config(args):
    overrides = list(args.override or [])
    if args.seed is not None:
        overrides.append(f"train.seed={args.seed}")
    return ExperimentConfig.load(args.config, overrides)


def _write_json(path, obj):
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
    os.replace(tmp, path)


def cmd_gen_data(args):
    cfg = _config(args)
    d = cfg.data
    if d.source != "synthetic":
        raise ConfigError("gen-data needs data.source = synthetic")
    ds = datasets.generate_synthetic(
        d.num_classes, d.per_class, d.dim, d.intra_spread, d.inter_spread, d.hard_fraction,
        Rng(cfg.train.seed).split("data"), d.signal_dim, d.nuisance_spread,
    )
    os.makedirs(args.out, exist_ok=True)
    datasets.write_csv(ds, os.path.join(args.out, "data.csv"))
    print(f"wrote {len(ds)} samples x {ds.dim} features to {args.out}/data.csv")


def cmd_train(args):
    cfg = _config(args)
    result = train(cfg, args.out)
    print(json.dumps(result.summary["final"], indent=2, sort_keys=True))


def _eval_inputs(args):
    cfg = _config(args)
    enc = MlpEncoder.load(args.checkpoint)
    train_set, test_set = load_data(cfg, Rng(cfg.train.seed))
    return enc, train_set if args.split == "train" else test_set


def cmd_eval(args):
    enc, ds = _eval_inputs(args)
    report = evaluate(enc, ds)
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        _write_json(os.path.join(args.out, "eval.json"), report)
    print(json.dumps(report, indent=2, sort_keys=True))


def cmd_diagnose(args):
    enc, ds = _eval_inputs(args)
    full = diagnose(enc.embed(ds.features), ds.labels)
    report = {k: full[k] for k in ("pi_intra", "pi_inter", "pi_ratio", "spectral_decay")}
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        _write_json(os.path.join(args.out, "diagnose.json"), report)
    print(json.dumps(report, indent=2, sort_keys=True))


def cmd_sweep(args):
    cfg = _config(args)
    try:
        values = [float(v) for v in args.values.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"--values must be comma-separated numbers, got {args.values!r}") from None
    seeds = [cfg.train.seed + k for k in range(args.seeds)]
    table = sweep(cfg, args.param, values, seeds, args.out)
    for row in table:
        print(f"{row['parameter']}={row['value']} seed={row['seed']} R@1={row['recall_at_1']:.4f} "
              f"mAP={row['map']:.4f} pi_ratio={row['pi_ratio']:.4f}")


def build_parser():
    p = argparse.ArgumentParser(prog="lsdml", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, out_required=True):
        sp.add_argument("--config", help="INI-style experiment config")
        sp.add_argument("--seed", type=int, help="master seed (overrides train.seed)")
        sp.add_argument("--out", required=out_required, help="output directory")
        sp.add_argument("--override", action="append", metavar="KEY=VALUE",
                        help="config override, e.g. lsd.lam=500 (repeatable)")
        return sp

    common(sub.add_parser("gen-data", help="write the synthetic dataset as CSV")).set_defaults(func=cmd_gen_data)
    common(sub.add_parser("train", help="train one model")).set_defaults(func=cmd_train)
    for name, func, text in (("eval", cmd_eval, "retrieval + embedding diagnostics"),
                             ("diagnose", cmd_diagnose, "embedding-space diagnostics only")):
        sp = common(sub.add_parser(name, help=text), out_required=False)
        sp.add_argument("--checkpoint", required=True)
        sp.add_argument("--split", choices=("train", "test"), default="test")
        sp.set_defaults(func=func)
    sp = common(sub.add_parser("sweep", help="one run per parameter value"))
    sp.add_argument("--param", required=True, help="lambda, tau, noise_ratio or any section.key")
    sp.add_argument("--values", required=True, help="comma-separated values")
    sp.add_argument("--seeds", type=int, default=1, help="paired seeds per value")
    sp.set_defaults(func=cmd_sweep)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(name)s %(levelname)s %(message)s")
    try:
        args.func(args)
    except DivergenceError as exc:
        print(f"error: training diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except (LsdError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
