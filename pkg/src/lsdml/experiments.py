"""Paired-seed experiment helpers shared by scripts/ and the acceptance suite.

Every arm of a comparison runs on the same list of seeds, so arm A and arm B
see the same data, split, label noise, initialization and batch order; only
the overridden settings differ.
"""

from __future__ import annotations

import statistics

from .config import ExperimentConfig
from .trainer import train


def run_final(base, overrides=(), seed=0, out_dir=None):
    """Final-checkpoint metrics of one run (per-epoch evaluation off)."""
    cfg = ExperimentConfig.from_text(
        base.to_text(), [*overrides, f"train.seed={seed}", "train.eval_every_epoch=false"]
    )
    return train(cfg, out_dir).summary["final"]


def paired_runs(base, arms, seeds):
    """``{arm: [final metrics per seed]}`` for ``arms = {name: overrides}``."""
    return {name: [run_final(base, ov, s) for s in seeds] for name, ov in arms.items()}


def gaps(a, b, key="recall_at_1"):
    """Per-seed differences a - b of one metric."""
    return [x[key] - y[key] for x, y in zip(a, b, strict=True)]


def median_gap(a, b, key="recall_at_1"):
    return statistics.median(gaps(a, b, key))


def wins(a, b, key="recall_at_1"):
    """Number of seeds where arm a scores strictly higher than arm b."""
    return sum(g > 0 for g in gaps(a, b, key))


def spread(values):
    return max(values) - min(values)
