"""Training loop, evaluation and parameter sweeps."""

from __future__ import annotations

import csv
import io
import json
import logging
import os
import time
from dataclasses import dataclass, field

import numpy as np

from . import datasets
from .config import ExperimentConfig
from .encoder import Adam, MlpEncoder, adam_step
from .errors import DimensionError, DivergenceError
from .evaluation import embedding_density, retrieval_report, spectral_decay
from .losses import (
    EmbeddingBatch,
    ProxyBank,
    contrastive_loss,
    margin_loss,
    multisimilarity_loss,
    proxynca_loss,
    triplet_loss,
)
from .lsd import LsdConfig, alpha_schedule, combined_loss, hard_targets, lsd_objective, teacher_targets
from .numerics import Rng
from .samplers import MINERS, BatchSpec, class_index, sample_batch

log = logging.getLogger(__name__)

EPOCH_COLUMNS = [
    "epoch", "alpha", "mean_dml", "mean_lsd", "mean_combined",
    "recall_at_1", "map", "pi_ratio", "spectral_decay",
]
TRIPLET_LOSSES = ("triplet", "margin")


@dataclass
class TrainResult:
    encoder: MlpEncoder
    epochs: list
    summary: dict
    train_set: datasets.FeatureDataset = field(repr=False)
    test_set: datasets.FeatureDataset = field(repr=False)
    timings: list = field(default_factory=list)


def load_data(cfg, rng):
    """Build train/test splits; label noise touches the train split only."""
    d = cfg.data
    if d.source == "csv":
        ds = datasets.ingest_csv(d.path)
    else:
        ds = datasets.generate_synthetic(
            d.num_classes, d.per_class, d.dim, d.intra_spread, d.inter_spread,
            d.hard_fraction, rng.split("data"), d.signal_dim, d.nuisance_spread,
        )
    train, test = datasets.class_disjoint_split(ds, datasets.SplitSpec(d.train_fraction))
    if d.noise_ratio > 0:
        train = datasets.inject_symmetric_noise(train, d.noise_ratio, rng.split("noise"))
    return train, test


def evaluate(encoder, dataset, ks=(1, 2, 4, 8)):
    """Retrieval, density and spectral diagnostics of ``encoder`` on ``dataset``."""
    if dataset.dim != encoder.dims[0]:
        raise DimensionError(f"encoder expects {encoder.dims[0]} features, dataset has {dataset.dim}")
    emb = encoder.embed(dataset.features)
    return diagnose(emb, dataset.labels, ks)


def diagnose(embeddings, labels, ks=(1, 2, 4, 8)):
    r = retrieval_report(embeddings, labels, ks)
    dens = embedding_density(embeddings, labels)
    spec = spectral_decay(embeddings)
    out = {f"recall_at_{k}": v for k, v in r.recall_at.items()}
    out.update(map=r.map_score, **dens.to_dict(), spectral_decay=spec.score)
    return out


def _dml_loss(cfg, batch, miner_rng, proxies):
    lc, mc = cfg.loss, cfg.miner
    triplets = None
    if lc.kind in TRIPLET_LOSSES:
        miner = MINERS[mc.kind]
        kwargs = {"semihard": {"margin": mc.margin}, "distance": {"clip": mc.clip}}.get(mc.kind, {})
        triplets = miner(batch.unit, batch.labels, miner_rng, **kwargs)
    if lc.kind == "triplet":
        return triplet_loss(batch, triplets, lc.margin)
    if lc.kind == "margin":
        return margin_loss(batch, triplets, lc.margin, lc.beta)
    if lc.kind == "contrastive":
        return contrastive_loss(batch, lc.contrastive_margin)
    if lc.kind == "multisimilarity":
        return multisimilarity_loss(batch, lc.ms_alpha, lc.ms_beta, lc.ms_base)
    return proxynca_loss(batch, proxies)


def _dump_batch(out_dir, **arrays):
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
        np.savez(os.path.join(out_dir, "divergence_batch.npz"), **arrays)


def train(cfg, out_dir=None):
    """Run one experiment. Writes run artifacts to ``out_dir`` when given."""
    cfg.validate()
    t_cfg, o_cfg, l_cfg = cfg.train, cfg.optim, cfg.lsd
    rng = Rng(t_cfg.seed)
    train_set, test_set = load_data(cfg, rng)
    dims = (train_set.dim, *cfg.model.hidden, cfg.model.embed_dim)
    enc = MlpEncoder.init(dims, rng.split("init"))
    opt = Adam()
    proxies, proxy_opt = None, None
    if cfg.loss.kind == "proxynca":
        proxies = ProxyBank.init(train_set.classes, cfg.model.embed_dim, rng.split("proxies"))
        proxy_opt = Adam()
    batch_rng, miner_rng = rng.split("batch"), rng.split("miner")

    spec = BatchSpec(t_cfg.classes_per_batch, t_cfg.samples_per_class)
    index = class_index(train_set.labels)
    steps = t_cfg.steps_per_epoch or max(1, len(train_set) // spec.size)
    total = t_cfg.epochs
    use_lsd = l_cfg.enabled and l_cfg.lam > 0
    lsd_cfg = LsdConfig(l_cfg.tau, l_cfg.lam, total, l_cfg.metric)

    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
        _write_atomic(os.path.join(out_dir, "config.resolved"), cfg.to_text())
        if train_set.noise_record:
            datasets.write_noise_record(train_set, os.path.join(out_dir, "noise.csv"))

    rows, timings = [], []
    for t in range(1, total + 1):
        start = time.perf_counter()
        # the student as it stands at the end of epoch t-1 teaches epoch t
        teacher = enc.snapshot(t - 1)
        alpha = alpha_schedule(t, total)
        sums = np.zeros(3)
        for _ in range(steps):
            idx = sample_batch(train_set.labels, spec, batch_rng, index)
            x, y = train_set.features[idx], train_set.labels[idx]
            emb, trace = enc.forward(x)
            batch = EmbeddingBatch.from_raw(emb, y)
            out = _dml_loss(cfg, batch, miner_rng, proxies)
            dml_value, r_value = out.value, 0.0
            if use_lsd:
                if l_cfg.targets == "teacher":
                    targets = teacher_targets(teacher.embed(x), l_cfg.tau, l_cfg.metric)
                else:
                    targets = hard_targets(y)
                r_value, r_grad = lsd_objective(batch, targets, l_cfg.tau, t, total, l_cfg.metric)
                out = combined_loss(out, r_value, r_grad, lsd_cfg)
            if not (np.isfinite(out.value) and np.all(np.isfinite(out.grad_raw))):
                _dump_batch(out_dir, indices=idx, features=x, labels=y, embeddings=emb)
                raise DivergenceError(f"non-finite loss at epoch {t}")
            grads = enc.backward(trace, out.grad_raw)
            adam_step(enc, opt, grads, o_cfg.lr, o_cfg.weight_decay)
            if proxies is not None:
                proxy_opt.step([proxies.vectors], [out.grad_proxies], o_cfg.proxy_lr)
                proxies.renormalize()
            sums += (dml_value, r_value, out.value)
        means = [float(v) for v in sums / steps]
        row = {"epoch": t, "alpha": alpha, "mean_dml": means[0], "mean_lsd": means[1],
               "mean_combined": means[2]}
        if t_cfg.eval_every_epoch or t == total:
            m = evaluate(enc, test_set)
            row.update(recall_at_1=m["recall_at_1"], map=m["map"], pi_ratio=m["pi_ratio"],
                       spectral_decay=m["spectral_decay"])
        rows.append(row)
        timings.append({"epoch": t, "seconds": time.perf_counter() - start})
        log.info("epoch %d/%d alpha=%.3f dml=%.4f lsd=%.4f R@1=%s", t, total, alpha,
                 means[0], means[1], row.get("recall_at_1", "-"))

    final = evaluate(enc, test_set)
    # density and spectrum of the training embeddings, under the labels trained on
    train_emb = enc.embed(train_set.features)
    final["train_pi_ratio"] = embedding_density(train_emb, train_set.labels).pi_ratio
    final["train_spectral_decay"] = spectral_decay(train_emb).score
    summary = {
        "seed": t_cfg.seed,
        "epochs": total,
        "n_train": len(train_set),
        "n_test": len(test_set),
        "noisy_labels": len(train_set.noise_record),
        "final": final,
    }
    result = TrainResult(enc, rows, summary, train_set, test_set, timings)
    if out_dir:
        enc.save(os.path.join(out_dir, "checkpoint.json"))
        _write_atomic(os.path.join(out_dir, "epochs.csv"), epochs_csv(rows))
        _write_atomic(os.path.join(out_dir, "timings.csv"), _csv(timings, ["epoch", "seconds"]))
        _write_atomic(os.path.join(out_dir, "summary.json"), json.dumps(summary, indent=2, sort_keys=True))
    return result


def _fmt_cell(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _csv(rows, columns):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_fmt_cell(r.get(c)) for c in columns])
    return buf.getvalue()


def epochs_csv(rows):
    return _csv(rows, EPOCH_COLUMNS)


def _write_atomic(path, text):
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    os.replace(tmp, path)


SWEEP_KEYS = {"lambda": "lsd.lam", "tau": "lsd.tau", "noise_ratio": "data.noise_ratio"}
SWEEP_COLUMNS = ["parameter", "value", "seed", "recall_at_1", "map", "pi_ratio", "spectral_decay"]


def sweep(cfg, parameter, values, seeds=None, out_dir=None):
    """One run per (value, seed); seeds are shared across values for paired comparison."""
    key = SWEEP_KEYS.get(parameter, parameter)
    if len(values) < 2:
        raise ValueError("a sweep needs at least two values")
    seeds = [cfg.train.seed] if seeds is None else list(seeds)
    table = []
    for value in values:
        for seed in seeds:
            run_cfg = ExperimentConfig.from_text(cfg.to_text(), [f"{key}={value}", f"train.seed={seed}"])
            sub = os.path.join(out_dir, f"{parameter}={value}", f"seed={seed}") if out_dir else None
            final = train(run_cfg, sub).summary["final"]
            table.append({"parameter": parameter, "value": value, "seed": seed,
                          **{c: final[c] for c in SWEEP_COLUMNS[3:]}})
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
        _write_atomic(os.path.join(out_dir, "sweep.csv"), _csv(table, SWEEP_COLUMNS))
    return table
