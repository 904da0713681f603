"""Feature-vector datasets: synthetic generation, CSV I/O, splits and label noise.

CSV layout: header ``label,f0,f1,...,f{d-1}``, then one sample per line with
a non-negative integer label followed by ``d`` decimal floats. UTF-8.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import DimensionError, ParseError, SchemaError, SpecError


@dataclass
class FeatureDataset:
    features: np.ndarray
    labels: np.ndarray
    provenance: str = "synthetic"
    noise_record: list = field(default_factory=list)  # (index, original, corrupted)
    centroids: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.features.ndim != 2 or self.features.shape[0] != self.labels.shape[0]:
            raise DimensionError(
                f"{self.features.shape} features vs {self.labels.shape[0]} labels"
            )

    def __len__(self):
        return self.labels.shape[0]

    @property
    def dim(self):
        return self.features.shape[1]

    @property
    def classes(self):
        return np.unique(self.labels)

    def subset(self, idx):
        idx = np.asarray(idx)
        return FeatureDataset(self.features[idx], self.labels[idx], self.provenance)


def generate_synthetic(num_classes=40, per_class=30, dim=64, intra_spread=1.0,
                       inter_spread=4.0, hard_fraction=0.2, rng=None,
                       signal_dim=None, nuisance_spread=0.0):
    """Gaussian class clusters around random centroids.

    Class structure lives in a ``signal_dim``-dimensional subspace shared by
    all classes (the whole space by default): centroids lie on a sphere of
    radius ``inter_spread`` there, and samples add isotropic noise of scale
    ``intra_spread``. The remaining ``dim - signal_dim`` directions carry
    class-independent noise of scale ``nuisance_spread``. Both parts are then
    mixed by one random rotation. A ``hard_fraction`` of every class is
    centred halfway between its own centroid and a random other class's.
    """
    if dim < 2:
        raise DimensionError("dim must be >= 2")
    signal_dim = dim if signal_dim is None else signal_dim
    if not 1 <= signal_dim <= dim:
        raise DimensionError("signal_dim must lie in [1, dim]")
    if num_classes < 1 or per_class < 1:
        raise SpecError("counts must be >= 1")
    if not 0 <= hard_fraction < 1:
        raise SpecError("hard_fraction must lie in [0, 1)")
    if intra_spread < 0 or inter_spread <= 0 or nuisance_spread < 0:
        raise SpecError("spreads must be positive")
    c = rng.normal(size=(num_classes, signal_dim))
    centroids = inter_spread * c / np.linalg.norm(c, axis=1, keepdims=True)
    n_hard = int(round(hard_fraction * per_class))
    feats, labels = [], []
    for k in range(num_classes):
        centres = np.repeat(centroids[k][None, :], per_class, axis=0)
        if n_hard and num_classes > 1:
            others = rng.integers(0, num_classes - 1, size=n_hard)
            others = others + (others >= k)
            centres[:n_hard] = 0.5 * (centroids[k] + centroids[others])
        feats.append(centres + intra_spread * rng.normal(size=(per_class, signal_dim)))
        labels.append(np.full(per_class, k))
    signal = np.concatenate(feats)
    nuisance = nuisance_spread * rng.normal(size=(signal.shape[0], dim - signal_dim))
    rotation, _ = np.linalg.qr(rng.normal(size=(dim, dim)))
    features = np.hstack([signal, nuisance]) @ rotation.T
    centroids = np.hstack([centroids, np.zeros((num_classes, dim - signal_dim))]) @ rotation.T
    return FeatureDataset(features, np.concatenate(labels), "synthetic", centroids=centroids)


def inject_symmetric_noise(ds, ratio, rng):
    """Relabel exactly ``round(ratio * n)`` samples, each to a uniformly chosen other class."""
    if not 0 <= ratio < 1:
        raise SpecError("noise ratio must lie in [0, 1)")
    classes = ds.classes
    n = len(ds)
    count = int(np.floor(ratio * n + 0.5))
    if count == 0:
        return replace(ds, labels=ds.labels.copy(), noise_record=list(ds.noise_record))
    if len(classes) < 2:
        raise SpecError("cannot corrupt labels of a single-class dataset")
    idx = np.sort(rng.choice(n, size=count, replace=False))
    labels = ds.labels.copy()
    pos = np.searchsorted(classes, labels[idx])
    shift = rng.integers(1, len(classes), size=count)
    new = classes[(pos + shift) % len(classes)]
    record = list(ds.noise_record)
    record += [(int(i), int(o), int(c)) for i, o, c in zip(idx, labels[idx], new)]
    labels[idx] = new
    return replace(ds, labels=labels, noise_record=record)


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float = 0.5
    shuffle: bool = False
    seed: int = 0


def class_disjoint_split(ds, spec=SplitSpec()):
    """Split by class: the first share of (optionally shuffled) classes trains."""
    classes = ds.classes
    if len(classes) < 2:
        raise SpecError("need at least two classes to split")
    n_train = int(round(spec.train_fraction * len(classes)))
    if not 0 < n_train < len(classes):
        raise SpecError(f"split leaves one side empty ({n_train} of {len(classes)} classes)")
    if spec.shuffle:
        from .numerics import Rng

        classes = Rng(spec.seed).permutation(classes)
    train_classes = np.sort(classes[:n_train])
    in_train = np.isin(ds.labels, train_classes)
    return ds.subset(np.flatnonzero(in_train)), ds.subset(np.flatnonzero(~in_train))


# -- CSV -------------------------------------------------------------------


def write_csv(ds, path):
    tmp = f"{path}.tmp"
    with open(tmp, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["label"] + [f"f{k}" for k in range(ds.dim)])
        for y, row in zip(ds.labels, ds.features):
            w.writerow([int(y)] + [repr(float(x)) for x in row])
    os.replace(tmp, path)


def ingest_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError("empty file", 1) from None
        dim = len(header) - 1
        if header[:1] != ["label"] or header[1:] != [f"f{k}" for k in range(dim)] or dim < 1:
            raise SchemaError("header must be label,f0,f1,...", 1)
        feats, labels = [], []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != dim + 1:
                raise SchemaError(f"expected {dim + 1} columns, got {len(row)}", lineno)
            try:
                y = int(row[0])
                x = [float(v) for v in row[1:]]
            except ValueError as exc:
                raise ParseError(str(exc), lineno) from None
            if y < 0:
                raise ParseError(f"negative label {y}", lineno)
            if not all(np.isfinite(x)):
                raise ParseError("non-finite feature value", lineno)
            labels.append(y)
            feats.append(x)
    return FeatureDataset(np.array(feats).reshape(-1, dim), np.array(labels, dtype=np.int64), "ingested")


def write_noise_record(ds, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["index", "original", "corrupted"])
        w.writerows(ds.noise_record)
