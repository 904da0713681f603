"""Batch construction and triplet mining.

Miners take unit embeddings, labels and an :class:`~lsdml.numerics.Rng` and
return an ``(m, 3)`` integer array of (anchor, positive, negative) indices.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EmptyPairError, SpecError
from .losses import pairwise_distances

TIE_EPS = 1e-12


@dataclass(frozen=True)
class BatchSpec:
    classes_per_batch: int = 8
    samples_per_class: int = 4

    def __post_init__(self):
        if self.classes_per_batch < 2 or self.samples_per_class < 2:
            raise SpecError("batch spec needs >= 2 classes and >= 2 samples per class")

    @property
    def size(self):
        return self.classes_per_batch * self.samples_per_class


def class_index(labels):
    """Map class id -> array of sample indices, classes sorted ascending."""
    labels = np.asarray(labels)
    classes = np.unique(labels)
    return {int(c): np.flatnonzero(labels == c) for c in classes}


def sample_batch(labels, spec, rng, index=None):
    """Pick ``classes_per_batch`` classes, then ``samples_per_class`` indices each.

    Classes with fewer members than requested are sampled with replacement.
    If the dataset has fewer classes than requested but at least two, all of
    them are used.
    """
    index = class_index(labels) if index is None else index
    classes = np.array(sorted(index))
    if len(classes) < 2:
        raise SpecError("need at least two classes to build a batch")
    k = min(spec.classes_per_batch, len(classes))
    chosen = rng.choice(classes, size=k, replace=False)
    out = []
    for c in chosen:
        members = index[int(c)]
        replace = len(members) < spec.samples_per_class
        out.append(rng.choice(members, size=spec.samples_per_class, replace=replace))
    return np.concatenate(out)


def _masks(labels):
    labels = np.asarray(labels)
    same = labels[:, None] == labels[None, :]
    pos = same & ~np.eye(len(labels), dtype=bool)
    return pos, ~same


def mine_random(unit, labels, rng):
    """One uniformly random (positive, negative) per anchor that has both."""
    pos, neg = _masks(labels)
    out = []
    for a in range(len(labels)):
        p_idx, n_idx = np.flatnonzero(pos[a]), np.flatnonzero(neg[a])
        if len(p_idx) and len(n_idx):
            out.append((a, rng.choice(p_idx), rng.choice(n_idx)))
    if not out:
        raise EmptyPairError("no anchor has both a positive and a negative")
    return np.array(out, dtype=np.int64)


def mine_semihard(unit, labels, rng, margin=0.2):
    """For every anchor-positive pair choose a semi-hard negative.

    Preference order: the closest negative inside ``d_ap < d_an < d_ap +
    margin``; else the closest negative with ``d_an > d_ap``; else a random
    negative.
    """
    if margin <= 0:
        raise ValueError("margin must be positive")
    d = pairwise_distances(unit)
    pos, neg = _masks(labels)
    out = []
    for a in range(len(labels)):
        n_idx = np.flatnonzero(neg[a])
        if not len(n_idx):
            continue
        d_an = d[a, n_idx]
        for p in np.flatnonzero(pos[a]):
            d_ap = d[a, p]
            farther = d_an > d_ap
            window = farther & (d_an < d_ap + margin)
            cand = window if window.any() else farther
            if cand.any():
                k = np.flatnonzero(cand)
                n = n_idx[k[np.argmin(d_an[k])]]
            else:
                n = rng.choice(n_idx)
            out.append((a, p, n))
    if not out:
        raise EmptyPairError("no anchor has both a positive and a negative")
    return np.array(out, dtype=np.int64)


def mine_softhard(unit, labels, rng):
    """Sample from the harder half of positives and of violating negatives.

    The positive is drawn uniformly among positives at or beyond the median
    positive distance. Negatives closer than that positive are candidates
    (all negatives if none are); the negative is drawn uniformly from the
    candidates at or below their median distance.
    """
    d = pairwise_distances(unit)
    pos, neg = _masks(labels)
    out = []
    for a in range(len(labels)):
        p_idx, n_idx = np.flatnonzero(pos[a]), np.flatnonzero(neg[a])
        if not len(p_idx) or not len(n_idx):
            continue
        d_ap = d[a, p_idx]
        hard_p = p_idx[d_ap >= np.median(d_ap) - TIE_EPS]
        p = rng.choice(hard_p)
        d_an = d[a, n_idx]
        violating = d_an < d[a, p]
        cand, d_c = (n_idx[violating], d_an[violating]) if violating.any() else (n_idx, d_an)
        hard_n = cand[d_c <= np.median(d_c) + TIE_EPS]
        out.append((a, p, rng.choice(hard_n)))
    if not out:
        raise EmptyPairError("no anchor has both a positive and a negative")
    return np.array(out, dtype=np.int64)


def log_inverse_sphere_density(dist, dim, clip=0.5):
    """``-log q(d)`` up to a constant, for pairwise distances of points uniform on S^(dim-1).

    q(d) is proportional to d^(dim-2) (1 - d^2/4)^((dim-3)/2). Distances are
    clipped below at ``clip``; the second factor is floored to stay finite at
    antipodal pairs.
    """
    d = np.maximum(np.asarray(dist, dtype=np.float64), clip)
    inner = np.maximum(1.0 - 0.25 * d * d, 1e-8)
    return (2.0 - dim) * np.log(d) - 0.5 * (dim - 3.0) * np.log(inner)


def distance_weights(dist, dim, clip=0.5):
    """Normalized negative-sampling probabilities, proportional to 1/q(d)."""
    lw = log_inverse_sphere_density(dist, dim, clip)
    w = np.exp(lw - lw.max())
    return w / w.sum()


def mine_distance_weighted(unit, labels, rng, clip=0.5):
    """For every anchor-positive pair, draw a negative with probability ~ 1/q(d_an)."""
    if clip <= 0:
        raise ValueError("clip must be positive")
    dim = unit.shape[1]
    d = pairwise_distances(unit)
    pos, neg = _masks(labels)
    out = []
    for a in range(len(labels)):
        n_idx = np.flatnonzero(neg[a])
        p_idx = np.flatnonzero(pos[a])
        if not len(n_idx) or not len(p_idx):
            continue
        w = distance_weights(d[a, n_idx], dim, clip)
        negs = rng.choice(n_idx, size=len(p_idx), p=w)
        out.extend(zip([a] * len(p_idx), p_idx, negs))
    if not out:
        raise EmptyPairError("no anchor has both a positive and a negative")
    return np.array(out, dtype=np.int64)


MINERS = {
    "random": mine_random,
    "semihard": mine_semihard,
    "softhard": mine_softhard,
    "distance": mine_distance_weighted,
}
