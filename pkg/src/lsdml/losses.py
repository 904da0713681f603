"""Baseline metric-learning objectives with analytic gradients.

Every loss works on the unit rows of an :class:`EmbeddingBatch`, builds the
gradient with respect to those unit rows, and chains it back to the raw
embeddings through the normalization Jacobian. Distances are Euclidean on
unit vectors throughout.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, EmptyPairError, UnknownClassError
from .numerics import normalize_rows, project_out


@dataclass
class EmbeddingBatch:
    raw: np.ndarray
    unit: np.ndarray
    norms: np.ndarray
    labels: np.ndarray

    @classmethod
    def from_raw(cls, raw, labels):
        raw = np.asarray(raw, dtype=np.float64)
        labels = np.asarray(labels)
        if raw.ndim != 2 or raw.shape[0] != labels.shape[0]:
            raise DimensionError(f"{raw.shape[0]} rows but {labels.shape[0]} labels")
        if raw.shape[0] < 2:
            raise DimensionError("a batch needs at least two rows")
        unit, norms = normalize_rows(raw)
        return cls(raw, unit, norms, labels)

    def __len__(self):
        return self.raw.shape[0]

    def same_label(self):
        return self.labels[:, None] == self.labels[None, :]


@dataclass
class LossOutput:
    value: float
    grad_raw: np.ndarray
    grad_proxies: np.ndarray | None = None


def pairwise_distances(unit):
    """Euclidean distances between unit rows (exact zeros on the diagonal)."""
    gram = unit @ unit.T
    d2 = np.clip(2.0 - 2.0 * gram, 0.0, None)
    np.fill_diagonal(d2, 0.0)
    return np.sqrt(d2)


def _pair_masks(batch):
    same = batch.same_label()
    upper = np.triu(np.ones_like(same, dtype=bool), k=1)
    return same & upper, ~same & upper


def _grad_from_pair_weights(w, unit):
    """g_i = sum_j W_ij (z_i - z_j) for a symmetric weight matrix W."""
    return w.sum(axis=1)[:, None] * unit - w @ unit


def _safe_inv(d):
    out = np.zeros_like(d)
    nz = d > 0
    out[nz] = 1.0 / d[nz]
    return out


def contrastive_loss(batch, margin=1.0):
    """Mean squared positive distance plus mean squared negative hinge.

    Each term averages over its own unordered pair set; an empty set
    contributes zero.
    """
    if margin <= 0:
        raise ValueError("margin must be positive")
    pos, neg = _pair_masks(batch)
    n_pos, n_neg = int(pos.sum()), int(neg.sum())
    if n_pos == 0 and n_neg == 0:
        raise EmptyPairError("batch has no pairs")
    z = batch.unit
    d = pairwise_distances(z)
    value = 0.0
    w = np.zeros_like(d)
    if n_pos:
        value += float((d[pos] ** 2).sum() / n_pos)
        w += np.where(pos | pos.T, 2.0 / n_pos, 0.0)
    if n_neg:
        hinge = np.maximum(margin - d, 0.0)
        value += float((hinge[neg] ** 2).sum() / n_neg)
        w += np.where(neg | neg.T, -2.0 * hinge * _safe_inv(d) / n_neg, 0.0)
    g = _grad_from_pair_weights(w, z)
    return LossOutput(value, project_out(g, z, batch.norms))


def _triplet_array(triplets):
    t = np.asarray(triplets, dtype=np.int64).reshape(-1, 3)
    if t.shape[0] == 0:
        raise EmptyPairError("no triplets to evaluate")
    return t


def triplet_loss(batch, triplets, margin=0.2):
    """Mean of ``max(0, d(a,p) - d(a,n) + margin)`` over mined triplets."""
    t = _triplet_array(triplets)
    z = batch.unit
    a, p, n = t[:, 0], t[:, 1], t[:, 2]
    diff_ap, diff_an = z[a] - z[p], z[a] - z[n]
    d_ap = np.linalg.norm(diff_ap, axis=1)
    d_an = np.linalg.norm(diff_an, axis=1)
    hinge = d_ap - d_an + margin
    active = hinge > 0
    value = float(np.where(active, hinge, 0.0).mean())

    scale = active / t.shape[0]
    u_ap = diff_ap * (scale * _safe_inv(d_ap))[:, None]
    u_an = diff_an * (scale * _safe_inv(d_an))[:, None]
    g = np.zeros_like(z)
    np.add.at(g, a, u_ap - u_an)
    np.add.at(g, p, -u_ap)
    np.add.at(g, n, u_an)
    return LossOutput(value, project_out(g, z, batch.norms))


def _margin_pairs(batch, triplets):
    if triplets is None:
        pos, neg = _pair_masks(batch)
        i, j = np.nonzero(pos | neg)
        sign = np.where(pos[i, j], 1.0, -1.0)
        return i, j, sign
    t = _triplet_array(triplets)
    i = np.concatenate([t[:, 0], t[:, 0]])
    j = np.concatenate([t[:, 1], t[:, 2]])
    sign = np.concatenate([np.ones(len(t)), -np.ones(len(t))])
    return i, j, sign


def margin_loss(batch, triplets=None, margin=0.2, beta=1.2):
    """Mean of ``max(0, margin + y (d_ij - beta))``, y = +1 positive / -1 negative.

    Pairs are the anchor-positive and anchor-negative pairs of ``triplets``
    when given, otherwise every unordered pair in the batch.
    """
    if beta <= 0:
        raise ValueError("beta must be positive")
    i, j, sign = _margin_pairs(batch, triplets)
    if len(i) == 0:
        raise EmptyPairError("batch has no pairs")
    z = batch.unit
    diff = z[i] - z[j]
    d = np.linalg.norm(diff, axis=1)
    hinge = margin + sign * (d - beta)
    active = hinge > 0
    value = float(np.where(active, hinge, 0.0).mean())
    coef = active * sign * _safe_inv(d) / len(i)
    u = diff * coef[:, None]
    g = np.zeros_like(z)
    np.add.at(g, i, u)
    np.add.at(g, j, -u)
    return LossOutput(value, project_out(g, z, batch.norms))


def _log1p_sum_exp(x, mask):
    """Row-wise ``log(1 + sum_k exp(x_k))`` over masked entries, plus softmax weights."""
    x = np.where(mask, x, -np.inf)
    top = np.maximum(x.max(axis=1, keepdims=True), 0.0)
    e = np.where(mask, np.exp(x - top), 0.0)
    denom = np.exp(-top) + e.sum(axis=1, keepdims=True)
    return (top + np.log(denom))[:, 0], e / denom


def multisimilarity_loss(batch, alpha=2.0, beta=50.0, base=0.5):
    """Multi-similarity loss on cosine similarities, without its mining step."""
    if alpha <= 0 or beta <= 0:
        raise ValueError("alpha and beta must be positive")
    same = batch.same_label()
    eye = np.eye(len(batch), dtype=bool)
    pos, neg = same & ~eye, ~same
    if not pos.any() and not neg.any():
        raise EmptyPairError("batch has no pairs")
    z = batch.unit
    s = z @ z.T
    m = len(batch)
    lp, wp = _log1p_sum_exp(-alpha * (s - base), pos)
    ln, wn = _log1p_sum_exp(beta * (s - base), neg)
    value = float((lp / alpha + ln / beta).mean())
    # dL/ds_ij for row i
    gs = (wn - wp) / m
    g = (gs + gs.T) @ z
    return LossOutput(value, project_out(g, z, batch.norms))


class ProxyBank:
    """One learnable unit vector per training class."""

    def __init__(self, classes, vectors):
        self.classes = np.asarray(classes)
        self.vectors = np.array(vectors, dtype=np.float64)
        if self.vectors.shape[0] != self.classes.shape[0]:
            raise DimensionError("one proxy per class required")
        self._index = {int(c): k for k, c in enumerate(self.classes)}
        self.renormalize()

    @classmethod
    def init(cls, classes, dim, rng):
        classes = np.unique(np.asarray(classes))
        return cls(classes, rng.normal(size=(len(classes), dim)))

    def index(self, labels):
        try:
            return np.array([self._index[int(c)] for c in labels], dtype=np.int64)
        except KeyError as exc:
            raise UnknownClassError(f"no proxy for class {exc.args[0]}") from None

    def renormalize(self):
        self.vectors /= np.linalg.norm(self.vectors, axis=1, keepdims=True)


def proxynca_loss(batch, proxies):
    """``-log softmax_y(-||z - p_c||^2)`` over all proxies, averaged over the batch.

    Proxies enter as given (the bank keeps them unit length between updates),
    so ``grad_proxies`` is the plain gradient w.r.t. the stored vectors.
    """
    target = proxies.index(batch.labels)
    z, p = batch.unit, proxies.vectors
    if p.shape[1] != z.shape[1]:
        raise DimensionError(f"proxy dim {p.shape[1]} != embedding dim {z.shape[1]}")
    diff = z[:, None, :] - p[None, :, :]
    logits = -np.einsum("bcd,bcd->bc", diff, diff)
    logits -= logits.max(axis=1, keepdims=True)
    log_q = logits - np.log(np.exp(logits).sum(axis=1, keepdims=True))
    m = len(batch)
    rows = np.arange(m)
    value = float(-log_q[rows, target].mean())

    coef = np.exp(log_q)
    coef[rows, target] -= 1.0
    coef /= m
    # d logit_bc / d z_b = -2 (z_b - p_c); d logit_bc / d p_c = +2 (z_b - p_c)
    g_z = -2.0 * np.einsum("bc,bcd->bd", coef, diff)
    g_p = 2.0 * np.einsum("bc,bcd->cd", coef, diff)
    return LossOutput(value, project_out(g_z, z, batch.norms), g_p)
