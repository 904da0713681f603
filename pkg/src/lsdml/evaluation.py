"""Retrieval metrics and embedding-space diagnostics.

Retrieval is leave-one-out: every sample is a query against all other
samples, ranked by cosine similarity with ties broken by ascending index.
Similarities are rounded to 12 decimals before ranking so that mathematically
tied candidates stay tied regardless of floating-point summation order.
"""

from __future__ import annotations

import warnings
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import SpecError
from .numerics import normalize_rows, svd_singular_values

TIE_DECIMALS = 12


@dataclass
class RetrievalReport:
    recall_at: dict = field(default_factory=dict)
    map_score: float = float("nan")


@dataclass
class DensityReport:
    pi_intra: float
    pi_inter: float
    pi_ratio: float
    class_means: np.ndarray = field(repr=False, default=None)

    def to_dict(self):
        d = asdict(self)
        d.pop("class_means")
        return d


@dataclass
class SpectralReport:
    distribution: np.ndarray = field(repr=False)
    score: float


def loo_ranking(embeddings):
    """For each query, the indices of all other samples from most to least similar."""
    z, _ = normalize_rows(embeddings)
    n = z.shape[0]
    if n < 2:
        raise SpecError("retrieval needs at least two samples")
    sim = np.round(z @ z.T, TIE_DECIMALS)
    np.fill_diagonal(sim, -np.inf)
    order = np.argsort(-sim, axis=1, kind="stable")
    return order[:, : n - 1]


def recall_at_k(embeddings, labels, k, ranking=None):
    """Fraction of queries with a same-label item among their ``k`` nearest neighbours."""
    if k < 1:
        raise ValueError("k must be >= 1")
    labels = np.asarray(labels)
    order = loo_ranking(embeddings) if ranking is None else ranking
    if k > order.shape[1]:
        warnings.warn(f"k={k} exceeds gallery size {order.shape[1]}; clamping", stacklevel=2)
        k = order.shape[1]
    hits = labels[order[:, :k]] == labels[:, None]
    return float(hits.any(axis=1).mean())


def average_precisions(embeddings, labels, ranking=None):
    """Per-query AP over the full ranking; NaN for queries without positives."""
    labels = np.asarray(labels)
    order = loo_ranking(embeddings) if ranking is None else ranking
    rel = labels[order] == labels[:, None]
    ranks = np.arange(1, order.shape[1] + 1)
    prec = np.cumsum(rel, axis=1) / ranks
    n_rel = rel.sum(axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(n_rel > 0, (prec * rel).sum(axis=1) / n_rel, np.nan)


def mean_average_precision(embeddings, labels, ranking=None):
    """Mean AP over queries that have at least one positive in the gallery."""
    ap = average_precisions(embeddings, labels, ranking)
    if np.all(np.isnan(ap)):
        raise SpecError("no query has a positive in the gallery")
    return float(np.nanmean(ap))


def retrieval_report(embeddings, labels, ks=(1, 2, 4, 8)):
    order = loo_ranking(embeddings)
    recall = {k: recall_at_k(embeddings, labels, k, order) for k in ks if k <= order.shape[1]}
    return RetrievalReport(recall, mean_average_precision(embeddings, labels, order))


def embedding_density(embeddings, labels):
    """Intra/inter-class distance averages on unit-normalized embeddings.

    ``pi_inter`` averages the distance between class means over unordered
    class pairs; ``pi_intra`` averages the distance over all unordered
    same-class sample pairs. Class means are not re-normalized.
    """
    z, _ = normalize_rows(embeddings)
    labels = np.asarray(labels)
    classes = np.unique(labels)
    if len(classes) < 2:
        raise SpecError("inter-class distance undefined for a single class")
    means = np.stack([z[labels == c].mean(axis=0) for c in classes])
    dm = np.linalg.norm(means[:, None, :] - means[None, :, :], axis=-1)
    iu = np.triu_indices(len(classes), k=1)
    pi_inter = float(dm[iu].mean())

    total, pairs = 0.0, 0
    for c in classes:
        zc = z[labels == c]
        m = len(zc)
        if m < 2:
            continue
        d = np.linalg.norm(zc[:, None, :] - zc[None, :, :], axis=-1)
        total += d[np.triu_indices(m, k=1)].sum()
        pairs += m * (m - 1) // 2
    if pairs == 0:
        raise SpecError("no class has two or more samples")
    pi_intra = float(total / pairs)
    ratio = pi_intra / pi_inter if pi_inter > 0 else float("inf")
    return DensityReport(pi_intra, pi_inter, ratio, means)


def spectral_decay(embeddings):
    """KL divergence of the normalized singular-value spectrum from uniform.

    Rows are unit-normalized first. 0 means a perfectly flat spectrum;
    ``log(min(n, d))`` is reached by rank-one data.
    """
    z, _ = normalize_rows(embeddings)
    if z.shape[0] < 2:
        raise SpecError("spectral decay needs at least two samples")
    s = svd_singular_values(z)
    p = s / s.sum()
    k = len(p)
    nz = p > 0
    score = float(np.sum(p[nz] * np.log(p[nz] * k)))
    return SpectralReport(p, max(score, 0.0))
