import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lsdml.errors import EmptyPairError, UnknownClassError
from lsdml.losses import (
    EmbeddingBatch,
    ProxyBank,
    contrastive_loss,
    margin_loss,
    multisimilarity_loss,
    proxynca_loss,
    triplet_loss,
)
from lsdml.numerics import Rng
from lsdml.samplers import mine_random

from conftest import central_diff, rel_err

LABELS = np.array([0, 0, 1, 1, 2, 2, 0, 1])


def on_circle(*angles):
    return np.array([[math.cos(a), math.sin(a)] for a in angles])


def random_batch(seed, n=8, dim=5, labels=LABELS):
    return Rng(seed).normal(size=(n, dim)), labels[:n]


def check_grad(loss_fn, raw, labels):
    out = loss_fn(EmbeddingBatch.from_raw(raw, labels))
    num = central_diff(lambda v: loss_fn(EmbeddingBatch.from_raw(v, labels)).value, raw, 1e-5)
    assert rel_err(out.grad_raw, num) < 1e-4


# -- contrastive -------------------------------------------------------------


def test_contrastive_zero_when_satisfied():
    raw = np.array([[1.0, 0.0], [2.0, 0.0], [-1.0, 0.0], [-3.0, 0.0]])
    out = contrastive_loss(EmbeddingBatch.from_raw(raw, [0, 0, 1, 1]), margin=1.0)
    assert out.value == 0.0
    assert np.all(out.grad_raw == 0)


def test_contrastive_single_positive_pair():
    # chord of length 0.5 on the unit circle
    theta = 2 * math.asin(0.25)
    b = EmbeddingBatch.from_raw(on_circle(0.0, theta), [0, 0])
    assert contrastive_loss(b).value == pytest.approx(0.25)


def test_contrastive_empty():
    # a single row has no pairs; from_raw refuses it, so build the batch directly
    lone = EmbeddingBatch(np.ones((1, 2)), np.array([[1.0, 0.0]]), np.ones(1), np.array([0]))
    with pytest.raises(EmptyPairError):
        contrastive_loss(lone)


@pytest.mark.parametrize("seed", range(20))
def test_contrastive_gradient(seed):
    raw, y = random_batch(seed)
    check_grad(lambda b: contrastive_loss(b, 1.2), raw, y)


# -- triplet -----------------------------------------------------------------


def test_triplet_hinge_examples():
    # place a, p, n on the unit circle at the requested chord lengths
    def angle(d):
        return 2 * math.asin(d / 2)

    b = EmbeddingBatch.from_raw(on_circle(0.0, angle(0.2), -angle(0.9)), [0, 0, 1])
    assert triplet_loss(b, [(0, 1, 2)], 0.2).value == pytest.approx(0.0)
    b = EmbeddingBatch.from_raw(on_circle(0.0, angle(0.8), -angle(0.5)), [0, 0, 1])
    assert triplet_loss(b, [(0, 1, 2)], 0.2).value == pytest.approx(0.5)


def test_triplet_empty():
    raw, y = random_batch(0)
    with pytest.raises(EmptyPairError):
        triplet_loss(EmbeddingBatch.from_raw(raw, y), np.zeros((0, 3), dtype=int))


@pytest.mark.parametrize("seed", range(20))
def test_triplet_gradient(seed):
    raw, y = random_batch(seed)
    trip = mine_random(EmbeddingBatch.from_raw(raw, y).unit, y, Rng(seed))
    check_grad(lambda b: triplet_loss(b, trip, 0.5), raw, y)


# -- margin ------------------------------------------------------------------


def test_margin_zero_when_satisfied():
    # positives about 0.2 apart, negatives about 2 apart
    raw = np.array([[1.0, 0.1], [1.0, -0.1], [-1.0, 0.1], [-1.0, -0.1]])
    assert margin_loss(EmbeddingBatch.from_raw(raw, [0, 0, 1, 1]), None, 0.2, 1.2).value == 0.0


def test_margin_single_pair_at_beta():
    theta = 2 * math.asin(1.2 / 2)
    b = EmbeddingBatch.from_raw(on_circle(0.0, theta), [0, 0])
    assert margin_loss(b, None, 0.2, 1.2).value == pytest.approx(0.2)


@pytest.mark.parametrize("seed", range(20))
def test_margin_gradient(seed):
    raw, y = random_batch(seed)
    check_grad(lambda b: margin_loss(b, None, 0.3, 1.0), raw, y)
    trip = mine_random(EmbeddingBatch.from_raw(raw, y).unit, y, Rng(seed))
    check_grad(lambda b: margin_loss(b, trip, 0.3, 1.0), raw, y)


# -- multi-similarity --------------------------------------------------------


def equal_similarity_batch(n, s=0.5):
    """n unit vectors with every pairwise cosine equal to s."""
    z = np.zeros((n, n + 1))
    z[:, 0] = math.sqrt(s)
    z[np.arange(n), np.arange(1, n + 1)] = math.sqrt(1 - s)
    return z


def test_multisimilarity_all_at_base():
    b = EmbeddingBatch.from_raw(equal_similarity_batch(4), [0, 0, 1, 1])
    # one positive and two negatives per anchor: ln(2)/alpha + ln(3)/beta
    assert multisimilarity_loss(b, 2.0, 50.0, 0.5).value == pytest.approx(0.36854583605333485, abs=1e-12)


def test_multisimilarity_lone_anchor_has_no_positive_term():
    b = EmbeddingBatch.from_raw(equal_similarity_batch(3), [0, 0, 1])
    value = multisimilarity_loss(b, 2.0, 50.0, 0.5).value
    expect = (2 * (math.log(2) / 2 + math.log(2) / 50) + math.log(3) / 50) / 3
    assert value == pytest.approx(expect, abs=1e-12)


@pytest.mark.parametrize("seed", range(20))
def test_multisimilarity_gradient(seed):
    raw, y = random_batch(seed)
    check_grad(lambda b: multisimilarity_loss(b, 2.0, 10.0, 0.5), raw, y)


# -- proxy NCA ---------------------------------------------------------------


def test_proxynca_equidistant_is_ln2():
    bank = ProxyBank([0, 1], [[1.0, 0.0], [-1.0, 0.0]])
    b = EmbeddingBatch.from_raw(np.array([[0.0, 1.0], [0.0, -1.0]]), [0, 1])
    assert proxynca_loss(b, bank).value == pytest.approx(math.log(2))


def test_proxynca_decreases_with_separation():
    values = []
    for half in (0.6, 1.0, 1.5):
        bank = ProxyBank([0, 1], on_circle(0.0, 2 * half))
        b = EmbeddingBatch.from_raw(on_circle(0.0, 2 * half), [0, 1])
        values.append(proxynca_loss(b, bank).value)
    assert values[0] > values[1] > values[2]
    assert values[2] < 0.1


def test_proxynca_unknown_class():
    bank = ProxyBank([0, 1], np.eye(2))
    with pytest.raises(UnknownClassError):
        proxynca_loss(EmbeddingBatch.from_raw(np.eye(2), [0, 5]), bank)


@pytest.mark.parametrize("seed", range(20))
def test_proxynca_gradients(seed):
    raw, y = random_batch(seed)
    bank = ProxyBank.init([0, 1, 2, 3], raw.shape[1], Rng(seed + 100))
    check_grad(lambda b: proxynca_loss(b, bank), raw, y)
    batch = EmbeddingBatch.from_raw(raw, y)
    g = proxynca_loss(batch, bank).grad_proxies

    def f(p):
        other = ProxyBank.__new__(ProxyBank)
        other.classes, other.vectors, other._index = bank.classes, p, bank._index
        return proxynca_loss(batch, other).value

    assert rel_err(g, central_diff(f, bank.vectors, 1e-5)) < 1e-4


# -- shared properties -------------------------------------------------------

ALL_LOSSES = {
    "contrastive": lambda b: contrastive_loss(b),
    "margin": lambda b: margin_loss(b),
    "multisimilarity": lambda b: multisimilarity_loss(b),
    "triplet": lambda b: triplet_loss(b, [(i, j, k) for i, j, k in [(0, 1, 2), (2, 3, 0), (4, 5, 1)]]),
}


@given(st.integers(0, 2**32 - 1), st.sampled_from(sorted(ALL_LOSSES)))
def test_values_finite_nonnegative(seed, name):
    raw, y = random_batch(seed)
    out = ALL_LOSSES[name](EmbeddingBatch.from_raw(raw, y))
    assert np.isfinite(out.value) and out.value >= 0
    assert np.all(np.isfinite(out.grad_raw))


@given(st.integers(0, 2**32 - 1))
def test_permutation_equivariance(seed):
    raw, y = random_batch(seed)
    perm = Rng(seed).permutation(len(y))
    inv = np.argsort(perm)
    for name in ("contrastive", "margin", "multisimilarity"):
        a = ALL_LOSSES[name](EmbeddingBatch.from_raw(raw, y))
        b = ALL_LOSSES[name](EmbeddingBatch.from_raw(raw[perm], y[perm]))
        assert b.value == pytest.approx(a.value, abs=1e-12)
        np.testing.assert_allclose(b.grad_raw, a.grad_raw[perm], atol=1e-12)
    trip = np.array([(0, 1, 2), (2, 3, 0), (4, 5, 1)])
    a = triplet_loss(EmbeddingBatch.from_raw(raw, y), trip)
    b = triplet_loss(EmbeddingBatch.from_raw(raw[perm], y[perm]), inv[trip])
    np.testing.assert_allclose(b.grad_raw, a.grad_raw[perm], atol=1e-12)


@given(st.integers(0, 2**32 - 1))
def test_rotation_invariance(seed):
    raw, y = random_batch(seed)
    q, _ = np.linalg.qr(Rng(seed).normal(size=(raw.shape[1],) * 2))
    trip = [(0, 1, 2), (2, 3, 0), (4, 5, 1)]
    for fn in (contrastive_loss, lambda b: triplet_loss(b, trip)):
        a = fn(EmbeddingBatch.from_raw(raw, y)).value
        b = fn(EmbeddingBatch.from_raw(raw @ q.T, y)).value
        assert b == pytest.approx(a, abs=1e-9)
