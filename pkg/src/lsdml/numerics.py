"""Dense numeric primitives shared by every other module.

Vectors and matrices are plain float64 ``numpy`` arrays; nothing here keeps
state except :class:`Rng`.
"""

from __future__ import annotations

import zlib

import numpy as np

from .errors import DegenerateVectorError, InvalidTemperatureError

NORM_EPS = 1e-12


def normalize(v):
    """Scale ``v`` to unit Euclidean norm.

    Raises DegenerateVectorError when ``||v|| <= 1e-12``.
    """
    v = np.asarray(v, dtype=np.float64)
    n = np.linalg.norm(v)
    if not n > NORM_EPS:
        raise DegenerateVectorError(f"cannot normalize vector with norm {n:.3e}")
    return v / n


def normalize_rows(m):
    """Row-wise :func:`normalize`. Returns ``(unit_rows, norms)``."""
    m = np.asarray(m, dtype=np.float64)
    norms = np.sqrt(np.einsum("ij,ij->i", m, m))
    if m.shape[0] and not np.all(norms > NORM_EPS):
        bad = int(np.argmin(norms))
        raise DegenerateVectorError(f"row {bad} has norm {norms[bad]:.3e}")
    return m / norms[:, None], norms


def project_out(grad_unit, unit, norms):
    """Chain a gradient w.r.t. unit rows back to the raw rows they came from.

    d z / d v = (I - z z^T) / ||v||, applied row by row.
    """
    radial = np.einsum("ij,ij->i", grad_unit, unit)
    return (grad_unit - radial[:, None] * unit) / norms[:, None]


def _check_tau(tau):
    if not (np.isfinite(tau) and tau > 0):
        raise InvalidTemperatureError(f"temperature must be > 0, got {tau}")


def softmax_row(scores, tau=1.0):
    """Temperature softmax of a 1-d score vector, max-shifted for stability."""
    _check_tau(tau)
    x = np.asarray(scores, dtype=np.float64) / tau
    x = x - x.max()
    e = np.exp(x)
    return e / e.sum()


def softmax_rows(scores, tau=1.0):
    _check_tau(tau)
    x = np.asarray(scores, dtype=np.float64) / tau
    x = x - x.max(axis=1, keepdims=True)
    e = np.exp(x)
    return e / e.sum(axis=1, keepdims=True)


def log_softmax_rows(scores, tau=1.0):
    _check_tau(tau)
    x = np.asarray(scores, dtype=np.float64) / tau
    x = x - x.max(axis=1, keepdims=True)
    return x - np.log(np.exp(x).sum(axis=1, keepdims=True))


# ---------------------------------------------------------------------------
# SVD: one-sided (Hestenes) Jacobi with round-robin parallel ordering.


def _round_robin(n):
    """Pairings for one sweep: ``n - 1`` rounds of ``n // 2`` disjoint pairs.

    ``n`` must be even. Circle method: index 0 is fixed, the rest rotate.
    """
    idx = list(range(n))
    rounds = []
    for _ in range(n - 1):
        half = n // 2
        p = np.array(idx[:half])
        q = np.array(idx[half:][::-1])
        rounds.append((p, q))
        idx = [idx[0]] + [idx[-1]] + idx[1:-1]
    return rounds


def jacobi_svd(m, tol=1e-10, max_sweeps=100):
    """Thin SVD ``m = U diag(s) V^T`` by one-sided Jacobi rotations.

    Returns ``(U, s, Vt)`` with ``s`` descending and ``len(s) == min(m.shape)``.
    Columns of ``U`` belonging to zero singular values are zero, not
    completed to an orthonormal basis.
    """
    a = np.array(m, dtype=np.float64, copy=True)
    if a.ndim != 2 or a.size == 0:
        raise ValueError("jacobi_svd needs a nonempty 2-d matrix")
    transposed = a.shape[0] < a.shape[1]
    if transposed:
        a = a.T.copy()
    rows, cols = a.shape
    n = cols + (cols % 2)
    work = np.zeros((rows, n))
    work[:, :cols] = a
    v = np.eye(n)
    rounds = _round_robin(n) if n > 1 else []

    for _ in range(max_sweeps):
        rotated = False
        for p, q in rounds:
            up, uq = work[:, p], work[:, q]
            alpha = np.einsum("ij,ij->j", up, up)
            beta = np.einsum("ij,ij->j", uq, uq)
            gamma = np.einsum("ij,ij->j", up, uq)
            active = np.abs(gamma) > tol * np.sqrt(alpha * beta)
            if not active.any():
                continue
            rotated = True
            p, q = p[active], q[active]
            alpha, beta, gamma = alpha[active], beta[active], gamma[active]
            zeta = (beta - alpha) / (2.0 * gamma)
            t = np.where(zeta >= 0, 1.0, -1.0) / (np.abs(zeta) + np.sqrt(1.0 + zeta * zeta))
            c = 1.0 / np.sqrt(1.0 + t * t)
            s = c * t
            up, uq = work[:, p], work[:, q]
            work[:, p] = c * up - s * uq
            work[:, q] = s * up + c * uq
            vp, vq = v[:, p], v[:, q]
            v[:, p] = c * vp - s * vq
            v[:, q] = s * vp + c * vq
        if not rotated:
            break

    work, v = work[:, :cols], v[:cols, :cols]
    sv = np.sqrt(np.einsum("ij,ij->j", work, work))
    order = np.argsort(-sv, kind="stable")
    sv, work, v = sv[order], work[:, order], v[:, order]
    u = np.zeros_like(work)
    nz = sv > 0
    u[:, nz] = work[:, nz] / sv[nz]
    if transposed:
        return v, sv, u.T
    return u, sv, v.T


def svd_singular_values(m):
    """Singular values of ``m`` in descending order.

    Tall inputs are first reduced to their square ``R`` factor (same singular
    values) so the Jacobi sweeps run on a ``cols x cols`` matrix.
    """
    m = np.asarray(m, dtype=np.float64)
    if m.ndim == 2 and m.shape[0] > 2 * m.shape[1]:
        m = np.linalg.qr(m, mode="r")
    elif m.ndim == 2 and m.shape[1] > 2 * m.shape[0]:
        m = np.linalg.qr(m.T, mode="r")
    return jacobi_svd(m)[1]


# ---------------------------------------------------------------------------


class Rng:
    """Seeded generator over numpy's counter-based Philox bit generator.

    ``split(name)`` derives an independent child stream from the parent seed
    and a label, so data / init / batch / miner streams can vary separately.
    """

    def __init__(self, seed, _path=()):
        self.seed = int(seed) & (2**64 - 1)
        self._path = tuple(_path)
        ss = np.random.SeedSequence(entropy=self.seed, spawn_key=self._path)
        self.gen = np.random.Generator(np.random.Philox(ss))

    def split(self, name):
        key = zlib.crc32(str(name).encode("utf-8"))
        return Rng(self.seed, self._path + (key,))

    def uniform(self, low=0.0, high=1.0, size=None):
        return self.gen.uniform(low, high, size)

    def normal(self, loc=0.0, scale=1.0, size=None):
        return self.gen.normal(loc, scale, size)

    def integers(self, low, high=None, size=None):
        return self.gen.integers(low, high, size)

    def choice(self, a, size=None, replace=True, p=None):
        return self.gen.choice(a, size=size, replace=replace, p=p)

    def permutation(self, x):
        return self.gen.permutation(x)

    def __repr__(self):
        return f"Rng(seed={self.seed}, path={self._path})"
