"""Listwise self-distillation regularizer.

For a batch of unit embeddings the student and the teacher each turn their
pairwise similarities into one temperature softmax per anchor (diagonal
included). The regularizer is the batch-averaged cross-entropy of the
student rows against the teacher rows, scaled by the linear epoch weight
``t / T``:

    R = -(t/T) / |B|^2 * sum_ij S_ij log P_ij

and enters the training objective as ``L_dml + tau^2 * lambda * R``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, ScheduleError
from .losses import EmbeddingBatch, LossOutput
from .numerics import _check_tau, log_softmax_rows, normalize_rows, project_out, softmax_rows

METRICS = ("dot", "euclidean")


@dataclass(frozen=True)
class LsdConfig:
    tau: float = 1.0
    lam: float = 30000.0
    total_epochs: int = 50
    metric: str = "dot"

    def __post_init__(self):
        _check_tau(self.tau)
        if self.lam < 0:
            raise ValueError("lambda must be nonnegative")
        if self.total_epochs < 1:
            raise ValueError("total_epochs must be >= 1")
        if self.metric not in METRICS:
            raise ValueError(f"metric must be one of {METRICS}")

    @property
    def weight(self):
        """Multiplier of R in the combined objective, ``tau^2 * lambda``."""
        return self.tau**2 * self.lam


def similarity_matrix(unit, metric="dot"):
    """Pairwise similarities of unit rows.

    ``dot``: z_i . z_j. ``euclidean``: 1 - ||z_i - z_j||^2 / 2. The two agree
    on unit vectors up to rounding.
    """
    unit = np.asarray(unit, dtype=np.float64)
    if metric == "dot":
        s = unit @ unit.T
    elif metric == "euclidean":
        diff = unit[:, None, :] - unit[None, :, :]
        s = 1.0 - 0.5 * np.einsum("ijk,ijk->ij", diff, diff)
    else:
        raise ValueError(f"unknown metric {metric!r}")
    return s


def listwise_distribution(s, tau=1.0):
    """Row-wise temperature softmax over the whole batch, self included."""
    return softmax_rows(s, tau)


def alpha_schedule(t, total):
    if total < 1 or not 1 <= t <= total:
        raise ScheduleError(f"epoch {t} outside [1, {total}]")
    return t / total


def lsd_value(student, teacher, t, total):
    """Scaled listwise cross-entropy of student rows against teacher rows.

    ``t = 0`` is accepted and gives 0.
    """
    student = np.asarray(student)
    teacher = np.asarray(teacher)
    if student.shape != teacher.shape or student.ndim != 2:
        raise DimensionError(f"shape mismatch {student.shape} vs {teacher.shape}")
    if not 0 <= t <= total:
        raise ScheduleError(f"epoch {t} outside [0, {total}]")
    b = student.shape[0]
    return float(-(t / total) / b**2 * np.sum(teacher * np.log(student)))


def lsd_objective(batch, targets, tau, t, total, metric="dot"):
    """Value and raw-embedding gradient of R for fixed target rows.

    ``targets`` are the teacher's listwise rows (or any row-stochastic
    matrix, e.g. hard label targets); they are constants.

    Every z_i appears in its own row (through s_ij) and in every other row
    (through s_ki), so

        dR/dz_i = a / (tau |B|^2) * sum_j [(P - S)_ij + (P - S)_ji] z_j,

    with a = t/T, followed by the normalization Jacobian.
    """
    _check_tau(tau)
    targets = np.asarray(targets, dtype=np.float64)
    b = len(batch)
    if targets.shape != (b, b):
        raise DimensionError(f"targets {targets.shape} do not match batch of {b}")
    s = similarity_matrix(batch.unit, metric)
    log_p = log_softmax_rows(s, tau)
    a = t / total
    value = float(-a / b**2 * np.sum(targets * log_p))
    g = np.exp(log_p) - targets
    gz = (a / (tau * b**2)) * ((g + g.T) @ batch.unit)
    return value, project_out(gz, batch.unit, batch.norms)


def teacher_targets(teacher_embeddings, tau, metric="dot"):
    """Listwise rows S from teacher embeddings of the same batch."""
    unit, _ = normalize_rows(teacher_embeddings)
    return listwise_distribution(similarity_matrix(unit, metric), tau)


def lsd_gradient(batch, teacher_batch, cfg, t, total=None):
    """dR/dv for the student batch; teacher embeddings are treated as constants."""
    total = cfg.total_epochs if total is None else total
    targets = teacher_targets(teacher_batch.raw, cfg.tau, cfg.metric)
    return lsd_objective(batch, targets, cfg.tau, t, total, cfg.metric)[1]


def anchor_pair_contributions(unit, norms, student, teacher, i, tau, t, total):
    """Per-partner terms of the anchor-row gradient for anchor ``i``.

    Row j holds (t / (tau T |B|^2 ||v_i||)) (z_j - (z_i . z_j) z_i)(P_ij - S_ij).
    Summed over j these give the part of dR/dv_i that flows through anchor
    i's own list; the self term is identically zero. The norm of row j is
    sqrt(1 - (z_i . z_j)^2) |P_ij - S_ij| times the prefactor, so partners
    that are already close to the anchor contribute little.
    """
    b = unit.shape[0]
    zi = unit[i]
    cos = unit @ zi
    tangent = unit - cos[:, None] * zi[None, :]
    coef = (t / (tau * total * b**2 * norms[i])) * (student[i] - teacher[i])
    return tangent * coef[:, None]


def combined_loss(dml, value, grad, cfg):
    """``L_dml + tau^2 lambda R`` and the matching gradient."""
    grad = np.asarray(grad)
    if grad.shape != dml.grad_raw.shape:
        raise DimensionError(f"gradient shapes differ: {grad.shape} vs {dml.grad_raw.shape}")
    if cfg.lam == 0:
        return dml
    w = cfg.weight
    return LossOutput(dml.value + w * value, dml.grad_raw + w * grad, dml.grad_proxies)


def hard_targets(labels):
    """Label-indicator rows normalized over each anchor's positives, self included."""
    labels = np.asarray(labels)
    same = (labels[:, None] == labels[None, :]).astype(np.float64)
    return same / same.sum(axis=1, keepdims=True)


def hard_target_objective(batch, cfg, t, total=None):
    """Ablation: the regularizer with label-indicator rows in place of teacher rows."""
    total = cfg.total_epochs if total is None else total
    return lsd_objective(batch, hard_targets(batch.labels), cfg.tau, t, total, cfg.metric)


def hard_target_variant(batch, cfg, t, total=None):
    return hard_target_objective(batch, cfg, t, total)[0]


def lsd_for_batch(student_raw, teacher_raw, labels, cfg, t, total=None):
    """Convenience wrapper: value and gradient of R from raw student/teacher rows."""
    total = cfg.total_epochs if total is None else total
    batch = EmbeddingBatch.from_raw(student_raw, labels)
    targets = teacher_targets(teacher_raw, cfg.tau, cfg.metric)
    return lsd_objective(batch, targets, cfg.tau, t, total, cfg.metric)
