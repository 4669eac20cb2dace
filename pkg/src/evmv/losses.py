"""Evidential training objective.

Per sample the loss is an expected cross-entropy under the predicted
Dirichlet (pulls evidence toward the labeled class) plus an annealed KL
term to the uniform Dirichlet evaluated at a modified concentration that
exempts the labeled class (pushes unwarranted evidence down). The overall
objective sums the fused-opinion loss and every per-view loss.

Batched helpers operate on (N, K) arrays and return per-sample values and
analytic gradients with respect to alpha; the scalar operations wrap them.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels as kernels
from .errors import DimensionError, DomainError


def _one_hot_matrix(y, num_classes):
    y = np.asarray(y, dtype=np.float64)
    if y.ndim == 1:
        y = y[None, :]
    if y.shape[1] != num_classes:
        raise DimensionError(f"label width {y.shape[1]} != K={num_classes}")
    return y


@dataclass(frozen=True)
class LabelVector:
    """One-hot ground-truth label."""

    one_hot: np.ndarray

    def __post_init__(self):
        y = np.array(self.one_hot, dtype=np.float64).reshape(-1)
        object.__setattr__(self, "one_hot", y)
        if not np.all((y == 0.0) | (y == 1.0)) or y.sum() != 1.0:
            raise ValueError("label must be one-hot: exactly one 1, rest 0")

    @classmethod
    def from_index(cls, k, num_classes):
        y = np.zeros(num_classes)
        y[k] = 1.0
        return cls(y)

    @property
    def index(self):
        return int(np.argmax(self.one_hot))


@dataclass(frozen=True)
class LossValue:
    total: float
    ace: float
    kl: float
    lam: float
    grad_alpha: np.ndarray


@dataclass(frozen=True)
class OverallLoss:
    """Fused loss plus one loss per view; gradients kept separate."""

    total: float
    fused: LossValue
    views: tuple


def ace_loss_batch(alpha, y):
    """Expected cross-entropy under Dirichlet(alpha): sum_k y_k (psi(S) - psi(alpha_k)).

    Returns per-sample values (N,) and gradients wrt alpha (N, K);
    grad_k = psi'(S) - y_k psi'(alpha_k).
    """
    s = alpha.sum(axis=1, keepdims=True)
    value = (y * (kernels.digamma(s) - kernels.digamma(alpha))).sum(axis=1)
    grad = kernels.trigamma(s) - y * kernels.trigamma(alpha)
    return value, grad


def tilde_alpha_batch(alpha, y):
    """Pin the labeled class's concentration at 1, keep the rest."""
    return y + (1.0 - y) * alpha


def kl_to_uniform_batch(alpha_tilde):
    """KL(Dir(alpha_tilde) || Dir(1)) with gradient wrt alpha_tilde.

    grad_k = (a_k - 1) psi'(a_k) - (T - K) psi'(T), T = sum(alpha_tilde).
    """
    n, k = alpha_tilde.shape
    t = alpha_tilde.sum(axis=1, keepdims=True)
    dg_t = kernels.digamma(t)
    value = (
        kernels.lgamma(t[:, 0])
        - math.lgamma(k)
        - kernels.lgamma(alpha_tilde).sum(axis=1)
        + ((alpha_tilde - 1.0) * (kernels.digamma(alpha_tilde) - dg_t)).sum(axis=1)
    )
    grad = (alpha_tilde - 1.0) * kernels.trigamma(alpha_tilde) - (t - k) * kernels.trigamma(t)
    return value, grad


def sample_loss_batch(alpha, y, lam):
    """Per-sample total = ace + lam * KL(tilde_alpha); gradient wrt alpha.

    The KL gradient is masked at the labeled class, where tilde_alpha holds
    the concentration fixed at 1.
    """
    ace, g_ace = ace_loss_batch(alpha, y)
    at = tilde_alpha_batch(alpha, y)
    kl, g_kl = kl_to_uniform_batch(at)
    total = ace + lam * kl
    grad = g_ace + lam * (1.0 - y) * g_kl
    return total, ace, kl, grad


def ace_loss(d, y):
    """Scalar adjusted cross-entropy; returns (value, grad wrt alpha)."""
    yv = _one_hot_matrix(y.one_hot, d.num_classes)
    value, grad = ace_loss_batch(d.alpha[None, :], yv)
    return float(value[0]), grad[0]


def tilde_alpha(d, y):
    yv = _one_hot_matrix(y.one_hot, d.num_classes)
    return tilde_alpha_batch(d.alpha[None, :], yv)[0]


def kl_to_uniform(alpha_tilde):
    """Scalar KL to the uniform Dirichlet; requires all components >= 1."""
    at = np.asarray(alpha_tilde, dtype=np.float64).reshape(-1)
    if at.size < 2:
        raise DimensionError(f"need K >= 2 components, got {at.size}")
    if not np.all(np.isfinite(at)) or np.any(at < 1.0):
        raise DomainError("kl_to_uniform requires finite components >= 1")
    value, grad = kl_to_uniform_batch(at[None, :])
    return float(value[0]), grad[0]


def anneal_coefficient(epoch, anneal_epochs):
    """Linear ramp min(1, epoch / anneal_epochs) for the KL weight."""
    if anneal_epochs < 1:
        raise ValueError(f"anneal_epochs must be >= 1, got {anneal_epochs}")
    if epoch < 0:
        raise ValueError(f"epoch must be >= 0, got {epoch}")
    return min(1.0, epoch / anneal_epochs)


def sample_loss(d, y, lam):
    if not 0.0 <= lam <= 1.0:
        raise ValueError(f"lambda must lie in [0, 1], got {lam}")
    yv = _one_hot_matrix(y.one_hot, d.num_classes)
    total, ace, kl, grad = sample_loss_batch(d.alpha[None, :], yv, lam)
    return LossValue(float(total[0]), float(ace[0]), float(kl[0]), lam, grad[0])


def overall_loss(fused, per_view, y, lam):
    """Fused-opinion loss plus the sum of per-view losses, same lambda."""
    fused_loss = sample_loss(fused, y, lam)
    view_losses = []
    for d in per_view:
        if d.num_classes != fused.num_classes:
            raise DimensionError(
                f"view has K={d.num_classes}, fused has K={fused.num_classes}"
            )
        view_losses.append(sample_loss(d, y, lam))
    total = fused_loss.total + sum(v.total for v in view_losses)
    return OverallLoss(total, fused_loss, tuple(view_losses))
