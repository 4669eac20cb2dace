"""Subjective Logic opinions over the singleton+Omega frame.

An opinion assigns a belief mass to each of the K classes plus one
uncertainty mass to the whole frame, summing to one. Evidence maps to
opinions through a Dirichlet parameterization (alpha = evidence + 1),
and independent opinions combine with Dempster's rule restricted to
this frame, which is closed under the combination.
"""

from dataclasses import dataclass, field

import numpy as np

from . import _kernels as kernels
from .errors import (
    DimensionError,
    InfiniteStrengthError,
    InvalidEvidenceError,
)

MASS_TOL = 1e-12


def _as_vector(x):
    return np.array(x, dtype=np.float64).reshape(-1)


@dataclass(frozen=True)
class Opinion:
    """Belief masses over K classes plus the uncertainty mass m(Omega)."""

    beliefs: np.ndarray
    uncertainty: float
    num_classes: int = 0

    def __post_init__(self):
        b = _as_vector(self.beliefs)
        object.__setattr__(self, "beliefs", b)
        object.__setattr__(self, "uncertainty", float(self.uncertainty))
        k = self.num_classes or b.size
        object.__setattr__(self, "num_classes", int(k))
        if self.num_classes < 2:
            raise DimensionError(f"an opinion needs K >= 2 classes, got {self.num_classes}")
        if b.size != self.num_classes:
            raise DimensionError(f"{b.size} belief masses for K={self.num_classes}")
        if not np.all(np.isfinite(b)) or np.any(b < 0.0) or not self.uncertainty >= 0.0:
            raise ValueError("belief and uncertainty masses must be finite and non-negative")
        total = float(b.sum()) + self.uncertainty
        if abs(total - 1.0) > MASS_TOL:
            raise ValueError(f"masses sum to {total!r}, expected 1 within {MASS_TOL}")

    @classmethod
    def vacuous(cls, num_classes):
        return cls(np.zeros(num_classes), 1.0, num_classes)

    @property
    def is_vacuous(self):
        return self.uncertainty == 1.0 and not self.beliefs.any()


@dataclass(frozen=True)
class EvidenceVector:
    """Non-negative per-class evidence."""

    evidence: np.ndarray

    def __post_init__(self):
        e = _as_vector(self.evidence)
        object.__setattr__(self, "evidence", e)
        if e.size == 0 or not np.all(np.isfinite(e)) or np.any(e < 0.0):
            raise InvalidEvidenceError("evidence must be a non-empty vector of finite values >= 0")


@dataclass(frozen=True)
class DirichletParams:
    """Dirichlet concentration vector with its strength S = sum(alpha)."""

    alpha: np.ndarray
    strength: float = field(default=0.0)

    def __post_init__(self):
        a = _as_vector(self.alpha)
        object.__setattr__(self, "alpha", a)
        s = float(self.strength) if self.strength else float(a.sum())
        object.__setattr__(self, "strength", s)
        if a.size < 2:
            raise DimensionError(f"Dirichlet needs K >= 2 components, got {a.size}")
        if not np.all(np.isfinite(a)) or np.any(a < 1.0 - MASS_TOL):
            raise ValueError("concentration parameters must be finite and >= 1")
        if abs(self.strength - float(a.sum())) > MASS_TOL * max(1.0, abs(self.strength)):
            raise ValueError("strength does not match sum(alpha)")

    @property
    def num_classes(self):
        return self.alpha.size


@dataclass(frozen=True)
class FusionOutcome:
    """Combined opinion plus the conflict kappa of the final pairwise step."""

    opinion: Opinion
    conflict: float
    step_conflicts: tuple = ()

    def __post_init__(self):
        if not 0.0 <= self.conflict < 1.0:
            raise ValueError(f"conflict must lie in [0, 1), got {self.conflict}")


def opinion_from_evidence(e):
    """Map evidence to an opinion and its Dirichlet parameters.

    alpha_k = e_k + 1, S = sum(alpha), beliefs_k = e_k / S, uncertainty = K / S.
    """
    if not isinstance(e, EvidenceVector):
        e = EvidenceVector(e)
    ev = e.evidence
    k = ev.size
    if k < 2:
        raise DimensionError(f"evidence needs K >= 2 classes, got {k}")
    alpha = ev + 1.0
    strength = float(alpha.sum())
    beliefs = ev / strength
    uncertainty = k / strength
    return Opinion(beliefs, uncertainty, k), DirichletParams(alpha, strength)


def dirichlet_from_opinion(o):
    """Invert the evidence map: S = K / uncertainty, e_k = beliefs_k * S."""
    if o.uncertainty <= 0.0:
        raise InfiniteStrengthError(
            "zero uncertainty corresponds to infinite Dirichlet strength"
        )
    strength = o.num_classes / o.uncertainty
    alpha = o.beliefs * strength + 1.0
    return DirichletParams(alpha, float(alpha.sum()))


def expected_probs(d):
    """Mean of the Dirichlet: p_k = alpha_k / S."""
    return d.alpha / d.strength


def combine_pair(m1, m2):
    """Dempster's rule for two opinions on the same frame.

    kappa collects the cross products of disagreeing singleton beliefs; the
    surviving masses are rescaled by 1/(1-kappa). The vacuous opinion is the
    identity element and is returned unchanged (bit for bit) by a shortcut,
    since the general path renormalizes.
    """
    if m1.num_classes != m2.num_classes:
        raise DimensionError(
            f"cannot combine opinions over {m1.num_classes} and {m2.num_classes} classes"
        )
    if m1.is_vacuous:
        return FusionOutcome(m2, 0.0, (0.0,))
    if m2.is_vacuous:
        return FusionOutcome(m1, 0.0, (0.0,))
    b, u, kappa = kernels.combine_pair_batch(
        m1.beliefs[None, :],
        np.array([m1.uncertainty]),
        m2.beliefs[None, :],
        np.array([m2.uncertainty]),
    )
    conflict = float(kappa[0])
    return FusionOutcome(Opinion(b[0], float(u[0]), m1.num_classes), conflict, (conflict,))


def combine_all(opinions):
    """Left fold of combine_pair; reports the conflict of the final step."""
    opinions = list(opinions)
    if not opinions:
        raise DimensionError("combine_all needs at least one opinion")
    acc = opinions[0]
    steps = []
    for o in opinions[1:]:
        outcome = combine_pair(acc, o)
        acc = outcome.opinion
        steps.append(outcome.conflict)
    conflict = steps[-1] if steps else 0.0
    return FusionOutcome(acc, conflict, tuple(steps))
