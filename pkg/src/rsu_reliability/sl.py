"""Multinomial subjective-logic opinions and their fusion operators.

An opinion distributes one unit of mass between per-outcome beliefs and an
explicit uncertainty term, alongside a prior (base rate) distribution.  Every
non-dogmatic opinion is equivalent to a Dirichlet distribution through the
evidence mapping, which is what makes the fusion operators below well defined:
cumulative fusion adds evidence, averaging fusion averages it, and the
weighted variants interpolate.

All values are immutable; operators are pure functions and safe to call from
any thread.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

from scipy.special import betainc, betaln

_ATOL = 1e-9


class SLError(ValueError):
    """Base class for subjective-logic domain errors."""


class DomainMismatchError(SLError):
    """Operands live on different domains or disagree on the prior weight."""


class DogmaticOpinionError(SLError):
    """Operation undefined for an opinion with zero uncertainty."""


class FusionPreconditionError(SLError):
    """Operand uncertainties violate a fusion operator's side condition."""


def _clean_unit(value: float, name: str) -> float:
    """Validate a [0, 1] component, clamping float dust at the boundaries."""
    if not math.isfinite(value):
        raise SLError(f"{name} must be finite, got {value!r}")
    if value < -_ATOL or value > 1.0 + _ATOL:
        raise SLError(f"{name} must be in [0, 1], got {value!r}")
    return min(max(value, 0.0), 1.0)


@dataclass(frozen=True)
class Opinion:
    """An opinion (beliefs, uncertainty, base rates) over a finite domain.

    ``sum(beliefs) + uncertainty == 1`` and ``sum(base_rates) == 1``, both
    within 1e-9.  ``prior_weight`` is the non-informative prior strength of
    the equivalent Dirichlet distribution (2 for a binary domain).
    """

    beliefs: tuple[float, ...]
    uncertainty: float
    base_rates: tuple[float, ...]
    prior_weight: float = 2.0

    def __post_init__(self) -> None:
        beliefs = tuple(_clean_unit(b, "belief") for b in self.beliefs)
        base_rates = tuple(_clean_unit(a, "base rate") for a in self.base_rates)
        object.__setattr__(self, "beliefs", beliefs)
        object.__setattr__(self, "base_rates", base_rates)
        object.__setattr__(
            self, "uncertainty", _clean_unit(self.uncertainty, "uncertainty")
        )
        if len(beliefs) < 2:
            raise SLError("domain cardinality must be at least 2")
        if len(base_rates) != len(beliefs):
            raise SLError("beliefs and base_rates must have equal length")
        if abs(sum(beliefs) + self.uncertainty - 1.0) > _ATOL:
            raise SLError("beliefs and uncertainty must sum to 1")
        if abs(sum(base_rates) - 1.0) > _ATOL:
            raise SLError("base rates must sum to 1")
        if self.prior_weight <= 0.0:
            raise SLError("prior weight must be positive")

    @property
    def cardinality(self) -> int:
        return len(self.beliefs)

    @property
    def is_vacuous(self) -> bool:
        return self.uncertainty == 1.0

    @property
    def is_dogmatic(self) -> bool:
        return self.uncertainty == 0.0

    @staticmethod
    def vacuous(base_rates: Sequence[float], prior_weight: float = 2.0) -> "Opinion":
        """Totally uncertain opinion: no evidence, projects to its base rate."""
        return Opinion(
            beliefs=(0.0,) * len(base_rates),
            uncertainty=1.0,
            base_rates=tuple(base_rates),
            prior_weight=prior_weight,
        )

    def to_dict(self) -> dict:
        return {
            "beliefs": list(self.beliefs),
            "uncertainty": self.uncertainty,
            "base_rates": list(self.base_rates),
            "prior_weight": self.prior_weight,
        }

    @staticmethod
    def from_dict(record: dict) -> "Opinion":
        return Opinion(
            beliefs=tuple(record["beliefs"]),
            uncertainty=record["uncertainty"],
            base_rates=tuple(record["base_rates"]),
            prior_weight=record["prior_weight"],
        )


@dataclass(frozen=True)
class EvidenceVector:
    """Per-outcome evidence counts, the Dirichlet-space twin of an Opinion.

    Counts may be fractional: discounted evidence is less than one unit.
    """

    counts: tuple[float, ...]
    base_rates: tuple[float, ...]
    prior_weight: float = 2.0

    def __post_init__(self) -> None:
        counts = tuple(float(c) for c in self.counts)
        base_rates = tuple(_clean_unit(a, "base rate") for a in self.base_rates)
        object.__setattr__(self, "counts", counts)
        object.__setattr__(self, "base_rates", base_rates)
        if len(counts) < 2:
            raise SLError("domain cardinality must be at least 2")
        if len(base_rates) != len(counts):
            raise SLError("counts and base_rates must have equal length")
        for c, a in zip(counts, base_rates):
            if not math.isfinite(c) or c < -_ATOL:
                raise SLError(f"evidence counts must be non-negative, got {c!r}")
            if c + a * self.prior_weight < -_ATOL:
                raise SLError("count plus weighted base rate must be non-negative")
        if self.prior_weight <= 0.0:
            raise SLError("prior weight must be positive")

    @property
    def total(self) -> float:
        return sum(self.counts)


@dataclass(frozen=True)
class ProjectedProbability:
    """Projection of an opinion onto a single probability distribution."""

    probs: tuple[float, ...]

    def __post_init__(self) -> None:
        probs = tuple(_clean_unit(p, "probability") for p in self.probs)
        object.__setattr__(self, "probs", probs)
        if abs(sum(probs) - 1.0) > _ATOL:
            raise SLError("projected probabilities must sum to 1")

    def __getitem__(self, index: int) -> float:
        return self.probs[index]


@dataclass(frozen=True)
class DiscountVector:
    """Per-outcome probability that a new evidence item is independent."""

    probs: tuple[float, ...]

    def __post_init__(self) -> None:
        probs = tuple(_clean_unit(p, "discount probability") for p in self.probs)
        object.__setattr__(self, "probs", probs)

    def __getitem__(self, index: int) -> float:
        return self.probs[index]


def _check_domains(a: Opinion, b: Opinion) -> None:
    if a.cardinality != b.cardinality:
        raise DomainMismatchError(
            f"domain cardinality mismatch: {a.cardinality} vs {b.cardinality}"
        )
    if abs(a.prior_weight - b.prior_weight) > _ATOL:
        raise DomainMismatchError(
            f"prior weight mismatch: {a.prior_weight} vs {b.prior_weight}"
        )


def opinion_from_evidence(ev: EvidenceVector) -> Opinion:
    """Map evidence counts to an opinion: beliefs r/(W + sum r), rest to u."""
    denom = ev.prior_weight + ev.total
    return Opinion(
        beliefs=tuple(max(c, 0.0) / denom for c in ev.counts),
        uncertainty=ev.prior_weight / denom,
        base_rates=ev.base_rates,
        prior_weight=ev.prior_weight,
    )


def evidence_from_opinion(op: Opinion) -> EvidenceVector:
    """Inverse mapping, r = W * b / u.  Undefined for dogmatic opinions."""
    if op.uncertainty <= 0.0:
        raise DogmaticOpinionError("dogmatic opinion carries infinite evidence")
    scale = op.prior_weight / op.uncertainty
    return EvidenceVector(
        counts=tuple(scale * b for b in op.beliefs),
        base_rates=op.base_rates,
        prior_weight=op.prior_weight,
    )


def _fused_base_rates(a: Opinion, b: Opinion) -> tuple[float, ...]:
    """Uncertainty-blended base rates used by cumulative fusion.

    Convex-combination form of the textbook expression; the naive form
    cancels catastrophically when an operand is nearly vacuous.
    """
    ua, ub = a.uncertainty, b.uncertainty
    wa = ub * (1.0 - ua)
    wb = ua * (1.0 - ub)
    if wa + wb == 0.0:
        return tuple((x + y) / 2.0 for x, y in zip(a.base_rates, b.base_rates))
    denom = wa + wb
    return tuple(
        (x * wa + y * wb) / denom for x, y in zip(a.base_rates, b.base_rates)
    )


def cumulative_fuse(a: Opinion, b: Opinion) -> Opinion:
    """Fuse two independent bodies of evidence (adds evidence counts).

    Vacuous operands contribute nothing; dogmatic operands are rejected
    because their evidence is infinite.
    """
    _check_domains(a, b)
    if a.is_dogmatic or b.is_dogmatic:
        raise DogmaticOpinionError("cumulative fusion needs non-dogmatic operands")
    ua, ub = a.uncertainty, b.uncertainty
    denom = ua + ub - ua * ub
    return Opinion(
        beliefs=tuple(
            (ba * ub + bb * ua) / denom for ba, bb in zip(a.beliefs, b.beliefs)
        ),
        uncertainty=ua * ub / denom,
        base_rates=_fused_base_rates(a, b),
        prior_weight=a.prior_weight,
    )


def averaging_fuse(a: Opinion, b: Opinion) -> Opinion:
    """Average two dependent opinions (idempotent, commutative)."""
    _check_domains(a, b)
    if a.is_dogmatic or b.is_dogmatic:
        raise DogmaticOpinionError("averaging fusion needs non-dogmatic operands")
    ua, ub = a.uncertainty, b.uncertainty
    denom = ua + ub
    return Opinion(
        beliefs=tuple(
            (ba * ub + bb * ua) / denom for ba, bb in zip(a.beliefs, b.beliefs)
        ),
        uncertainty=2.0 * ua * ub / denom,
        base_rates=tuple(
            (x + y) / 2.0 for x, y in zip(a.base_rates, b.base_rates)
        ),
        prior_weight=a.prior_weight,
    )


def averaging_fuse_many(opinions: Sequence[Opinion]) -> Opinion:
    """N-ary averaging fusion, computed as the evidence-count mean.

    Pairwise averaging fusion is not associative; the evidence-space mean is
    order-free and coincides with the pairwise operator for two operands with
    equal base rates.
    """
    if not opinions:
        raise SLError("averaging fusion over an empty set is undefined")
    first = opinions[0]
    for op in opinions[1:]:
        _check_domains(first, op)
    evidences = [evidence_from_opinion(op) for op in opinions]
    n = len(opinions)
    counts = tuple(
        sum(ev.counts[i] for ev in evidences) / n for i in range(first.cardinality)
    )
    base_rates = tuple(
        sum(op.base_rates[i] for op in opinions) / n
        for i in range(first.cardinality)
    )
    return opinion_from_evidence(
        EvidenceVector(counts=counts, base_rates=base_rates,
                       prior_weight=first.prior_weight)
    )


def uncertainty_weighted_fuse(a: Opinion, b: Opinion) -> Opinion:
    """Average two opinions, pulling the result toward the more certain one.

    Undefined when both operands are dogmatic or both are vacuous.
    """
    _check_domains(a, b)
    ua, ub = a.uncertainty, b.uncertainty
    if ua == 0.0 and ub == 0.0:
        raise FusionPreconditionError(
            "uncertainty-weighted fusion undefined for two dogmatic operands"
        )
    if ua == 1.0 and ub == 1.0:
        raise FusionPreconditionError(
            "uncertainty-weighted fusion undefined for two vacuous operands"
        )
    belief_denom = ua + ub - 2.0 * ua * ub
    rate_denom = 2.0 - ua - ub
    return Opinion(
        beliefs=tuple(
            (ba * (1.0 - ua) * ub + bb * (1.0 - ub) * ua) / belief_denom
            for ba, bb in zip(a.beliefs, b.beliefs)
        ),
        uncertainty=(2.0 - ua - ub) * ua * ub / belief_denom,
        base_rates=tuple(
            (x * (1.0 - ua) + y * (1.0 - ub)) / rate_denom
            for x, y in zip(a.base_rates, b.base_rates)
        ),
        prior_weight=a.prior_weight,
    )


def importance_weighted_fuse(
    a: Opinion, w_a: float, b: Opinion, w_b: float
) -> Opinion:
    """Weighted evidence average: r = (w_a r_a + w_b r_b) / (w_a + w_b).

    Base rates are combined with the same weights.  Homogeneous in the
    weights: scaling both by a constant leaves the result unchanged.
    """
    _check_domains(a, b)
    if w_a <= 0.0 or w_b <= 0.0:
        raise SLError("importance weights must be positive")
    ev_a = evidence_from_opinion(a)
    ev_b = evidence_from_opinion(b)
    wsum = w_a + w_b
    counts = tuple(
        (w_a * ca + w_b * cb) / wsum for ca, cb in zip(ev_a.counts, ev_b.counts)
    )
    base_rates = tuple(
        (w_a * x + w_b * y) / wsum for x, y in zip(a.base_rates, b.base_rates)
    )
    return opinion_from_evidence(
        EvidenceVector(counts=counts, base_rates=base_rates,
                       prior_weight=a.prior_weight)
    )


def trust_discount(op: Opinion, p: DiscountVector | Sequence[float]) -> Opinion:
    """Scale beliefs by per-outcome trust, moving the freed mass to uncertainty."""
    probs = p.probs if isinstance(p, DiscountVector) else DiscountVector(tuple(p)).probs
    if len(probs) != op.cardinality:
        raise DomainMismatchError("discount vector length must match the domain")
    beliefs = tuple(pi * bi for pi, bi in zip(probs, op.beliefs))
    freed = sum((1.0 - pi) * bi for pi, bi in zip(probs, op.beliefs))
    uncertainty = 1.0 if not any(beliefs) else op.uncertainty + freed
    return Opinion(
        beliefs=beliefs,
        uncertainty=uncertainty,
        base_rates=op.base_rates,
        prior_weight=op.prior_weight,
    )


def trust_revise(op: Opinion, dc: float) -> Opinion:
    """Shrink trust after observed conflict on a binary {reliable, unreliable} domain.

    Scales the reliable-outcome belief and the uncertainty by (1 - dc) and
    assigns the freed mass to the unreliable outcome so that the mass
    additivity of the opinion is preserved.
    """
    if op.cardinality != 2:
        raise SLError("trust revision is defined on a binary domain")
    if not 0.0 <= dc <= 1.0:
        raise SLError(f"degree of conflict must be in [0, 1], got {dc!r}")
    keep = 1.0 - dc
    b_reliable = keep * op.beliefs[0]
    uncertainty = keep * op.uncertainty
    b_unreliable = op.beliefs[1] + dc * (op.beliefs[0] + op.uncertainty)
    return Opinion(
        beliefs=(b_reliable, b_unreliable),
        uncertainty=uncertainty,
        base_rates=op.base_rates,
        prior_weight=op.prior_weight,
    )


def project(op: Opinion) -> ProjectedProbability:
    """Project an opinion onto probabilities: p = b + u * a."""
    return ProjectedProbability(
        probs=tuple(
            b + op.uncertainty * a for b, a in zip(op.beliefs, op.base_rates)
        )
    )


def degree_of_conflict(a: Opinion, b: Opinion) -> float:
    """Certainty-weighted total-variation distance between two opinions.

    Zero whenever either operand is vacuous; one only for dogmatic opinions
    with disjoint support.
    """
    _check_domains(a, b)
    pa = project(a).probs
    pb = project(b).probs
    distance = 0.5 * sum(abs(x - y) for x, y in zip(pa, pb))
    dc = distance * (1.0 - a.uncertainty) * (1.0 - b.uncertainty)
    return min(max(dc, 0.0), 1.0)


def _beta_params(op: Opinion) -> tuple[float, float]:
    if op.cardinality != 2:
        raise SLError("beta evaluation requires a binary domain")
    ev = evidence_from_opinion(op)
    alpha = ev.counts[0] + op.base_rates[0] * op.prior_weight
    beta = ev.counts[1] + op.base_rates[1] * op.prior_weight
    return alpha, beta


def beta_density(op: Opinion, x: float) -> float:
    """Density of the opinion's equivalent beta distribution at x in (0, 1)."""
    if not 0.0 < x < 1.0:
        raise SLError(f"density point must be in (0, 1), got {x!r}")
    alpha, beta = _beta_params(op)
    log_pdf = (
        (alpha - 1.0) * math.log(x)
        + (beta - 1.0) * math.log1p(-x)
        - betaln(alpha, beta)
    )
    # Extremely peaked distributions can overflow a float at their mode.
    if log_pdf > 700.0:
        return math.inf
    return math.exp(log_pdf)


def beta_tail_mass(op: Opinion, lo: float, hi: float) -> float:
    """Probability mass of the opinion's beta distribution over [lo, hi]."""
    if not (0.0 <= lo <= hi <= 1.0):
        raise SLError(f"invalid integration interval [{lo!r}, {hi!r}]")
    alpha, beta = _beta_params(op)
    mass = float(betainc(alpha, beta, hi) - betainc(alpha, beta, lo))
    return min(max(mass, 0.0), 1.0)


def opinions_allclose(a: Opinion, b: Opinion, atol: float = _ATOL) -> bool:
    """Componentwise comparison of two opinions on the same domain."""
    if a.cardinality != b.cardinality:
        return False
    pairs: Iterable[tuple[float, float]] = zip(
        (*a.beliefs, a.uncertainty, *a.base_rates),
        (*b.beliefs, b.uncertainty, *b.base_rates),
    )
    return all(abs(x - y) <= atol for x, y in pairs)
