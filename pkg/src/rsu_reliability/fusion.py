"""Combining the four test opinions into one reliability verdict.

The two perception-independent tests and the two ego-perception-based tests
are each averaged with the uncertainty-weighted operator, then the groups are
combined by an importance-weighted evidence average.  Verdicts additionally
carry two confidence masses of the equivalent beta distribution: the mass
above 0.9 (support for "reliable") and below 0.7 (support for "faulty").
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from rsu_reliability.sl import (
    DogmaticOpinionError,
    Opinion,
    SLError,
    beta_density,
    beta_tail_mass,
    importance_weighted_fuse,
    project,
    uncertainty_weighted_fuse,
)

CONFIDENCE_HIGH = 0.9  # lower edge of the "reliable" confidence interval
CONFIDENCE_LOW = 0.7   # upper edge of the "faulty" confidence interval


class EvaluationError(ValueError):
    pass


@dataclass(frozen=True)
class FusionConfig:
    """Importance weights of the two test groups."""

    w_it: float = 1.0
    w_ept: float = 3.0

    def __post_init__(self) -> None:
        if self.w_it <= 0.0 or self.w_ept <= 0.0:
            raise SLError("fusion weights must be positive")


@dataclass(frozen=True)
class ReliabilityVerdict:
    """Overall opinion plus its projected reliability and confidence masses."""

    opinion: Opinion
    projected: float
    mass_above_high: float
    mass_below_low: float

    def to_dict(self) -> dict:
        return {
            "opinion": self.opinion.to_dict(),
            "projected": self.projected,
            "confidence": {
                "mass_above_0.9": self.mass_above_high,
                "mass_below_0.7": self.mass_below_low,
            },
        }


def _group_fuse(a: Opinion, b: Opinion) -> Opinion:
    """Uncertainty-weighted average, defined for two vacuous operands too."""
    if a.is_vacuous and b.is_vacuous:
        rates = tuple((x + y) / 2.0 for x, y in zip(a.base_rates, b.base_rates))
        return Opinion.vacuous(rates, a.prior_weight)
    return uncertainty_weighted_fuse(a, b)


def fuse_overall(
    pred: Opinion,
    map_: Opinion,
    perc: Opinion,
    loc: Opinion,
    cfg: FusionConfig = FusionConfig(),
) -> ReliabilityVerdict:
    """Fuse the four test opinions into the overall reliability verdict."""
    for name, op in (("prediction", pred), ("map", map_),
                     ("perception", perc), ("localization", loc)):
        if op.is_dogmatic:
            raise DogmaticOpinionError(
                f"{name} test opinion is dogmatic; overall fusion is undefined"
            )
        if op.cardinality != 2:
            raise SLError(f"{name} test opinion must live on the binary domain")
    independent = _group_fuse(pred, map_)
    ego_based = _group_fuse(perc, loc)
    total = importance_weighted_fuse(independent, cfg.w_it, ego_based, cfg.w_ept)
    return ReliabilityVerdict(
        opinion=total,
        projected=project(total)[0],
        mass_above_high=beta_tail_mass(total, CONFIDENCE_HIGH, 1.0),
        mass_below_low=beta_tail_mass(total, 0.0, CONFIDENCE_LOW),
    )


@dataclass(frozen=True)
class SeparationReport:
    """Class-separation summary over a batch of labeled verdicts."""

    n_correct: int
    n_faulty: int
    min_correct: float
    max_faulty: float
    margin: float
    min_correct_mass_above: float
    min_faulty_mass_below: float

    def to_dict(self) -> dict:
        return {
            "n_correct": self.n_correct,
            "n_faulty": self.n_faulty,
            "min_correct_projected": self.min_correct,
            "max_faulty_projected": self.max_faulty,
            "margin": self.margin,
            "min_correct_mass_above_0.9": self.min_correct_mass_above,
            "min_faulty_mass_below_0.7": self.min_faulty_mass_below,
        }


def evaluate_batch(
    verdicts: list[tuple[str, ReliabilityVerdict]]
) -> SeparationReport:
    """Summarize how well correct and faulty scenarios separate."""
    correct = [v for label, v in verdicts if label == "correct"]
    faulty = [v for label, v in verdicts if label == "faulty"]
    unknown = [label for label, _ in verdicts if label not in ("correct", "faulty")]
    if unknown:
        raise EvaluationError(f"unknown labels: {sorted(set(unknown))}")
    if not correct or not faulty:
        raise EvaluationError("need at least one verdict per class")
    min_correct = min(v.projected for v in correct)
    max_faulty = max(v.projected for v in faulty)
    return SeparationReport(
        n_correct=len(correct),
        n_faulty=len(faulty),
        min_correct=min_correct,
        max_faulty=max_faulty,
        margin=min_correct - max_faulty,
        min_correct_mass_above=min(v.mass_above_high for v in correct),
        min_faulty_mass_below=min(v.mass_below_low for v in faulty),
    )


def beta_pdf_rows(
    scenario_id: str, label: str, opinion: Opinion, points: int = 201
) -> list[tuple[str, str, float, float]]:
    """Evenly spaced beta-density samples on [0, 1] for plotting."""
    rows = []
    eps = 1e-12
    for x in np.linspace(0.0, 1.0, points):
        x_eval = min(max(float(x), eps), 1.0 - eps)
        rows.append((scenario_id, label, float(x), beta_density(opinion, x_eval)))
    return rows
