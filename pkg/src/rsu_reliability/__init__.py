"""Online reliability estimation for cooperative perception data."""

from rsu_reliability.sl import (
    DiscountVector,
    EvidenceVector,
    Opinion,
    ProjectedProbability,
    averaging_fuse,
    averaging_fuse_many,
    beta_density,
    beta_tail_mass,
    cumulative_fuse,
    degree_of_conflict,
    evidence_from_opinion,
    importance_weighted_fuse,
    opinion_from_evidence,
    project,
    trust_discount,
    trust_revise,
    uncertainty_weighted_fuse,
)

__all__ = [
    "DiscountVector",
    "EvidenceVector",
    "Opinion",
    "ProjectedProbability",
    "averaging_fuse",
    "averaging_fuse_many",
    "beta_density",
    "beta_tail_mass",
    "cumulative_fuse",
    "degree_of_conflict",
    "evidence_from_opinion",
    "importance_weighted_fuse",
    "opinion_from_evidence",
    "project",
    "trust_discount",
    "trust_revise",
    "uncertainty_weighted_fuse",
]

__version__ = "0.1.0"
