"""Property-based checks for the opinion algebra."""

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rsu_reliability.sl import (
    DiscountVector,
    EvidenceVector,
    Opinion,
    averaging_fuse,
    averaging_fuse_many,
    cumulative_fuse,
    degree_of_conflict,
    evidence_from_opinion,
    importance_weighted_fuse,
    opinion_from_evidence,
    opinions_allclose,
    project,
    trust_discount,
    uncertainty_weighted_fuse,
)

TOL = 1e-9

_count = st.floats(min_value=0.0, max_value=50.0, allow_nan=False)
_weight = st.floats(min_value=1e-3, max_value=1e3, allow_nan=False)


@st.composite
def binary_base_rates(draw):
    a = draw(st.floats(min_value=0.01, max_value=0.99, allow_nan=False))
    return (a, 1.0 - a)


@st.composite
def evidence_opinions(draw, base_rates=None, min_first_count=0.0):
    """Non-dogmatic binary opinions generated through the evidence mapping."""
    rates = base_rates if base_rates is not None else draw(binary_base_rates())
    counts = (
        draw(st.floats(min_value=min_first_count, max_value=50.0, allow_nan=False)),
        draw(_count),
    )
    return opinion_from_evidence(
        EvidenceVector(counts=counts, base_rates=rates, prior_weight=2.0)
    )


@st.composite
def simplex_opinions(draw, cardinality=2):
    """Opinions drawn directly from the mass simplex (may be dogmatic)."""
    raw = [draw(st.floats(min_value=0.0, max_value=1.0, allow_nan=False))
           for _ in range(cardinality + 1)]
    total = sum(raw)
    if total == 0.0:
        raw = [1.0] * (cardinality + 1)
        total = float(cardinality + 1)
    parts = [x / total for x in raw]
    beliefs = tuple(parts[:cardinality])
    uncertainty = 1.0 - sum(beliefs)
    rates_raw = [draw(st.floats(min_value=0.01, max_value=1.0, allow_nan=False))
                 for _ in range(cardinality)]
    rate_total = sum(rates_raw)
    rates = tuple(r / rate_total for r in rates_raw)
    return Opinion(beliefs=beliefs, uncertainty=uncertainty, base_rates=rates)


def assert_valid(op: Opinion):
    assert all(0.0 <= b <= 1.0 for b in op.beliefs)
    assert 0.0 <= op.uncertainty <= 1.0
    assert abs(sum(op.beliefs) + op.uncertainty - 1.0) <= TOL
    assert abs(sum(op.base_rates) - 1.0) <= TOL


class TestEvidenceRoundtrip:
    @given(op=evidence_opinions())
    def test_roundtrip_identity(self, op):
        back = opinion_from_evidence(evidence_from_opinion(op))
        assert opinions_allclose(back, op, atol=1e-12)


class TestCumulativeFusionProperties:
    @given(a=evidence_opinions(), b=evidence_opinions())
    def test_commutative(self, a, b):
        assert opinions_allclose(cumulative_fuse(a, b), cumulative_fuse(b, a),
                                 atol=TOL)

    @given(rates=binary_base_rates(), data=st.data())
    def test_associative_with_shared_rates(self, rates, data):
        a = data.draw(evidence_opinions(base_rates=rates))
        b = data.draw(evidence_opinions(base_rates=rates))
        c = data.draw(evidence_opinions(base_rates=rates))
        left = cumulative_fuse(cumulative_fuse(a, b), c)
        right = cumulative_fuse(a, cumulative_fuse(b, c))
        assert opinions_allclose(left, right, atol=TOL)

    @given(rates=binary_base_rates(), data=st.data())
    def test_equals_evidence_addition(self, rates, data):
        a = data.draw(evidence_opinions(base_rates=rates))
        b = data.draw(evidence_opinions(base_rates=rates))
        ra = evidence_from_opinion(a)
        rb = evidence_from_opinion(b)
        expected = opinion_from_evidence(
            EvidenceVector(
                counts=tuple(x + y for x, y in zip(ra.counts, rb.counts)),
                base_rates=rates,
            )
        )
        assert opinions_allclose(cumulative_fuse(a, b), expected, atol=TOL)

    @given(a=evidence_opinions(), b=evidence_opinions())
    def test_output_valid(self, a, b):
        assert_valid(cumulative_fuse(a, b))

    @given(a=evidence_opinions(), b=evidence_opinions())
    def test_uncertainty_never_grows(self, a, b):
        fused = cumulative_fuse(a, b)
        assert fused.uncertainty <= min(a.uncertainty, b.uncertainty) + TOL


class TestAveragingFusionProperties:
    @given(a=evidence_opinions(), b=evidence_opinions())
    def test_commutative(self, a, b):
        assert opinions_allclose(averaging_fuse(a, b), averaging_fuse(b, a),
                                 atol=TOL)

    @given(a=evidence_opinions())
    def test_idempotent(self, a):
        assert opinions_allclose(averaging_fuse(a, a), a, atol=TOL)

    @given(a=evidence_opinions(), b=evidence_opinions())
    def test_output_valid(self, a, b):
        assert_valid(averaging_fuse(a, b))

    @settings(max_examples=60)
    @given(data=st.data(), n=st.integers(min_value=1, max_value=6))
    def test_nary_order_invariant(self, data, n):
        ops = [data.draw(evidence_opinions()) for _ in range(n)]
        forward = averaging_fuse_many(ops)
        backward = averaging_fuse_many(ops[::-1])
        assert opinions_allclose(forward, backward, atol=TOL)
        assert_valid(forward)


class TestUncertaintyWeightedProperties:
    # One operand is kept non-vacuous: the operator's side condition
    # excludes fusing two vacuous opinions.
    @given(a=evidence_opinions(min_first_count=1e-3), b=evidence_opinions())
    def test_output_valid(self, a, b):
        assert_valid(uncertainty_weighted_fuse(a, b))

    @given(a=evidence_opinions(min_first_count=1e-3), b=evidence_opinions())
    def test_commutative(self, a, b):
        assert opinions_allclose(
            uncertainty_weighted_fuse(a, b), uncertainty_weighted_fuse(b, a),
            atol=TOL,
        )

    @given(rates=binary_base_rates(), data=st.data())
    def test_projection_between_operands(self, rates, data):
        a = data.draw(evidence_opinions(base_rates=rates, min_first_count=1e-3))
        b = data.draw(evidence_opinions(base_rates=rates))
        fused = uncertainty_weighted_fuse(a, b)
        lo = min(project(a)[0], project(b)[0])
        hi = max(project(a)[0], project(b)[0])
        assert lo - TOL <= project(fused)[0] <= hi + TOL


class TestImportanceWeightedProperties:
    @given(a=evidence_opinions(), b=evidence_opinions(),
           w1=_weight, w2=_weight, scale=_weight)
    def test_weight_homogeneity(self, a, b, w1, w2, scale):
        f1 = importance_weighted_fuse(a, w1, b, w2)
        f2 = importance_weighted_fuse(a, w1 * scale, b, w2 * scale)
        assert opinions_allclose(f1, f2, atol=1e-12)

    @given(a=evidence_opinions(), w=_weight)
    def test_self_fusion_identity(self, a, w):
        assert opinions_allclose(importance_weighted_fuse(a, w, a, w), a,
                                 atol=1e-12)

    @given(a=evidence_opinions(), b=evidence_opinions(), w1=_weight, w2=_weight)
    def test_output_valid(self, a, b, w1, w2):
        assert_valid(importance_weighted_fuse(a, w1, b, w2))


class TestTrustDiscountProperties:
    @given(op=simplex_opinions())
    def test_full_trust_is_identity(self, op):
        assert opinions_allclose(trust_discount(op, (1.0, 1.0)), op, atol=0.0)

    @given(op=simplex_opinions(), data=st.data())
    def test_monotone_in_trust(self, op, data):
        p_hi = data.draw(st.floats(min_value=0.0, max_value=1.0, allow_nan=False))
        p_lo = data.draw(st.floats(min_value=0.0, max_value=p_hi, allow_nan=False))
        hi = trust_discount(op, DiscountVector((p_hi, p_hi)))
        lo = trust_discount(op, DiscountVector((p_lo, p_lo)))
        for b_lo, b_hi in zip(lo.beliefs, hi.beliefs):
            assert b_lo <= b_hi + TOL
        assert_valid(hi)
        assert_valid(lo)


class TestConflictProperties:
    @given(a=simplex_opinions(), b=simplex_opinions())
    def test_symmetric_and_bounded(self, a, b):
        dc = degree_of_conflict(a, b)
        assert 0.0 <= dc <= 1.0
        assert dc == pytest.approx(degree_of_conflict(b, a), abs=TOL)

    @given(a=simplex_opinions())
    def test_vacuous_operand_zeroes_conflict(self, a):
        assert degree_of_conflict(a, Opinion.vacuous(a.base_rates)) == 0.0
