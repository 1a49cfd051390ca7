import pytest

from rsu_reliability.fusion import (
    EvaluationError,
    FusionConfig,
    ReliabilityVerdict,
    beta_pdf_rows,
    evaluate_batch,
    fuse_overall,
)
from rsu_reliability.sl import (
    DogmaticOpinionError,
    EvidenceVector,
    Opinion,
    opinion_from_evidence,
    opinions_allclose,
    project,
)

HALF = (0.5, 0.5)


def op_from_counts(counts):
    return opinion_from_evidence(EvidenceVector(counts=tuple(counts), base_rates=HALF))


def verdict_for(counts):
    op = op_from_counts(counts)
    return fuse_overall(op, op, op, op)


class TestFuseOverall:
    def test_all_vacuous_projects_base_rate(self):
        vac = Opinion.vacuous(HALF)
        verdict = fuse_overall(vac, vac, vac, vac)
        assert verdict.opinion.is_vacuous
        assert verdict.projected == pytest.approx(0.5, abs=1e-12)

    def test_identical_inputs_idempotent(self):
        op = op_from_counts([8.0, 1.0])
        verdict = fuse_overall(op, op, op, op, FusionConfig(w_it=2.0, w_ept=5.0))
        assert opinions_allclose(verdict.opinion, op, atol=1e-12)
        assert verdict.projected == pytest.approx(project(op)[0], abs=1e-12)

    def test_certain_heavy_group_dominates(self):
        certain = op_from_counts([200.0, 2.0])
        vague = op_from_counts([1.0, 1.0])
        verdict = fuse_overall(vague, vague, certain, certain,
                               FusionConfig(w_it=1.0, w_ept=3.0))
        d_ept = abs(verdict.projected - project(certain)[0])
        d_it = abs(verdict.projected - project(vague)[0])
        assert d_ept < d_it

    def test_weight_scaling_invariance(self):
        ops = [op_from_counts(c) for c in ([5, 1], [9, 0], [3, 3], [20, 1])]
        v1 = fuse_overall(*ops, FusionConfig(w_it=1.0, w_ept=3.0))
        v2 = fuse_overall(*ops, FusionConfig(w_it=10.0, w_ept=30.0))
        assert opinions_allclose(v1.opinion, v2.opinion, atol=1e-12)

    def test_equal_groups_equal_weights_identity(self):
        group = op_from_counts([6.0, 2.0])
        verdict = fuse_overall(group, group, group, group,
                               FusionConfig(w_it=2.0, w_ept=2.0))
        assert opinions_allclose(verdict.opinion, group, atol=1e-12)

    def test_dogmatic_input_rejected(self):
        dogmatic = Opinion(beliefs=(0.0, 1.0), uncertainty=0.0, base_rates=HALF)
        ok = op_from_counts([1.0, 1.0])
        with pytest.raises(DogmaticOpinionError, match="map"):
            fuse_overall(ok, dogmatic, ok, ok)

    def test_confidence_masses(self):
        verdict = verdict_for([400.0, 2.0])
        assert verdict.mass_above_high > 0.9
        assert verdict.mass_below_low < 0.1
        verdict = verdict_for([5.0, 400.0])
        assert verdict.mass_below_low > 0.9

    def test_vacuous_group_with_certain_group(self):
        vac = Opinion.vacuous(HALF)
        certain = op_from_counts([50.0, 1.0])
        verdict = fuse_overall(vac, vac, certain, certain,
                               FusionConfig(w_it=1.0, w_ept=3.0))
        # The vacuous group contributes zero evidence, only base-rate weight.
        assert verdict.projected > 0.85


class TestEvaluateBatch:
    def test_margin_and_extremes(self):
        batch = [
            ("correct", verdict_for([300.0, 1.0])),
            ("correct", verdict_for([200.0, 2.0])),
            ("faulty", verdict_for([5.0, 200.0])),
            ("faulty", verdict_for([10.0, 100.0])),
        ]
        report = evaluate_batch(batch)
        assert report.n_correct == 2 and report.n_faulty == 2
        assert report.min_correct == min(v.projected for l, v in batch[:2])
        assert report.max_faulty == max(v.projected for l, v in batch[2:])
        assert report.margin == pytest.approx(
            report.min_correct - report.max_faulty
        )
        assert report.margin > 0

    def test_single_correct_verdict(self):
        v = verdict_for([100.0, 1.0])
        report = evaluate_batch([("correct", v), ("faulty", verdict_for([1, 50]))])
        assert report.min_correct == pytest.approx(v.projected)

    def test_label_swap_negates_margin(self):
        a, b = verdict_for([300.0, 1.0]), verdict_for([5.0, 200.0])
        normal = evaluate_batch([("correct", a), ("faulty", b)])
        swapped = evaluate_batch([("correct", b), ("faulty", a)])
        assert swapped.margin == pytest.approx(-normal.margin, abs=1e-12)

    def test_single_class_rejected(self):
        with pytest.raises(EvaluationError):
            evaluate_batch([("correct", verdict_for([1, 1]))])

    def test_unknown_label_rejected(self):
        with pytest.raises(EvaluationError):
            evaluate_batch(
                [("good", verdict_for([1, 1])), ("faulty", verdict_for([1, 1]))]
            )


class TestBetaRows:
    def test_grid_shape_and_normalization(self):
        op = op_from_counts([12.0, 3.0])
        rows = beta_pdf_rows("s1", "correct", op)
        assert len(rows) == 201
        assert rows[0][2] == 0.0 and rows[-1][2] == 1.0
        xs = [r[2] for r in rows]
        ys = [r[3] for r in rows]
        # Trapezoid over the grid should be close to 1 for a smooth density.
        integral = sum(
            0.5 * (y0 + y1) * (x1 - x0)
            for x0, x1, y0, y1 in zip(xs, xs[1:], ys, ys[1:])
        )
        assert integral == pytest.approx(1.0, abs=5e-3)
