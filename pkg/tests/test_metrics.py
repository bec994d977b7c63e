import itertools
import math
from fractions import Fraction

import numpy as np
import pytest

from screenloop.label_model import estimate_accuracies, raw_scores
from screenloop.labelers import LabelMatrix
from screenloop.metrics import (
    AgreementTable,
    MetricsError,
    ablate,
    cohens_kappa,
    enrichment_report,
    fisher_exact,
    roc_auc,
    roc_points,
    sensitivity_specificity,
)
from screenloop.corpus import Document
from screenloop.synthetic import planted_label_matrix


class TestRocAuc:
    def test_four_point_example(self):
        assert roc_auc([0.9, 0.8, 0.4, 0.3], [1, 0, 1, 0]) == pytest.approx(0.75)

    def test_perfect_and_inverted(self):
        assert roc_auc([0.9, 0.8, 0.2, 0.1], [1, 1, 0, 0]) == 1.0
        assert roc_auc([0.1, 0.2, 0.8, 0.9], [1, 1, 0, 0]) == 0.0

    def test_all_tied_is_half(self):
        assert roc_auc([0.5, 0.5, 0.5, 0.5], [1, 0, 1, 0]) == pytest.approx(0.5)

    def test_single_class_raises(self):
        with pytest.raises(MetricsError):
            roc_auc([0.1, 0.2], [1, 1])

    def test_matches_pair_counting_oracle(self):
        rng = np.random.default_rng(11)
        for _ in range(20):
            n = int(rng.integers(4, 30))
            scores = rng.choice([0.1, 0.3, 0.5, 0.7, 0.9], size=n)
            truth = rng.integers(0, 2, size=n)
            if truth.sum() in (0, n):
                continue
            wins = ties = 0
            pos = scores[truth == 1]
            neg = scores[truth == 0]
            for sp, sn in itertools.product(pos, neg):
                if sp > sn:
                    wins += 1
                elif sp == sn:
                    ties += 1
            expected = (wins + 0.5 * ties) / (len(pos) * len(neg))
            assert roc_auc(scores, truth) == pytest.approx(expected)

    def test_roc_points_trapezoid_matches_auc(self):
        rng = np.random.default_rng(7)
        scores = rng.random(60)
        truth = rng.integers(0, 2, size=60)
        pts = roc_points(scores, truth)
        assert pts[0][:2] == (0.0, 0.0)
        assert pts[-1][:2] == (1.0, 1.0)
        area = 0.0
        for (x0, y0, _), (x1, y1, _) in zip(pts, pts[1:]):
            assert x1 >= x0 and y1 >= y0
            area += (x1 - x0) * (y0 + y1) / 2.0
        assert area == pytest.approx(roc_auc(scores, truth))


class TestSensSpec:
    def test_threshold_inclusive(self):
        sens, spec = sensitivity_specificity([0.7, 0.6, 0.7, 0.8], [1, 1, 0, 0], 0.7)
        assert sens == pytest.approx(0.5)
        assert spec == pytest.approx(0.0)

    def test_extremes(self):
        sens, spec = sensitivity_specificity([0.9, 0.1], [1, 0], 0.5)
        assert (sens, spec) == (1.0, 1.0)


class TestKappa:
    def test_published_example(self):
        table = AgreementTable(both_pos=61, a_pos_b_neg=7, a_neg_b_pos=6, both_neg=26)
        assert cohens_kappa(table) == pytest.approx(0.7037, abs=5e-5)

    def test_perfect_agreement(self):
        assert cohens_kappa(AgreementTable(10, 0, 0, 10)) == 1.0

    def test_chance_level_is_zero(self):
        assert cohens_kappa(AgreementTable(25, 25, 25, 25)) == pytest.approx(0.0)

    def test_degenerate_unanimous(self):
        assert cohens_kappa(AgreementTable(10, 0, 0, 0)) == 1.0

    def test_empty_raises(self):
        with pytest.raises(MetricsError):
            cohens_kappa(AgreementTable(0, 0, 0, 0))


def fisher_oracle(a, b, c, d):
    """Exact rational two-sided Fisher p-value by enumeration."""
    n = a + b + c + d
    row1, col1 = a + b, a + c

    def table_prob(k):
        return (
            Fraction(math.comb(col1, k) * math.comb(n - col1, row1 - k), math.comb(n, row1))
        )

    obs = table_prob(a)
    lo = max(0, row1 + col1 - n)
    hi = min(row1, col1)
    return float(sum(table_prob(k) for k in range(lo, hi + 1) if table_prob(k) <= obs))


class TestFisherExact:
    def test_perfect_split_example(self):
        expected = 2.0 / math.comb(20, 10)
        assert fisher_exact((10, 0, 0, 10)) == pytest.approx(expected, rel=1e-9)

    def test_no_association(self):
        assert fisher_exact((5, 5, 5, 5)) == pytest.approx(1.0)

    def test_symmetries(self):
        p = fisher_exact((7, 2, 3, 8))
        assert fisher_exact((2, 7, 8, 3)) == pytest.approx(p, rel=1e-12)
        assert fisher_exact((3, 8, 7, 2)) == pytest.approx(p, rel=1e-12)
        assert fisher_exact((7, 3, 2, 8)) == pytest.approx(p, rel=1e-12)

    def test_degenerate_margin(self):
        assert fisher_exact((0, 0, 3, 7)) == 1.0
        assert fisher_exact((3, 7, 0, 0)) == 1.0
        assert fisher_exact((0, 3, 0, 7)) == 1.0

    def test_negative_raises(self):
        with pytest.raises(MetricsError):
            fisher_exact((1, -1, 2, 2))

    def test_matches_rational_enumeration(self):
        rng = np.random.default_rng(3)
        for _ in range(60):
            a, b, c, d = (int(x) for x in rng.integers(0, 11, size=4))
            if (a + b == 0 or c + d == 0 or a + c == 0 or b + d == 0):
                continue
            assert fisher_exact((a, b, c, d)) == pytest.approx(
                fisher_oracle(a, b, c, d), rel=1e-9
            )


def make_doc(doc_id, entities=(), mesh=()):
    return Document(
        id=doc_id,
        title="t",
        abstract="a",
        entities=tuple(entities),
        mesh_terms=frozenset(mesh),
    )


class TestEnrichment:
    def test_strongly_enriched_entity_ranks_first(self):
        target = [make_doc(f"t{i}", entities=[("disease", "D1", "title", 0)]) for i in range(20)]
        target += [make_doc(f"u{i}") for i in range(5)]
        background = [make_doc(f"b{i}", entities=[("disease", "D2", "title", 0)]) for i in range(20)]
        background += [make_doc(f"c{i}", entities=[("disease", "D1", "title", 0)]) for i in range(2)]
        rows = enrichment_report(target, background, "entities")
        assert rows[0].feature_id in ("disease:D1", "disease:D2")
        d1 = next(r for r in rows if r.feature_id == "disease:D1")
        assert d1.rate_target == pytest.approx(1000.0 * 20 / 25)
        assert d1.rate_background == pytest.approx(1000.0 * 2 / 22)
        assert d1.p_value < 0.001

    def test_mesh_feature_kind(self):
        target = [make_doc("t1", mesh=["COVID-19"]), make_doc("t2", mesh=["COVID-19"])]
        background = [make_doc("b1", mesh=["Influenza"]), make_doc("b2")]
        rows = enrichment_report(target, background, "mesh_terms")
        assert {r.feature_id for r in rows} == {"COVID-19", "Influenza"}

    def test_unknown_feature_kind(self):
        with pytest.raises(MetricsError):
            enrichment_report([make_doc("a")], [make_doc("b")], "keywords")

    def test_empty_corpus_raises(self):
        with pytest.raises(MetricsError):
            enrichment_report([], [make_doc("b")], "entities")


class TestAblation:
    def _matrix_and_truth(self):
        accs = [0.9, 0.85, 0.8, 0.75, 0.55]
        values, truth = planted_label_matrix(2000, accs, class_prior=0.3, seed=5)
        matrix = LabelMatrix(
            doc_ids=[f"d{i}" for i in range(2000)],
            lf_ids=[f"lf{j}" for j in range(5)],
            values=values,
        )
        eval_truth = {f"d{i}": int(truth[i]) for i in range(300)}
        return matrix, eval_truth

    def test_removing_strong_group_hurts_more(self):
        matrix, eval_truth = self._matrix_and_truth()
        groups = {"strong": {"lf0", "lf1"}, "weak": {"lf4"}}
        rows = ablate(matrix, groups, eval_truth)
        by_group = {r.group: r for r in rows}
        assert by_group["strong"].ablatable and by_group["weak"].ablatable
        assert by_group["strong"].delta_from_full > by_group["weak"].delta_from_full

    def test_not_ablatable_when_too_few_remain(self):
        matrix, eval_truth = self._matrix_and_truth()
        rows = ablate(matrix, {"most": {"lf0", "lf1", "lf2"}}, eval_truth)
        assert rows == [rows[0]]
        assert not rows[0].ablatable
        assert rows[0].auc_without is None and rows[0].delta_from_full is None

    def test_rows_sorted_by_group(self):
        matrix, eval_truth = self._matrix_and_truth()
        rows = ablate(matrix, {"b": {"lf0"}, "a": {"lf1"}}, eval_truth)
        assert [r.group for r in rows] == ["a", "b"]
