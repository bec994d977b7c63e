import math

import numpy as np
import pytest

from screenloop.corpus import Corpus, Document, SplitAssignment
from screenloop.grammar import default_rules
from screenloop.labelers import (
    KIND_BIAS,
    KIND_GRAMMAR_FT,
    KIND_GRAMMAR_TA,
    SOURCE_ENTITIES_FT,
    SOURCE_ENTITIES_TA,
    SOURCE_MESH,
    FeatureModel,
    LabelerError,
    LabelingFunctionSpec,
    LFContext,
    apply_feature_lf,
    bias_lf,
    build_label_matrix,
    doc_features,
    grammar_lf,
    load_external_predictions,
    train_feature_lf,
)


@pytest.fixture(scope="module")
def rules():
    return default_rules()


def entity_doc(doc_id, entity_ids, label_section="abstract", **kw):
    entities = tuple(("Disease", e, e, label_section) for e in entity_ids)
    return Document(id=doc_id, title=kw.pop("title", "t"), entities=entities, **kw)


class TestGrammarLF:
    def test_title_hit(self, rules):
        doc = Document(id="d", title="Long COVID in children")
        assert grammar_lf(doc, rules, "title_abstract") == 1.0

    def test_no_full_text_abstains(self, rules):
        doc = Document(id="d", title="Long COVID in children")
        assert grammar_lf(doc, rules, "full_text") == 0.5

    def test_no_terms(self, rules):
        doc = Document(id="d", title="influenza", abstract="nothing here")
        assert grammar_lf(doc, rules, "title_abstract") == 0.0

    def test_full_text_hit_and_miss(self, rules):
        hit = Document(id="d1", title="t", full_text="we studied long covid")
        miss = Document(id="d2", title="t", full_text="we studied flu")
        assert grammar_lf(hit, rules, "full_text") == 1.0
        assert grammar_lf(miss, rules, "full_text") == 0.0


class TestFeatureModel:
    def separable_fold(self, n=40):
        # feature MARKER present iff relevant
        docs, labels = [], {}
        for i in range(n):
            relevant = i % 2 == 0
            ents = ["MARKER"] if relevant else []
            ents.append(f"noise{i % 5}")
            docs.append(entity_doc(f"d{i}", ents))
            labels[f"d{i}"] = int(relevant)
        return Corpus(docs), labels

    def test_separable_fold_high_accuracy(self):
        corpus, labels = self.separable_fold()
        fold_ids = {f"d{i}" for i in range(20)}
        model = train_feature_lf(corpus, labels, fold_ids, 1, SOURCE_ENTITIES_TA)
        held_out = [f"d{i}" for i in range(20, 40)]
        correct = sum(
            (model.score(corpus[d]) >= 0.5) == (labels[d] == 1) for d in held_out
        )
        assert correct / len(held_out) > 0.95

    def test_degenerate_fold(self):
        corpus, labels = self.separable_fold()
        labels = {d: 1 for d in labels}
        with pytest.raises(LabelerError, match="degenerate fold"):
            train_feature_lf(corpus, labels, {f"d{i}" for i in range(10)}, 1, SOURCE_ENTITIES_TA)

    def test_empty_fold(self):
        corpus, labels = self.separable_fold()
        with pytest.raises(LabelerError, match="empty fold"):
            train_feature_lf(corpus, labels, set(), 1, SOURCE_ENTITIES_TA)

    def test_no_features_predicts_bias(self):
        corpus, labels = self.separable_fold()
        model = train_feature_lf(corpus, labels, {f"d{i}" for i in range(20)}, 1, SOURCE_ENTITIES_TA)
        empty = Document(id="x", title="t")
        expected = 1.0 / (1.0 + math.exp(-model.bias_weight))
        assert model.score(empty) == pytest.approx(expected)

    def test_abstains_on_own_fold(self):
        corpus, labels = self.separable_fold()
        fold_ids = {f"d{i}" for i in range(20)}
        model = train_feature_lf(corpus, labels, fold_ids, 2, SOURCE_ENTITIES_TA)
        splits = SplitAssignment(eval_set=set(), folds=(set(), fold_ids, set()))
        assert apply_feature_lf(model, corpus["d0"], splits) == 0.5
        other = apply_feature_lf(model, corpus["d21"], splits)
        assert 0.0 <= other <= 1.0 and other != 0.5

    def test_zero_weights_predict_half(self):
        model = FeatureModel(weights={}, bias_weight=0.0, trained_on=1, feature_source=SOURCE_ENTITIES_TA)
        doc = Document(id="x", title="t")
        assert model.score(doc) == 0.5

    def test_fulltext_source_abstains_without_fulltext(self):
        model = FeatureModel(weights={}, bias_weight=2.0, trained_on=1, feature_source=SOURCE_ENTITIES_FT)
        splits = SplitAssignment()
        doc = Document(id="x", title="t")
        assert apply_feature_lf(model, doc, splits) == 0.5

    def test_save_load_round_trip(self, tmp_path):
        corpus, labels = self.separable_fold()
        model = train_feature_lf(corpus, labels, {f"d{i}" for i in range(20)}, 3, SOURCE_ENTITIES_TA)
        p = tmp_path / "m.model"
        model.save(p)
        back = FeatureModel.load(p)
        assert back == model


class TestDocFeatures:
    def test_entity_counts(self):
        doc = entity_doc("d", ["E1", "E1", "E2"])
        assert doc_features(doc, SOURCE_ENTITIES_TA) == {"Disease:E1": 2.0, "Disease:E2": 1.0}

    def test_sectioned_counts(self):
        doc = Document(
            id="d", title="t", full_text="x",
            entities=(("Disease", "E1", "e", "methods"), ("Disease", "E1", "e", "results")),
        )
        feats = doc_features(doc, SOURCE_ENTITIES_FT)
        assert feats == {"Disease:E1@methods": 1.0, "Disease:E1@results": 1.0}

    def test_mesh_binary(self):
        doc = Document(id="d", title="t", mesh_terms=frozenset({"M1"}), pub_types=frozenset({"Review"}))
        assert doc_features(doc, SOURCE_MESH) == {"mesh:M1": 1.0, "pubtype:Review": 1.0}


class TestExternalPredictions:
    def test_default_abstain(self, tmp_path):
        p = tmp_path / "ext.csv"
        p.write_text("doc_id,value\nd1,1\n")
        table = load_external_predictions(p)
        assert table == {"d1": 1.0}
        assert table.get("d2", 0.5) == 0.5

    def test_out_of_range(self, tmp_path):
        p = tmp_path / "ext.csv"
        p.write_text("doc_id,value\nd3,1.7\n")
        with pytest.raises(LabelerError, match="row 2"):
            load_external_predictions(p)


class TestBiasLF:
    def test_first_round_prior(self):
        assert bias_lf(None) == 0.029

    def test_ratio(self):
        assert bias_lf(200 / 10000) == pytest.approx(0.02)

    def test_clamped(self):
        assert bias_lf(1.0) == 0.99
        assert bias_lf(0.0) == 0.01


class TestBuildMatrix:
    def test_single_bias(self, rules):
        corpus = Corpus([Document(id="d", title="t")])
        specs = [LabelingFunctionSpec("bias", KIND_BIAS)]
        matrix = build_label_matrix(corpus, specs, LFContext(bias_value=bias_lf(None)))
        assert matrix.values.tolist() == [[0.029]]

    def test_empty_corpus(self, rules):
        specs = [LabelingFunctionSpec("bias", KIND_BIAS)]
        matrix = build_label_matrix(Corpus(), specs, LFContext())
        assert matrix.values.shape == (0, 1)

    def test_grammar_pair_abstain(self, rules):
        corpus = Corpus([Document(id="d", title="Long COVID")])
        specs = [
            LabelingFunctionSpec("g_ta", KIND_GRAMMAR_TA),
            LabelingFunctionSpec("g_ft", KIND_GRAMMAR_FT),
        ]
        matrix = build_label_matrix(corpus, specs, LFContext(rules=rules))
        assert matrix.values.tolist() == [[1.0, 0.5]]

    def test_deterministic(self, rules):
        corpus = Corpus([Document(id=f"d{i}", title="long covid" if i % 2 else "flu") for i in range(10)])
        specs = [
            LabelingFunctionSpec("g_ta", KIND_GRAMMAR_TA),
            LabelingFunctionSpec("bias", KIND_BIAS),
        ]
        a = build_label_matrix(corpus, specs, LFContext(rules=rules))
        b = build_label_matrix(corpus, specs, LFContext(rules=rules))
        assert (a.values == b.values).all()

    def test_spec_invariants(self):
        with pytest.raises(LabelerError):
            LabelingFunctionSpec("bad", KIND_BIAS, fold=1)
        with pytest.raises(LabelerError):
            LabelingFunctionSpec("bad", "feature_model", fold=1)  # missing feature_source
