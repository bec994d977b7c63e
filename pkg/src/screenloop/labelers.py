"""Labeling functions: noisy relevance signals over documents.

Every labeling function maps a document to a value in [0, 1], where
exactly 0.5 means abstain. The registry assembles them into a dense
documents x functions matrix for the label model.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .corpus import Corpus, CorpusError, Document, SplitAssignment
from .grammar import GrammarRuleSet, find_mentions

ABSTAIN = 0.5

KIND_GRAMMAR_TA = "grammar_title_abstract"
KIND_GRAMMAR_FT = "grammar_fulltext"
KIND_FEATURE = "feature_model"
KIND_EXTERNAL = "external_predictions"
KIND_BIAS = "bias"

SOURCE_ENTITIES_TA = "entities_title_abstract"
SOURCE_ENTITIES_FT = "entities_fulltext_sectioned"
SOURCE_MESH = "mesh_and_pubtypes"

TITLE_ABSTRACT_SECTIONS = {"title", "abstract"}


class LabelerError(ValueError):
    """Raised for bad labeling-function specs, inputs, or training folds."""


@dataclass(frozen=True)
class LabelingFunctionSpec:
    lf_id: str
    kind: str
    fold: int | None = None
    feature_source: str | None = None
    group: str = ""

    def __post_init__(self):
        if (self.fold is not None) != (self.kind == KIND_FEATURE):
            raise LabelerError(f"{self.lf_id}: fold present iff kind is feature_model")
        if (self.feature_source is not None) != (self.kind == KIND_FEATURE):
            raise LabelerError(
                f"{self.lf_id}: feature_source present iff kind is feature_model"
            )


@dataclass
class LabelMatrix:
    doc_ids: list[str]
    lf_ids: list[str]
    values: np.ndarray  # shape (docs, lfs), all in [0, 1]

    def column(self, lf_id: str) -> np.ndarray:
        return self.values[:, self.lf_ids.index(lf_id)]

    def without(self, drop: set[str]) -> "LabelMatrix":
        keep = [i for i, lf in enumerate(self.lf_ids) if lf not in drop]
        return LabelMatrix(
            doc_ids=self.doc_ids,
            lf_ids=[self.lf_ids[i] for i in keep],
            values=self.values[:, keep],
        )


def sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


def grammar_lf(doc: Document, rules: GrammarRuleSet, scope: str) -> float:
    """Binary mention signal; the full-text variant abstains without full text."""
    if scope == "title_abstract":
        text = doc.title + ("\n" + doc.abstract if doc.abstract else "")
        return 1.0 if find_mentions(text, rules) else 0.0
    if scope == "full_text":
        if not doc.full_text:
            return ABSTAIN
        return 1.0 if find_mentions(doc.full_text, rules) else 0.0
    raise LabelerError(f"unknown grammar scope: {scope}")


def doc_features(doc: Document, feature_source: str) -> dict[str, float]:
    """Feature vector for one document under the given source."""
    feats: dict[str, float] = {}
    if feature_source == SOURCE_ENTITIES_TA:
        for etype, eid, _, section in doc.entities:
            if section in TITLE_ABSTRACT_SECTIONS:
                key = f"{etype}:{eid}"
                feats[key] = feats.get(key, 0.0) + 1.0
    elif feature_source == SOURCE_ENTITIES_FT:
        for etype, eid, _, section in doc.entities:
            key = f"{etype}:{eid}@{section}"
            feats[key] = feats.get(key, 0.0) + 1.0
    elif feature_source == SOURCE_MESH:
        for term in doc.mesh_terms:
            feats[f"mesh:{term}"] = 1.0
        for ptype in doc.pub_types:
            feats[f"pubtype:{ptype}"] = 1.0
    else:
        raise LabelerError(f"unknown feature_source: {feature_source}")
    return feats


@dataclass
class FeatureModel:
    """L2-regularized logistic regression over exact string feature ids."""

    weights: dict[str, float]
    bias_weight: float
    trained_on: int
    feature_source: str

    def score(self, doc: Document) -> float:
        feats = doc_features(doc, self.feature_source)
        z = self.bias_weight
        for key, value in feats.items():
            w = self.weights.get(key)
            if w is not None:
                z += w * value
        return float(sigmoid(z))

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("screenloop-feature-model v1\n")
            fh.write(f"fold\t{self.trained_on}\n")
            fh.write(f"feature_source\t{self.feature_source}\n")
            fh.write(f"hyperparameters\t{TRAIN_HYPERPARAMS}\n")
            fh.write(f"bias\t{self.bias_weight!r}\n")
            for key in sorted(self.weights):
                fh.write(f"w\t{key}\t{self.weights[key]!r}\n")

    @classmethod
    def load(cls, path) -> "FeatureModel":
        with open(path, encoding="utf-8") as fh:
            header = fh.readline().strip()
            if header != "screenloop-feature-model v1":
                raise LabelerError(f"{path}: not a feature model file")
            fold = None
            source = None
            bias = 0.0
            weights: dict[str, float] = {}
            for line in fh:
                parts = line.rstrip("\n").split("\t")
                if parts[0] == "fold":
                    fold = int(parts[1])
                elif parts[0] == "feature_source":
                    source = parts[1]
                elif parts[0] == "bias":
                    bias = float(parts[1])
                elif parts[0] == "w":
                    weights[parts[1]] = float(parts[2])
        if fold is None or source is None:
            raise LabelerError(f"{path}: incomplete feature model file")
        return cls(weights=weights, bias_weight=bias, trained_on=fold, feature_source=source)


TRAIN_EPOCHS = 200
TRAIN_LR = 0.1
TRAIN_LR_DECAY = 0.9
TRAIN_LR_DECAY_EVERY = 20
TRAIN_L2 = 1e-4
TRAIN_HYPERPARAMS = (
    f"epochs={TRAIN_EPOCHS},lr={TRAIN_LR},decay={TRAIN_LR_DECAY}"
    f"/{TRAIN_LR_DECAY_EVERY},l2={TRAIN_L2}"
)


def train_feature_lf(
    corpus: Corpus,
    labels: dict[str, int],
    fold_ids: set[str],
    fold: int,
    feature_source: str,
) -> FeatureModel:
    """Fit a logistic regression on one training fold's annotated documents.

    Full-batch gradient descent with zero initialization; deterministic.
    The full-text source trains only on documents that have full text.
    """
    docs = [corpus[d] for d in sorted(fold_ids) if d in labels]
    if feature_source == SOURCE_ENTITIES_FT:
        docs = [d for d in docs if d.full_text]
    if not docs:
        raise LabelerError("empty fold")
    y = np.array([labels[d.id] for d in docs], dtype=float)
    if y.min() == y.max():
        raise LabelerError("degenerate fold")

    vocab = sorted({k for d in docs for k in doc_features(d, feature_source)})
    index = {k: i for i, k in enumerate(vocab)}
    X = np.zeros((len(docs), len(vocab)))
    for row, d in enumerate(docs):
        for key, value in doc_features(d, feature_source).items():
            X[row, index[key]] = value

    w = np.zeros(len(vocab))
    b = 0.0
    n = len(docs)
    lr = TRAIN_LR
    for epoch in range(TRAIN_EPOCHS):
        if epoch > 0 and epoch % TRAIN_LR_DECAY_EVERY == 0:
            lr *= TRAIN_LR_DECAY
        p = sigmoid(X @ w + b)
        err = p - y
        grad_w = X.T @ err / n + TRAIN_L2 * w
        grad_b = float(np.mean(err))
        w -= lr * grad_w
        b -= lr * grad_b

    return FeatureModel(
        weights={k: float(w[index[k]]) for k in vocab},
        bias_weight=float(b),
        trained_on=fold,
        feature_source=feature_source,
    )


def apply_feature_lf(model: FeatureModel, doc: Document, splits: SplitAssignment) -> float:
    """Probabilistic label; abstains on the model's own training fold."""
    if splits.fold_of(doc.id) == model.trained_on:
        return ABSTAIN
    if model.feature_source == SOURCE_ENTITIES_FT and not doc.full_text:
        return ABSTAIN
    return model.score(doc)


def load_external_predictions(path) -> dict[str, float]:
    """CSV of doc_id,value; documents not listed default to abstain."""
    out: dict[str, float] = {}
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["doc_id", "value"]:
            raise LabelerError("external predictions file must have header doc_id,value")
        for row_no, row in enumerate(reader, start=2):
            if not row:
                continue
            doc_id, value_s = row[0], row[1]
            value = float(value_s)
            if not 0.0 <= value <= 1.0:
                raise LabelerError(f"row {row_no}: value out of range [0,1]: {value_s}")
            out[doc_id] = value
    return out


def bias_lf(prev_round_positive_rate: float | None, initial_prior: float = 0.029) -> float:
    """Uniform 'probably negative' prior; clamped to keep log-odds finite."""
    if prev_round_positive_rate is None:
        return initial_prior
    return float(np.clip(prev_round_positive_rate, 0.01, 0.99))


@dataclass
class LFContext:
    """Everything needed to resolve a spec to a per-document evaluator."""

    rules: GrammarRuleSet | None = None
    models: dict[str, FeatureModel] = field(default_factory=dict)
    external: dict[str, dict[str, float]] = field(default_factory=dict)
    splits: SplitAssignment | None = None
    bias_value: float = 0.029


def build_label_matrix(
    corpus: Corpus,
    specs: list[LabelingFunctionSpec],
    ctx: LFContext,
) -> LabelMatrix:
    """Evaluate every labeling function on every document."""
    doc_list = list(corpus)
    values = np.empty((len(doc_list), len(specs)))
    for col, spec in enumerate(specs):
        if spec.kind == KIND_GRAMMAR_TA:
            if ctx.rules is None:
                raise LabelerError(f"{spec.lf_id}: no grammar rules available")
            values[:, col] = [grammar_lf(d, ctx.rules, "title_abstract") for d in doc_list]
        elif spec.kind == KIND_GRAMMAR_FT:
            if ctx.rules is None:
                raise LabelerError(f"{spec.lf_id}: no grammar rules available")
            values[:, col] = [grammar_lf(d, ctx.rules, "full_text") for d in doc_list]
        elif spec.kind == KIND_FEATURE:
            model = ctx.models.get(spec.lf_id)
            if model is None or ctx.splits is None:
                raise LabelerError(f"{spec.lf_id}: no trained model available")
            values[:, col] = [apply_feature_lf(model, d, ctx.splits) for d in doc_list]
        elif spec.kind == KIND_EXTERNAL:
            table = ctx.external.get(spec.lf_id)
            if table is None:
                raise LabelerError(f"{spec.lf_id}: no external predictions loaded")
            values[:, col] = [table.get(d.id, ABSTAIN) for d in doc_list]
        elif spec.kind == KIND_BIAS:
            values[:, col] = ctx.bias_value
        else:
            raise LabelerError(f"{spec.lf_id}: unknown kind {spec.kind}")
    if values.size and (values.min() < 0.0 or values.max() > 1.0):
        raise LabelerError("label matrix cell out of [0,1]")
    return LabelMatrix(doc_ids=[d.id for d in doc_list], lf_ids=[s.lf_id for s in specs], values=values)
