"""Synthetic data generators for validation and the demo scripts.

Two generators: a planted-accuracy label matrix (known ground truth,
conditionally independent labeling functions) and a small synthetic
document corpus for exercising the full annotation loop end to end.
"""
from __future__ import annotations

import csv

import numpy as np

from .corpus import Corpus, Document


def planted_label_matrix(
    n_docs: int,
    accuracies: list[float],
    class_prior: float,
    seed: int,
) -> tuple[np.ndarray, np.ndarray]:
    """Binary label matrix from conditionally independent labeling functions.

    Each LF reports the true label with its planted probability,
    independently given the class. Returns (values, truth).
    """
    rng = np.random.default_rng(seed)
    truth = (rng.random(n_docs) < class_prior).astype(float)
    values = np.empty((n_docs, len(accuracies)))
    for j, a in enumerate(accuracies):
        correct = rng.random(n_docs) < a
        values[:, j] = np.where(correct, truth, 1.0 - truth)
    return values, truth


# entity pools for the synthetic corpus; positives draw from both,
# negatives only from the background pool
_SIGNAL_ENTITIES = [("Disease", f"D{i:03d}") for i in range(12)]
_BACKGROUND_ENTITIES = [("Disease", f"B{i:03d}") for i in range(40)]
_SIGNAL_MESH = [f"M{i:03d}" for i in range(8)]
_BACKGROUND_MESH = [f"N{i:03d}" for i in range(30)]

_NAMED_PHRASES = [
    "long COVID",
    "post-acute sequelae of SARS-CoV-2 infection",
    "post COVID syndrome",
    "long-haul COVID",
]
_NEUTRAL_TITLES = [
    "clinical management of viral pneumonia",
    "vaccination outcomes in a regional cohort",
    "hospital resource utilization during the pandemic",
    "diagnostic imaging in respiratory infection",
]
# an irrelevant title that still trips the grammar, so the grammar
# labeling function has a realistic false-positive stratum
_CONFUSER_TITLE = "investigating how long COVID-19 survives on common surfaces"


def synthetic_corpus(
    n_docs: int,
    seed: int,
    relevance_prior: float = 0.15,
    mention_rate: float = 0.35,
    confuser_rate: float = 0.10,
    leak_rate: float = 0.25,
) -> tuple[Corpus, dict[str, int]]:
    """Corpus with planted relevance labels.

    Relevant documents sometimes name the target concept, carry enriched
    entities and subject headings, and otherwise look like background
    documents. Returns (corpus, truth by doc id).
    """
    rng = np.random.default_rng(seed)
    docs = []
    truth: dict[str, int] = {}
    for i in range(n_docs):
        doc_id = f"d{i:06d}"
        relevant = rng.random() < relevance_prior
        truth[doc_id] = int(relevant)

        if relevant and rng.random() < mention_rate:
            phrase = _NAMED_PHRASES[rng.integers(len(_NAMED_PHRASES))]
            title = f"persistent outcomes study of {phrase} in adults"
        elif not relevant and rng.random() < confuser_rate:
            title = _CONFUSER_TITLE
        else:
            title = _NEUTRAL_TITLES[rng.integers(len(_NEUTRAL_TITLES))]

        entities = []
        if relevant:
            for _ in range(rng.integers(2, 5)):
                etype, eid = _SIGNAL_ENTITIES[rng.integers(len(_SIGNAL_ENTITIES))]
                entities.append((etype, eid, eid, "abstract"))
        elif rng.random() < leak_rate:
            # correlated entities also show up in irrelevant articles
            etype, eid = _SIGNAL_ENTITIES[rng.integers(len(_SIGNAL_ENTITIES))]
            entities.append((etype, eid, eid, "abstract"))
        for _ in range(rng.integers(1, 4)):
            etype, eid = _BACKGROUND_ENTITIES[rng.integers(len(_BACKGROUND_ENTITIES))]
            entities.append((etype, eid, eid, "abstract"))

        mesh = set()
        if relevant:
            for _ in range(rng.integers(1, 3)):
                mesh.add(_SIGNAL_MESH[rng.integers(len(_SIGNAL_MESH))])
        elif rng.random() < leak_rate:
            mesh.add(_SIGNAL_MESH[rng.integers(len(_SIGNAL_MESH))])
        for _ in range(rng.integers(1, 3)):
            mesh.add(_BACKGROUND_MESH[rng.integers(len(_BACKGROUND_MESH))])

        docs.append(
            Document(
                id=doc_id,
                title=title,
                abstract="a study of patient outcomes",
                mesh_terms=frozenset(mesh),
                pub_types=frozenset({"Journal Article"}),
                entities=tuple(entities),
            )
        )
    return Corpus(docs), truth


def write_external_predictions(
    path,
    truth: dict[str, int],
    accuracy: float,
    seed: int,
    continuous: bool = False,
) -> None:
    """Noisy external signal: the truth flipped with prob 1 - accuracy.

    With ``continuous=True`` the (possibly flipped) vote is smeared
    uniformly over its half of [0, 1], imitating a classifier score
    rather than a hard decision.
    """
    rng = np.random.default_rng(seed)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["doc_id", "value"])
        for doc_id in sorted(truth):
            vote = truth[doc_id] if rng.random() < accuracy else 1 - truth[doc_id]
            if continuous:
                u = rng.random()
                value = 0.5 + 0.5 * u if vote else 0.5 * u
            else:
                value = vote
            writer.writerow([doc_id, value])
