"""Document corpus, human annotations, and train/eval split management.

Everything downstream (labeling functions, the label model, selection)
reads from the structures defined here. Documents are immutable after
ingestion; annotations are kept as an append-only audit log plus a
"current record per document" view.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np

ANNOTATION_HEADER = ["doc_id", "label", "annotator", "timestamp", "round"]


class CorpusError(ValueError):
    """Raised for malformed or inconsistent corpus/annotation inputs."""


@dataclass(frozen=True)
class Document:
    """One article. ``entities`` holds (type, id, surface, section) tuples."""

    id: str
    title: str
    abstract: str | None = None
    full_text: str | None = None
    sections: tuple[tuple[str, str], ...] | None = None
    mesh_terms: frozenset[str] = frozenset()
    pub_types: frozenset[str] = frozenset()
    entities: tuple[tuple[str, str, str, str], ...] = ()

    def __post_init__(self):
        if not self.id:
            raise CorpusError("document id must be non-empty")
        if self.full_text is not None and self.sections is None:
            # invariant: full text implies at least a "body" section
            object.__setattr__(self, "sections", (("body", self.full_text),))


class Corpus:
    """Ordered, id-unique collection of documents."""

    def __init__(self, documents: list[Document] | None = None):
        self._docs: dict[str, Document] = {}
        for doc in documents or []:
            self.add(doc)

    def add(self, doc: Document) -> None:
        if doc.id in self._docs:
            raise CorpusError(f"duplicate id: {doc.id}")
        self._docs[doc.id] = doc

    def __len__(self) -> int:
        return len(self._docs)

    def __iter__(self):
        return iter(self._docs.values())

    def __contains__(self, doc_id: str) -> bool:
        return doc_id in self._docs

    def __getitem__(self, doc_id: str) -> Document:
        return self._docs[doc_id]

    @property
    def doc_ids(self) -> list[str]:
        return list(self._docs)


def _parse_document(obj: dict, line_no: int) -> Document:
    if not isinstance(obj, dict):
        raise CorpusError(f"line {line_no}: expected an object")
    if "id" not in obj or obj["id"] in (None, ""):
        raise CorpusError(f"line {line_no}: missing id")
    if "title" not in obj or obj["title"] is None:
        raise CorpusError(f"line {line_no}: missing title")
    doc_id = obj["id"]
    if not isinstance(doc_id, str):
        raise CorpusError(f"line {line_no}: id must be a string")
    sections = obj.get("sections")
    if sections is not None:
        sections = tuple((s["name"], s["text"]) for s in sections)
    entities = tuple(
        (e["type"], e["id"], e["text"], e["section"])
        for e in obj.get("entities") or []
    )
    return Document(
        id=doc_id,
        title=obj["title"],
        abstract=obj.get("abstract"),
        full_text=obj.get("full_text"),
        sections=sections,
        mesh_terms=frozenset(obj.get("mesh_terms") or []),
        pub_types=frozenset(obj.get("pub_types") or []),
        entities=entities,
    )


def ingest_jsonl(path) -> Corpus:
    """Load a JSONL corpus; one document object per line."""
    corpus = Corpus()
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"line {line_no}: malformed JSON ({exc.msg})") from exc
            corpus.add(_parse_document(obj, line_no))
    return corpus


def export_jsonl(corpus: Corpus, path) -> None:
    """Write the canonical JSONL form; round-trips through ingest_jsonl."""
    with open(path, "w", encoding="utf-8") as fh:
        for doc in corpus:
            obj = {
                "id": doc.id,
                "title": doc.title,
                "abstract": doc.abstract,
                "full_text": doc.full_text,
                "sections": (
                    None
                    if doc.sections is None
                    else [{"name": n, "text": t} for n, t in doc.sections]
                ),
                "mesh_terms": sorted(doc.mesh_terms),
                "pub_types": sorted(doc.pub_types),
                "entities": [
                    {"type": t, "id": i, "text": s, "section": sec}
                    for t, i, s, sec in doc.entities
                ],
            }
            fh.write(json.dumps(obj, sort_keys=True) + "\n")


def ingest_litcovid_tsv(path) -> Corpus:
    """Adapter for the LitCovid TSV export (pmid, title, ...)."""
    corpus = Corpus()
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            cols = line.split("\t")
            if cols[0].lower() == "pmid":  # header row
                continue
            if len(cols) < 2:
                raise CorpusError(f"line {line_no}: expected at least 2 columns")
            corpus.add(Document(id=cols[0], title=cols[1]))
    return corpus


@dataclass(frozen=True)
class AnnotationRecord:
    doc_id: str
    label: int
    annotator: str
    timestamp: str  # RFC 3339
    round: int


class AnnotationStore:
    """Current relevance judgment per document plus a full audit log.

    Last write wins; every superseded record stays in ``audit``. Skip
    events are tracked separately and never create a record.
    """

    def __init__(self, corpus: Corpus):
        self.corpus = corpus
        self.current: dict[str, AnnotationRecord] = {}
        self.audit: list[AnnotationRecord] = []
        self.skip_log: list[dict] = []

    def record(self, rec: AnnotationRecord) -> None:
        if rec.doc_id not in self.corpus:
            raise CorpusError(f"unknown doc_id: {rec.doc_id}")
        if rec.label not in (0, 1):
            raise CorpusError(f"label must be 0 or 1, got {rec.label!r}")
        self.audit.append(rec)
        self.current[rec.doc_id] = rec

    def log_skip(self, doc_id: str, annotator: str, timestamp: str) -> None:
        self.skip_log.append(
            {"doc_id": doc_id, "annotator": annotator, "timestamp": timestamp}
        )

    def labels(self) -> dict[str, int]:
        return {doc_id: rec.label for doc_id, rec in self.current.items()}

    def __len__(self) -> int:
        return len(self.current)


def import_annotations(path, corpus: Corpus, store: AnnotationStore | None = None) -> AnnotationStore:
    """Read the annotations CSV into a (possibly pre-existing) store."""
    store = store if store is not None else AnnotationStore(corpus)
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ANNOTATION_HEADER:
            raise CorpusError(
                f"bad annotations header: expected {','.join(ANNOTATION_HEADER)}"
            )
        for row_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(ANNOTATION_HEADER):
                raise CorpusError(f"row {row_no}: expected {len(ANNOTATION_HEADER)} columns")
            doc_id, label_s, annotator, timestamp, round_s = row
            if label_s not in ("0", "1"):
                raise CorpusError(f"row {row_no}: label must be 0 or 1, got {label_s!r}")
            store.record(
                AnnotationRecord(
                    doc_id=doc_id,
                    label=int(label_s),
                    annotator=annotator,
                    timestamp=timestamp,
                    round=int(round_s),
                )
            )
    return store


def export_annotations(store: AnnotationStore, path) -> None:
    """Write the full audit log back out in the import CSV format."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(ANNOTATION_HEADER)
        for rec in store.audit:
            writer.writerow([rec.doc_id, rec.label, rec.annotator, rec.timestamp, rec.round])


@dataclass
class SplitAssignment:
    """One evaluation quarter plus three disjoint training folds."""

    eval_set: set[str] = field(default_factory=set)
    folds: tuple[set[str], set[str], set[str]] = field(
        default_factory=lambda: (set(), set(), set())
    )

    def all_ids(self) -> set[str]:
        return self.eval_set | self.folds[0] | self.folds[1] | self.folds[2]

    def fold_of(self, doc_id: str) -> int | None:
        """1-based fold index, 0 for the eval set, None if unassigned."""
        if doc_id in self.eval_set:
            return 0
        for i, fold in enumerate(self.folds, start=1):
            if doc_id in fold:
                return i
        return None

    def to_json(self) -> dict:
        return {
            "eval_set": sorted(self.eval_set),
            "folds": [sorted(f) for f in self.folds],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "SplitAssignment":
        return cls(
            eval_set=set(obj["eval_set"]),
            folds=tuple(set(f) for f in obj["folds"]),
        )


def assign_splits(
    store: AnnotationStore,
    seed: int,
    previous: SplitAssignment | None = None,
    eval_fraction: float = 0.25,
) -> SplitAssignment:
    """Partition annotated documents into eval + 3 folds.

    Deterministic given the seed. Documents assigned in a previous round
    keep their assignment; only newly annotated documents are placed.
    The eval set is topped up toward round(eval_fraction * N); leftovers
    go to whichever fold is currently smallest (ties to the lowest index),
    so fold sizes never differ by more than one.
    """
    annotated = sorted(store.current)
    if len(annotated) < 4:
        raise CorpusError("insufficient annotations")

    result = SplitAssignment()
    if previous is not None:
        result.eval_set = set(previous.eval_set)
        result.folds = tuple(set(f) for f in previous.folds)

    assigned = result.all_ids()
    new_ids = [d for d in annotated if d not in assigned]
    rng = np.random.default_rng(seed)
    order = list(rng.permutation(len(new_ids)))
    new_ids = [new_ids[i] for i in order]

    n_total = len(annotated)
    eval_target = int(np.floor(eval_fraction * n_total + 0.5))
    eval_deficit = max(0, eval_target - len(result.eval_set))
    to_eval, to_folds = new_ids[:eval_deficit], new_ids[eval_deficit:]
    result.eval_set.update(to_eval)
    for doc_id in to_folds:
        sizes = [len(f) for f in result.folds]
        result.folds[int(np.argmin(sizes))].add(doc_id)
    return result
