"""Three rounds of the human-in-the-loop annotation cycle, end to end.

A synthetic 5,000-document corpus stands in for the real collection and
a scripted oracle stands in for the human annotator. Each round: the
model scores everything, uncertainty sampling picks a batch, the oracle
labels it, and the loop retrains its fold models and refits.

Run:  python3 demos/annotation_loop_demo.py
"""
import tempfile
from pathlib import Path

import numpy as np

from screenloop.corpus import AnnotationRecord, export_jsonl
from screenloop.metrics import roc_auc
from screenloop.pipeline import Config, Engine
from screenloop.synthetic import synthetic_corpus, write_external_predictions

root = Path(tempfile.mkdtemp(prefix="screenloop-demo-"))
print("work directory:", root)

corpus, truth = synthetic_corpus(5_000, seed=11)
export_jsonl(corpus, root / "corpus_input.jsonl")
write_external_predictions(
    root / "classifier.csv", truth, accuracy=0.75, seed=12, continuous=True
)

config = Config(
    workdir=str(root / "work"),
    batch_size=100,
    mask_runs=16,
    seed=11,
    feature_sources=["entities_title_abstract", "mesh_and_pubtypes"],
    external_predictions=[
        {"lf_id": "pretrained_classifier", "path": str(root / "classifier.csv")}
    ],
)
engine = Engine(config)
engine.ingest(root / "corpus_input.jsonl")


def oracle_label(doc_ids, round_no):
    for doc_id in doc_ids:
        engine.add_annotation(
            AnnotationRecord(
                doc_id=doc_id,
                label=truth[doc_id],
                annotator="oracle",
                timestamp="2026-01-01T00:00:00Z",
                round=round_no,
            )
        )


def corpus_auc():
    candidates, _ = engine.read_candidates(engine.predictions_path)
    return roc_auc([c.p for c in candidates], [truth[c.doc_id] for c in candidates])


# Seed the loop the way a real project starts: a small randomly sampled
# set labeled up front, before any model exists.
rng = np.random.default_rng(13)
oracle_label(list(rng.choice(corpus.doc_ids, size=100, replace=False)), 0)

# Round 0: untrained labeling functions only (grammar, external, bias).
engine.fit()
engine.predict()
engine.select()
print("round 0 (untrained LFs): AUC %.4f" % corpus_auc())

for round_no in range(1, 4):
    batch, _ = engine.read_candidates(engine.batch_path)
    oracle_label([c.doc_id for c in batch], round_no - 1)
    engine.advance_round()
    print(
        "round %d: AUC %.4f  (%d annotations total)"
        % (round_no, corpus_auc(), len(engine.store.current))
    )

result = engine.evaluate()
print()
print("held-out eval split: auc=%.3f sens=%.3f spec=%.3f"
      % (result["auc"], result["sensitivity"], result["specificity"]))

print()
print("labeling-function groups and their ablation cost:")
for row in engine.ablate():
    if row.ablatable:
        print("  without %-25s AUC %.4f (delta %+.4f)"
              % (row.group, row.auc_without, row.delta_from_full))
    else:
        print("  without %-25s not ablatable (too few LFs left)" % row.group)
