"""Round management: wires corpus, labeling functions, label model and
selection into a persistent, reproducible pipeline over a work directory.

All state lives in plain files so that two runs from the same config and
inputs are byte-identical.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from . import corpus as corpus_mod
from . import grammar as grammar_mod
from . import label_model
from . import labelers
from . import metrics
from . import selection as selection_mod

PREDICTIONS_HEADER = ["doc_id", "p", "x", "dist", "iqr", "rank", "round"]


class PipelineError(RuntimeError):
    """Raised for missing state or out-of-order pipeline operations."""


@dataclass
class Config:
    threshold: float = 0.7
    batch_size: int = 100
    mask_runs: int = 32
    mask_fraction: float = 0.5
    eval_fraction: float = 0.25
    wilson_z: float = 1.96
    accuracy_clamp_lo: float = 0.05
    accuracy_clamp_hi: float = 0.95
    bias_prior_init: float = 0.029
    seed: int = 0
    workdir: str | None = None
    rules_file: str | None = None
    feature_sources: list[str] = field(
        default_factory=lambda: [
            labelers.SOURCE_ENTITIES_TA,
            labelers.SOURCE_ENTITIES_FT,
            labelers.SOURCE_MESH,
        ]
    )
    # each entry: {"lf_id": ..., "path": ..., "group": ...}
    external_predictions: list[dict] = field(default_factory=list)

    @classmethod
    def from_yaml(cls, path) -> "Config":
        with open(path, encoding="utf-8") as fh:
            raw = yaml.safe_load(fh) or {}
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(raw) - known
        if unknown:
            raise PipelineError(f"unknown config keys: {sorted(unknown)}")
        cfg = cls(**raw)
        if cfg.workdir is None:
            cfg.workdir = str(Path(path).resolve().parent)
        return cfg


def _fmt(x: float) -> str:
    return repr(float(x))


class Engine:
    """Owns one work directory and drives the annotation rounds."""

    def __init__(self, config: Config):
        if config.workdir is None:
            raise PipelineError("config.workdir must be set")
        self.config = config
        self.workdir = Path(config.workdir)
        self.workdir.mkdir(parents=True, exist_ok=True)
        (self.workdir / "models").mkdir(exist_ok=True)
        self._corpus: corpus_mod.Corpus | None = None
        self._store: corpus_mod.AnnotationStore | None = None
        self._rules: grammar_mod.GrammarRuleSet | None = None
        self.advancing = False  # the service returns 503 while set

    # ---- paths -----------------------------------------------------------
    @property
    def corpus_path(self) -> Path:
        return self.workdir / "corpus.jsonl"

    @property
    def annotations_path(self) -> Path:
        return self.workdir / "annotations.csv"

    @property
    def splits_path(self) -> Path:
        return self.workdir / "splits.json"

    @property
    def round_path(self) -> Path:
        return self.workdir / "round.json"

    @property
    def model_state_path(self) -> Path:
        return self.workdir / "model_state.txt"

    @property
    def predictions_path(self) -> Path:
        return self.workdir / "predictions.tsv"

    @property
    def batch_path(self) -> Path:
        return self.workdir / "batch.tsv"

    # ---- shared state ----------------------------------------------------
    @property
    def corpus(self) -> corpus_mod.Corpus:
        if self._corpus is None:
            if not self.corpus_path.exists():
                raise PipelineError("no corpus ingested")
            self._corpus = corpus_mod.ingest_jsonl(self.corpus_path)
        return self._corpus

    @property
    def store(self) -> corpus_mod.AnnotationStore:
        if self._store is None:
            store = corpus_mod.AnnotationStore(self.corpus)
            if self.annotations_path.exists():
                corpus_mod.import_annotations(self.annotations_path, self.corpus, store)
            self._store = store
        return self._store

    @property
    def rules(self) -> grammar_mod.GrammarRuleSet:
        if self._rules is None:
            if self.config.rules_file:
                self._rules = grammar_mod.compile_grammar(self.config.rules_file)
            else:
                self._rules = grammar_mod.default_rules()
        return self._rules

    def round_state(self) -> dict:
        if self.round_path.exists():
            with open(self.round_path, encoding="utf-8") as fh:
                return json.load(fh)
        return {"round": 0, "prev_positive_rate": None, "last_eval": None}

    def _save_round_state(self, state: dict) -> None:
        with open(self.round_path, "w", encoding="utf-8") as fh:
            json.dump(state, fh, sort_keys=True)
            fh.write("\n")

    def splits(self) -> corpus_mod.SplitAssignment | None:
        if not self.splits_path.exists():
            return None
        with open(self.splits_path, encoding="utf-8") as fh:
            return corpus_mod.SplitAssignment.from_json(json.load(fh))

    # ---- pipeline stages ---------------------------------------------------
    def ingest(self, input_path, fmt: str = "jsonl") -> int:
        if fmt == "jsonl":
            corpus = corpus_mod.ingest_jsonl(input_path)
        elif fmt == "tsv":
            corpus = corpus_mod.ingest_litcovid_tsv(input_path)
        else:
            raise PipelineError(f"unknown corpus format: {fmt}")
        corpus_mod.export_jsonl(corpus, self.corpus_path)
        self._corpus = corpus
        self._store = None
        return len(corpus)

    def import_labels(self, path) -> int:
        before = len(self.store.audit)
        corpus_mod.import_annotations(path, self.corpus, self.store)
        corpus_mod.export_annotations(self.store, self.annotations_path)
        return len(self.store.audit) - before

    def add_annotation(self, rec: corpus_mod.AnnotationRecord) -> None:
        self.store.record(rec)
        corpus_mod.export_annotations(self.store, self.annotations_path)

    def split(self) -> corpus_mod.SplitAssignment:
        assignment = corpus_mod.assign_splits(
            self.store,
            seed=self.config.seed,
            previous=self.splits(),
            eval_fraction=self.config.eval_fraction,
        )
        with open(self.splits_path, "w", encoding="utf-8") as fh:
            json.dump(assignment.to_json(), fh, sort_keys=True)
            fh.write("\n")
        return assignment

    def train_lfs(self) -> tuple[list[str], list[str]]:
        """Train fold models for every configured feature source.

        Returns (trained lf_ids, skipped lf_ids). Folds that are empty or
        single-class for a source are skipped rather than fatal: early
        rounds routinely lack coverage for some source.
        """
        splits = self.splits()
        if splits is None:
            return [], []
        labels = self.store.labels()
        trained, skipped = [], []
        for source in self.config.feature_sources:
            for fold in (1, 2, 3):
                lf_id = f"{source}_fold{fold}"
                try:
                    model = labelers.train_feature_lf(
                        self.corpus, labels, splits.folds[fold - 1], fold, source
                    )
                except labelers.LabelerError:
                    skipped.append(lf_id)
                    # stale model files must not survive a failed retrain
                    path = self.workdir / "models" / f"{lf_id}.model"
                    if path.exists():
                        path.unlink()
                    continue
                model.save(self.workdir / "models" / f"{lf_id}.model")
                trained.append(lf_id)
        return trained, skipped

    def _load_models(self) -> dict[str, labelers.FeatureModel]:
        models = {}
        for path in sorted((self.workdir / "models").glob("*.model")):
            models[path.stem] = labelers.FeatureModel.load(path)
        return models

    def lf_specs(self, models: dict[str, labelers.FeatureModel]) -> list[labelers.LabelingFunctionSpec]:
        specs = [
            labelers.LabelingFunctionSpec("grammar_title_abstract", labelers.KIND_GRAMMAR_TA, group="grammar"),
            labelers.LabelingFunctionSpec("grammar_fulltext", labelers.KIND_GRAMMAR_FT, group="grammar"),
        ]
        for ext in self.config.external_predictions:
            specs.append(
                labelers.LabelingFunctionSpec(
                    ext["lf_id"], labelers.KIND_EXTERNAL, group=ext.get("group", "external")
                )
            )
        for lf_id in sorted(models):
            model = models[lf_id]
            specs.append(
                labelers.LabelingFunctionSpec(
                    lf_id,
                    labelers.KIND_FEATURE,
                    fold=model.trained_on,
                    feature_source=model.feature_source,
                    group=model.feature_source,
                )
            )
        specs.append(labelers.LabelingFunctionSpec("bias", labelers.KIND_BIAS, group="bias"))
        return specs

    def lf_groups(self) -> dict[str, set[str]]:
        groups: dict[str, set[str]] = {}
        for spec in self.lf_specs(self._load_models()):
            groups.setdefault(spec.group, set()).add(spec.lf_id)
        return groups

    def build_matrix(self) -> labelers.LabelMatrix:
        models = self._load_models()
        rstate = self.round_state()
        ctx = labelers.LFContext(
            rules=self.rules,
            models=models,
            external={
                ext["lf_id"]: labelers.load_external_predictions(
                    self._resolve_path(ext["path"])
                )
                for ext in self.config.external_predictions
            },
            splits=self.splits() or corpus_mod.SplitAssignment(),
            bias_value=labelers.bias_lf(
                rstate["prev_positive_rate"], self.config.bias_prior_init
            ),
        )
        return labelers.build_label_matrix(self.corpus, self.lf_specs(models), ctx)

    def _resolve_path(self, path: str) -> str:
        p = Path(path)
        return str(p if p.is_absolute() else self.workdir / p)

    def fit(self) -> label_model.ModelState:
        matrix = self.build_matrix()
        acc = label_model.estimate_accuracies(
            matrix.values,
            z=self.config.wilson_z,
            clamp_lo=self.config.accuracy_clamp_lo,
            clamp_hi=self.config.accuracy_clamp_hi,
        )
        scores = label_model.raw_scores(matrix.values, acc)
        # calibrate on training-fold annotations only, keeping eval untouched
        splits = self.splits()
        labels = self.store.labels()
        calib_ids = [
            d for d in matrix.doc_ids
            if d in labels and splits is not None and d not in splits.eval_set
            and splits.fold_of(d) is not None
        ]
        index = {d: i for i, d in enumerate(matrix.doc_ids)}
        calibration = label_model.fit_calibration(
            [scores[index[d]] for d in calib_ids],
            [labels[d] for d in calib_ids],
        )
        state = label_model.ModelState(
            lf_ids=matrix.lf_ids,
            accuracies=acc,
            calibration=calibration,
            n_instances=len(matrix.doc_ids),
            z=self.config.wilson_z,
            clamp_lo=self.config.accuracy_clamp_lo,
            clamp_hi=self.config.accuracy_clamp_hi,
            round=self.round_state()["round"],
        )
        state.save(self.model_state_path)
        return state

    def predict(self) -> list[selection_mod.SelectionCandidate]:
        if not self.model_state_path.exists():
            raise PipelineError("no model state for round")
        state = label_model.ModelState.load(self.model_state_path)
        matrix = self.build_matrix()
        if matrix.lf_ids != state.lf_ids:
            raise PipelineError("label matrix does not match fitted model state; rerun fit")
        scores = label_model.raw_scores(matrix.values, state.accuracies)
        preds = label_model.calibrate(scores, state.calibration)
        iqr = selection_mod.masked_iqr(
            matrix,
            state.accuracies,
            runs=self.config.mask_runs,
            fraction=self.config.mask_fraction,
            seed=[self.config.seed, state.round],
            calibration=state.calibration,
        )
        t = self.config.threshold
        candidates = [
            selection_mod.SelectionCandidate(
                doc_id=doc_id,
                p=float(preds[i]),
                x=float(scores[i]),
                dist=selection_mod.distance_to_threshold(float(preds[i]), t),
                iqr=float(iqr[i]),
            )
            for i, doc_id in enumerate(matrix.doc_ids)
        ]
        self._write_candidates(self.predictions_path, candidates, state.round)
        return candidates

    def _write_candidates(self, path, candidates, round_no: int) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("\t".join(PREDICTIONS_HEADER) + "\n")
            for c in candidates:
                fh.write(
                    f"{c.doc_id}\t{_fmt(c.p)}\t{_fmt(c.x)}\t{_fmt(c.dist)}"
                    f"\t{_fmt(c.iqr)}\t{c.rank}\t{round_no}\n"
                )

    def read_candidates(self, path) -> tuple[list[selection_mod.SelectionCandidate], int]:
        if not Path(path).exists():
            raise PipelineError("no model state for round")
        candidates = []
        round_no = 0
        with open(path, encoding="utf-8") as fh:
            header = fh.readline().rstrip("\n").split("\t")
            if header != PREDICTIONS_HEADER:
                raise PipelineError(f"{path}: unexpected header")
            for line in fh:
                doc_id, p, x, dist, iqr, rank, rnd = line.rstrip("\n").split("\t")
                candidates.append(
                    selection_mod.SelectionCandidate(
                        doc_id=doc_id, p=float(p), x=float(x),
                        dist=float(dist), iqr=float(iqr), rank=int(rank),
                    )
                )
                round_no = int(rnd)
        return candidates, round_no

    def select(self) -> list[selection_mod.SelectionCandidate]:
        candidates, round_no = self.read_candidates(self.predictions_path)
        batch = selection_mod.select_batch(
            candidates, self.config.batch_size, set(self.store.current)
        )
        self._write_candidates(self.batch_path, batch, round_no)
        return batch

    def advance_round(self) -> dict:
        """Close out the current round and produce the next batch."""
        self.advancing = True
        try:
            state = self.round_state()
            state["round"] += 1
            self._save_round_state(state)
            if len(self.store.current) >= 4:
                self.split()
                self.train_lfs()
            self.fit()
            candidates = self.predict()
            t = self.config.threshold
            state["prev_positive_rate"] = float(
                np.mean([1.0 if c.p >= t else 0.0 for c in candidates])
            )
            self._save_round_state(state)
            self.select()
            return state
        finally:
            self.advancing = False

    # ---- evaluation and analytics ---------------------------------------
    def evaluate(self, threshold: float | None = None) -> dict:
        """AUC, sensitivity, specificity on the evaluation split."""
        threshold = self.config.threshold if threshold is None else threshold
        splits = self.splits()
        if splits is None:
            raise PipelineError("no splits assigned")
        candidates, _ = self.read_candidates(self.predictions_path)
        labels = self.store.labels()
        pairs = [(c.p, labels[c.doc_id]) for c in candidates if c.doc_id in splits.eval_set]
        scores = [p for p, _ in pairs]
        truth = [y for _, y in pairs]
        auc = metrics.roc_auc(scores, truth)
        sens, spec = metrics.sensitivity_specificity(scores, truth, threshold)
        result = {"auc": auc, "sensitivity": sens, "specificity": spec}
        state = self.round_state()
        state["last_eval"] = result
        self._save_round_state(state)
        return result

    def ablate(self) -> list[metrics.AblationRow]:
        splits = self.splits()
        if splits is None:
            raise PipelineError("no splits assigned")
        labels = self.store.labels()
        eval_truth = {d: labels[d] for d in splits.eval_set if d in labels}
        matrix = self.build_matrix()
        return metrics.ablate(matrix, self.lf_groups(), eval_truth, z=self.config.wilson_z)

    def term_report(self) -> grammar_mod.TermFrequencyReport:
        return grammar_mod.term_frequency_report(self.corpus, self.rules)

    def enrich(self, feature: str, background_path=None) -> list[metrics.EnrichmentRow]:
        """Enrichment of the predicted-relevant set against a background."""
        candidates, _ = self.read_candidates(self.predictions_path)
        target_ids = {c.doc_id for c in candidates if c.p >= self.config.threshold}
        target = [self.corpus[d] for d in self.corpus.doc_ids if d in target_ids]
        if background_path is not None:
            background = list(corpus_mod.ingest_jsonl(background_path))
        else:
            background = list(self.corpus)
        return metrics.enrichment_report(target, background, feature)
