"""Evaluation metrics and corpus analytics: ROC/AUC, thresholded
sensitivity/specificity, Cohen's kappa, Fisher's exact test, feature
enrichment, and labeling-function ablation."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata

from . import label_model
from .labelers import LabelMatrix


class MetricsError(ValueError):
    """Raised for degenerate metric inputs."""


@dataclass
class ConfusionCounts:
    tp: int
    fp: int
    tn: int
    fn: int


@dataclass
class AgreementTable:
    both_pos: int
    a_pos_b_neg: int
    a_neg_b_pos: int
    both_neg: int

    @property
    def total(self) -> int:
        return self.both_pos + self.a_pos_b_neg + self.a_neg_b_pos + self.both_neg


def roc_auc(scores, truth) -> float:
    """Rank-based (Mann-Whitney) AUC; ties count as half."""
    scores = np.asarray(scores, dtype=float)
    truth = np.asarray(truth, dtype=int)
    if scores.shape != truth.shape:
        raise MetricsError("scores and truth must have the same length")
    n_pos = int(np.sum(truth == 1))
    n_neg = int(np.sum(truth == 0))
    if n_pos == 0 or n_neg == 0:
        raise MetricsError("both classes must be present")
    ranks = rankdata(scores, method="average")
    rank_sum_pos = float(np.sum(ranks[truth == 1]))
    return (rank_sum_pos - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def roc_points(scores, truth) -> list[tuple[float, float, float]]:
    """(fpr, tpr, threshold) points from (0,0) to (1,1), thresholds descending."""
    scores = np.asarray(scores, dtype=float)
    truth = np.asarray(truth, dtype=int)
    n_pos = int(np.sum(truth == 1))
    n_neg = int(np.sum(truth == 0))
    if n_pos == 0 or n_neg == 0:
        raise MetricsError("both classes must be present")
    order = np.argsort(-scores, kind="stable")
    points = [(0.0, 0.0, math.inf)]
    tp = fp = 0
    i = 0
    n = len(scores)
    while i < n:
        thresh = scores[order[i]]
        while i < n and scores[order[i]] == thresh:
            if truth[order[i]] == 1:
                tp += 1
            else:
                fp += 1
            i += 1
        points.append((fp / n_neg, tp / n_pos, float(thresh)))
    return points


def sensitivity_specificity(scores, truth, t: float) -> tuple[float, float]:
    """Predict positive iff score >= t."""
    scores = np.asarray(scores, dtype=float)
    truth = np.asarray(truth, dtype=int)
    n_pos = int(np.sum(truth == 1))
    n_neg = int(np.sum(truth == 0))
    if n_pos == 0 or n_neg == 0:
        raise MetricsError("both classes must be present")
    pred = scores >= t
    tp = int(np.sum(pred & (truth == 1)))
    tn = int(np.sum(~pred & (truth == 0)))
    return tp / n_pos, tn / n_neg


def cohens_kappa(table: AgreementTable) -> float:
    """Chance-corrected inter-annotator agreement."""
    n = table.total
    if n <= 0:
        raise MetricsError("agreement table is empty")
    p_o = (table.both_pos + table.both_neg) / n
    a_pos = (table.both_pos + table.a_pos_b_neg) / n
    b_pos = (table.both_pos + table.a_neg_b_pos) / n
    p_e = a_pos * b_pos + (1.0 - a_pos) * (1.0 - b_pos)
    if p_e == 1.0:
        return 1.0 if p_o == 1.0 else 0.0
    return (p_o - p_e) / (1.0 - p_e)


_LOG_FACT_MAX = 1_000_000
_log_fact_table: np.ndarray | None = None


def _log_fact(n: int) -> float:
    global _log_fact_table
    if _log_fact_table is None or n >= len(_log_fact_table):
        size = min(max(n + 1, 4096), _LOG_FACT_MAX + 1)
        if n + 1 > size:
            raise MetricsError(f"table total too large: {n}")
        with np.errstate(divide="ignore"):
            logs = np.log(np.arange(size, dtype=float))
        logs[0] = 0.0
        _log_fact_table = np.cumsum(logs)
    return float(_log_fact_table[n])


def _log_hypergeom(a: int, row1: int, col1: int, n: int) -> float:
    """Log probability of a 2x2 table with fixed margins and cell (1,1) = a."""
    row2 = n - row1
    col2 = n - col1
    return (
        _log_fact(row1) + _log_fact(row2) + _log_fact(col1) + _log_fact(col2)
        - _log_fact(n)
        - _log_fact(a) - _log_fact(row1 - a) - _log_fact(col1 - a)
        - _log_fact(row2 - col1 + a)
    )


def fisher_exact(table: tuple[int, int, int, int]) -> float:
    """Two-sided Fisher's exact p-value for a 2x2 table (a, b, c, d).

    Probability-mass method: sum over all tables with the observed
    margins whose probability does not exceed the observed table's,
    with a small relative slack for float safety.
    """
    a, b, c, d = table
    if min(a, b, c, d) < 0:
        raise MetricsError("counts must be nonnegative")
    n = a + b + c + d
    if n < 1:
        raise MetricsError("table total must be >= 1")
    row1 = a + b
    col1 = a + c
    if row1 == 0 or col1 == 0 or row1 == n or col1 == n:
        return 1.0  # a fixed margin of zero: only one table possible
    lo = max(0, row1 + col1 - n)
    hi = min(row1, col1)
    log_obs = _log_hypergeom(a, row1, col1, n)
    cutoff = log_obs + math.log1p(1e-7)
    total = 0.0
    for k in range(lo, hi + 1):
        lp = _log_hypergeom(k, row1, col1, n)
        if lp <= cutoff:
            total += math.exp(lp)
    return min(total, 1.0)


@dataclass
class EnrichmentRow:
    feature_id: str
    rate_target: float  # per 1000 documents
    rate_background: float
    p_value: float


def enrichment_report(target_corpus, background_corpus, feature: str) -> list[EnrichmentRow]:
    """Per-feature Fisher's exact comparison of document rates.

    ``feature`` selects entities (by type:id) or mesh_terms. Rates are
    per 1000 documents; rows sorted by p-value then feature id.
    """
    if feature not in ("entities", "mesh_terms"):
        raise MetricsError(f"unknown feature kind: {feature}")

    def doc_feature_set(doc) -> set[str]:
        if feature == "entities":
            return {f"{t}:{i}" for t, i, _, _ in doc.entities}
        return set(doc.mesh_terms)

    def count_docs(corpus) -> tuple[dict[str, int], int]:
        counts: dict[str, int] = {}
        n = 0
        for doc in corpus:
            n += 1
            for fid in doc_feature_set(doc):
                counts[fid] = counts.get(fid, 0) + 1
        return counts, n

    target_counts, n_target = count_docs(target_corpus)
    background_counts, n_background = count_docs(background_corpus)
    if n_target == 0 or n_background == 0:
        raise MetricsError("both corpora must be non-empty")

    rows = []
    for fid in sorted(set(target_counts) | set(background_counts)):
        t_with = target_counts.get(fid, 0)
        b_with = background_counts.get(fid, 0)
        p = fisher_exact((t_with, n_target - t_with, b_with, n_background - b_with))
        rows.append(
            EnrichmentRow(
                feature_id=fid,
                rate_target=1000.0 * t_with / n_target,
                rate_background=1000.0 * b_with / n_background,
                p_value=p,
            )
        )
    rows.sort(key=lambda r: (r.p_value, r.feature_id))
    return rows


@dataclass
class AblationRow:
    group: str
    auc_without: float | None
    delta_from_full: float | None
    ablatable: bool = True


def _eval_auc(matrix: LabelMatrix, eval_truth: dict[str, int], z: float) -> float:
    acc = label_model.estimate_accuracies(matrix.values, z)
    scores = label_model.raw_scores(matrix.values, acc)
    annotated = [i for i, d in enumerate(matrix.doc_ids) if d in eval_truth]
    calib = label_model.fit_calibration(
        scores[annotated], [eval_truth[matrix.doc_ids[i]] for i in annotated]
    )
    preds = label_model.calibrate(scores, calib)
    return roc_auc(
        [preds[i] for i in annotated],
        [eval_truth[matrix.doc_ids[i]] for i in annotated],
    )


def ablate(
    matrix: LabelMatrix,
    groups: dict[str, set[str]],
    eval_truth: dict[str, int],
    z: float = label_model.DEFAULT_Z,
) -> list[AblationRow]:
    """Refit without each group of labeling functions and report the AUC drop."""
    full_auc = _eval_auc(matrix, eval_truth, z)
    rows = []
    for group, lf_ids in sorted(groups.items()):
        remaining = [lf for lf in matrix.lf_ids if lf not in lf_ids]
        if len(remaining) < 3:
            rows.append(AblationRow(group=group, auc_without=None, delta_from_full=None, ablatable=False))
            continue
        sub = matrix.without(lf_ids)
        auc = _eval_auc(sub, eval_truth, z)
        rows.append(AblationRow(group=group, auc_without=auc, delta_from_full=full_auc - auc))
    return rows
