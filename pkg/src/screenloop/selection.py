"""Uncertainty sampling: distance to threshold, masked-ensemble IQR,
and rank-sum batch selection."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata

from .label_model import AccuracyVector, CalibrationParams, calibrate, raw_scores
from .labelers import LabelMatrix

ABSTAIN = 0.5


class SelectionError(ValueError):
    """Raised for invalid selection parameters."""


@dataclass
class SelectionCandidate:
    doc_id: str
    p: float
    x: float
    dist: float
    iqr: float
    rank: int = 0


def distance_to_threshold(p: float, t: float) -> float:
    return abs(p - t)


def masked_iqr(
    matrix: LabelMatrix,
    acc: AccuracyVector,
    runs: int,
    fraction: float,
    seed: int,
    calibration: CalibrationParams | None = None,
) -> np.ndarray:
    """Prediction spread under repeated random masking of labeling functions.

    Each run keeps ceil((1 - fraction) * m) uniformly chosen columns and
    treats the rest as abstain (zero log-odds, identical to removal).
    Returns per-document Q3 - Q1 of the run predictions. Deterministic
    given the seed; run r uses an RNG derived from (seed, r).
    """
    if runs < 2:
        raise SelectionError("masked_iqr requires runs >= 2")
    m = matrix.values.shape[1]
    if m < 2:
        raise SelectionError("masked_iqr requires at least 2 labeling functions")
    if not 0.0 < fraction < 1.0:
        raise SelectionError("mask fraction must be in (0, 1)")
    calibration = calibration or CalibrationParams(enabled=False)
    keep = math.ceil((1.0 - fraction) * m)
    base = list(seed) if isinstance(seed, (list, tuple)) else [seed]
    preds = np.empty((runs, matrix.values.shape[0]))
    for r in range(runs):
        rng = np.random.default_rng([*base, r])
        kept = rng.choice(m, size=keep, replace=False)
        masked = np.full_like(matrix.values, ABSTAIN)
        masked[:, kept] = matrix.values[:, kept]
        preds[r] = calibrate(raw_scores(masked, acc), calibration)
    q1 = np.quantile(preds, 0.25, axis=0, method="linear")
    q3 = np.quantile(preds, 0.75, axis=0, method="linear")
    return q3 - q1


def select_batch(
    candidates: list[SelectionCandidate],
    batch_size: int,
    already_annotated: set[str],
) -> list[SelectionCandidate]:
    """Rank-sum selection: minimize dist and maximize iqr simultaneously.

    Each eligible candidate scores rank(dist ascending) + rank(iqr
    descending), with average ranks for ties; lowest rank-sum wins and
    remaining ties break by doc_id. Returns at most batch_size
    candidates with rank fields set 1..k.
    """
    if batch_size < 1:
        raise SelectionError("batch_size must be >= 1")
    eligible = [c for c in candidates if c.doc_id not in already_annotated]
    if not eligible:
        return []
    dist_ranks = rankdata([c.dist for c in eligible], method="average")
    iqr_ranks = rankdata([-c.iqr for c in eligible], method="average")
    rank_sums = dist_ranks + iqr_ranks
    order = sorted(range(len(eligible)), key=lambda i: (rank_sums[i], eligible[i].doc_id))
    batch = []
    for rank, idx in enumerate(order[:batch_size], start=1):
        cand = eligible[idx]
        cand.rank = rank
        batch.append(cand)
    return batch
