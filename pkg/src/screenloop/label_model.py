"""Generative label model: triplet accuracy estimation and calibration.

Accuracies are estimated in closed form from pairwise agreement rates,
with Wilson-interval filtering of pairs whose agreement may be chance.
Predictions are accuracy-weighted log-odds sums, optionally recalibrated
against the score moments of human-annotated positives and negatives.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

ACC_CLAMP_LO = 0.05
ACC_CLAMP_HI = 0.95
DEFAULT_Z = 1.96
SIGMA_FLOOR = 1e-6


class LabelModelError(ValueError):
    """Raised for inputs the label model cannot work with."""


def equal_prob(a: float, b: float) -> float:
    """Expected +/-1 agreement of two probabilistic labels.

    Equals the binary match indicator on {0,1} inputs; zero whenever
    either side abstains (0.5).
    """
    return (2.0 * a - 1.0) * (2.0 * b - 1.0)


def agree(col_i: np.ndarray, col_j: np.ndarray) -> float:
    """Mean expected agreement of two label columns."""
    col_i = np.asarray(col_i, dtype=float)
    col_j = np.asarray(col_j, dtype=float)
    if col_i.shape != col_j.shape or col_i.size == 0:
        raise LabelModelError("agree requires equal-length, non-empty columns")
    return float(np.mean((2.0 * col_i - 1.0) * (2.0 * col_j - 1.0)))


def wilson_interval(p_hat: float, n: int, z: float = DEFAULT_Z) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if n < 1:
        raise LabelModelError("wilson_interval requires n >= 1")
    z2 = z * z
    denom = 1.0 + z2 / n
    center = (p_hat + z2 / (2.0 * n)) / denom
    half = (z / denom) * math.sqrt(p_hat * (1.0 - p_hat) / n + z2 / (4.0 * n * n))
    return (center - half, center + half)


@dataclass
class AgreementStats:
    agreements: np.ndarray  # symmetric (m, m), entries in [-1, 1]
    n_instances: int
    admissible_pairs: set[tuple[int, int]] = field(default_factory=set)


def pairwise_agreements(values: np.ndarray) -> AgreementStats:
    """Full agreement matrix for a label matrix (docs x lfs)."""
    values = np.asarray(values, dtype=float)
    n, m = values.shape
    if n == 0:
        raise LabelModelError("empty label matrix")
    signed = 2.0 * values - 1.0
    agreements = signed.T @ signed / n
    return AgreementStats(agreements=agreements, n_instances=n)


def filter_pairs(stats: AgreementStats, z: float = DEFAULT_Z) -> set[tuple[int, int]]:
    """Pairs whose agreement is distinguishable from chance.

    Agreement in [-1, 1] maps to a binomial success proportion
    (agree + 1) / 2 over n_instances trials; a pair is admissible when
    the Wilson interval around that proportion excludes 0.5.
    """
    m = stats.agreements.shape[0]
    admissible: set[tuple[int, int]] = set()
    for i in range(m):
        for j in range(i + 1, m):
            p_hat = (stats.agreements[i, j] + 1.0) / 2.0
            p_hat = min(max(p_hat, 0.0), 1.0)
            lo, hi = wilson_interval(p_hat, stats.n_instances, z)
            if lo > 0.5 or hi < 0.5:
                admissible.add((i, j))
    stats.admissible_pairs = admissible
    return admissible


@dataclass
class AccuracyVector:
    accuracies: np.ndarray  # per-LF, clamped to [clamp_lo, clamp_hi]
    support: np.ndarray  # per-LF count of contributing triplets

    @property
    def log_odds(self) -> np.ndarray:
        return np.log(self.accuracies / (1.0 - self.accuracies))


def estimate_accuracies(
    values: np.ndarray,
    z: float = DEFAULT_Z,
    clamp_lo: float = ACC_CLAMP_LO,
    clamp_hi: float = ACC_CLAMP_HI,
) -> AccuracyVector:
    """Triplet-based closed-form accuracy estimate for every labeling function.

    For LF i, each pair (j, k) with all three pairwise agreements
    admissible, agree(j, k) nonzero, and a nonnegative square-root
    argument contributes one estimate; the final value is their mean.
    LFs with no usable triplet default to 0.5.
    """
    values = np.asarray(values, dtype=float)
    if values.ndim != 2 or values.shape[1] < 3:
        raise LabelModelError("need at least three labeling functions")
    stats = pairwise_agreements(values)
    admissible = filter_pairs(stats, z)
    A = stats.agreements
    m = values.shape[1]

    def ok(i: int, j: int) -> bool:
        return (min(i, j), max(i, j)) in admissible

    accuracies = np.full(m, 0.5)
    support = np.zeros(m, dtype=int)
    for i in range(m):
        estimates = []
        for j in range(m):
            if j == i:
                continue
            for k in range(j + 1, m):
                if k == i:
                    continue
                if not (ok(i, j) and ok(i, k) and ok(j, k)):
                    continue
                if A[j, k] == 0.0:
                    continue
                arg = A[i, j] * A[i, k] / A[j, k]
                if arg < 0.0:
                    continue
                estimates.append(0.5 * math.sqrt(arg) + 0.5)
        if estimates:
            accuracies[i] = float(np.mean(estimates))
            support[i] = len(estimates)
    accuracies = np.clip(accuracies, clamp_lo, clamp_hi)
    return AccuracyVector(accuracies=accuracies, support=support)


def raw_score(row: np.ndarray, acc: AccuracyVector) -> float:
    """Accuracy-weighted log-odds sum; abstains contribute exactly zero."""
    row = np.asarray(row, dtype=float)
    if row.shape[0] != acc.accuracies.shape[0]:
        raise LabelModelError("row length must equal accuracy vector length")
    return float((2.0 * row - 1.0) @ acc.log_odds)


def raw_scores(values: np.ndarray, acc: AccuracyVector) -> np.ndarray:
    """Vectorized raw_score over a label matrix."""
    return (2.0 * np.asarray(values, dtype=float) - 1.0) @ acc.log_odds


def predict(row: np.ndarray, acc: AccuracyVector) -> float:
    """Sigmoid of the raw score."""
    return float(1.0 / (1.0 + math.exp(-raw_score(row, acc))))


@dataclass
class CalibrationParams:
    mu_pos: float = 0.0
    sigma_pos: float = 1.0
    mu_neg: float = 0.0
    sigma_neg: float = 1.0
    enabled: bool = False


def fit_calibration(scores, labels) -> CalibrationParams:
    """Fit the two-Gaussian score moments from annotated documents.

    Requires at least two examples of each class; otherwise calibration
    stays disabled and predictions fall back to the plain sigmoid.
    """
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels, dtype=int)
    pos = scores[labels == 1]
    neg = scores[labels == 0]
    if len(pos) < 2 or len(neg) < 2:
        return CalibrationParams(enabled=False)
    return CalibrationParams(
        mu_pos=float(np.mean(pos)),
        sigma_pos=max(float(np.std(pos)), SIGMA_FLOOR),
        mu_neg=float(np.mean(neg)),
        sigma_neg=max(float(np.std(neg)), SIGMA_FLOOR),
        enabled=True,
    )


def calibrate(x, params: CalibrationParams):
    """Recalibrated probability for raw score(s) x.

    Two-Gaussian likelihood ratio with equal class weights when enabled;
    identity (sigmoid) when disabled. Accepts scalars or arrays.
    """
    x = np.asarray(x, dtype=float)
    if not params.enabled:
        out = 1.0 / (1.0 + np.exp(-x))
    else:
        # work with log densities for numerical stability
        log_pos = -0.5 * ((x - params.mu_pos) / params.sigma_pos) ** 2 - math.log(params.sigma_pos)
        log_neg = -0.5 * ((x - params.mu_neg) / params.sigma_neg) ** 2 - math.log(params.sigma_neg)
        out = 1.0 / (1.0 + np.exp(log_neg - log_pos))
    return float(out) if out.ndim == 0 else out


@dataclass
class ModelState:
    """Everything needed to reproduce predictions exactly."""

    lf_ids: list[str]
    accuracies: AccuracyVector
    calibration: CalibrationParams
    n_instances: int
    z: float
    clamp_lo: float
    clamp_hi: float
    round: int

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("screenloop-model-state v1\n")
            fh.write(f"round\t{self.round}\n")
            fh.write(f"n_instances\t{self.n_instances}\n")
            fh.write(f"z\t{self.z!r}\n")
            fh.write(f"clamp\t{self.clamp_lo!r}\t{self.clamp_hi!r}\n")
            c = self.calibration
            fh.write(
                "calibration\t"
                f"{int(c.enabled)}\t{c.mu_pos!r}\t{c.sigma_pos!r}\t{c.mu_neg!r}\t{c.sigma_neg!r}\n"
            )
            for lf_id, a, s in zip(
                self.lf_ids, self.accuracies.accuracies, self.accuracies.support
            ):
                fh.write(f"lf\t{lf_id}\t{float(a)!r}\t{int(s)}\n")

    @classmethod
    def load(cls, path) -> "ModelState":
        with open(path, encoding="utf-8") as fh:
            header = fh.readline().strip()
            if header != "screenloop-model-state v1":
                raise LabelModelError(f"{path}: not a model state file")
            fields: dict[str, list[str]] = {}
            lfs: list[tuple[str, float, int]] = []
            for line in fh:
                parts = line.rstrip("\n").split("\t")
                if parts[0] == "lf":
                    lfs.append((parts[1], float(parts[2]), int(parts[3])))
                else:
                    fields[parts[0]] = parts[1:]
        calib = fields["calibration"]
        return cls(
            lf_ids=[lf_id for lf_id, _, _ in lfs],
            accuracies=AccuracyVector(
                accuracies=np.array([a for _, a, _ in lfs]),
                support=np.array([s for _, _, s in lfs], dtype=int),
            ),
            calibration=CalibrationParams(
                enabled=bool(int(calib[0])),
                mu_pos=float(calib[1]),
                sigma_pos=float(calib[2]),
                mu_neg=float(calib[3]),
                sigma_neg=float(calib[4]),
            ),
            n_instances=int(fields["n_instances"][0]),
            z=float(fields["z"][0]),
            clamp_lo=float(fields["clamp"][0]),
            clamp_hi=float(fields["clamp"][1]),
            round=int(fields["round"][0]),
        )
