"""Anomaly scores and evaluation metrics.

The anomaly score of a sample is its negative log-likelihood under the
model; ranking quality is summarized by the AUCROC (the probability that
a random anomaly outscores a random regular sample, ties counted half)
and operating points by the threshold where true-positive and
true-negative rates meet.
"""

from __future__ import annotations

import logging

import numpy as np

from .errors import DataError

logger = logging.getLogger(__name__)

__all__ = ["score_samples", "auc_roc", "eer_threshold", "histogram_mi", "histogram_bin_count"]


def score_samples(model, encoded: np.ndarray) -> np.ndarray:
    """Per-sample NLL scores; higher means more anomalous.

    Samples with exactly zero amplitude would score infinite; they are
    mapped to one more than the largest finite score so downstream metrics
    stay finite while those samples still rank as the most anomalous.
    """
    log_abs, _ = model.log_amplitudes(np.asarray(encoded, dtype=np.float64))
    scores = -2.0 * log_abs
    infinite = ~np.isfinite(scores)
    if infinite.any():
        finite_max = scores[~infinite].max() if (~infinite).any() else 0.0
        scores = np.where(infinite, finite_max + 1.0, scores)
        logger.warning("score_samples: %d zero-amplitude samples pinned above the rest",
                       int(infinite.sum()))
    return scores


def _check_two_classes(labels: np.ndarray) -> np.ndarray:
    labels = np.asarray(labels, dtype=bool)
    if labels.all() or not labels.any():
        raise DataError("both classes must be present")
    return labels


def auc_roc(scores, labels) -> float:
    """Probability that a random anomaly outscores a random regular sample.

    Mann-Whitney formulation with ties counted one half, computed exactly
    by rank counting (no floating summation over pairs).
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = _check_two_classes(labels)
    if scores.shape != labels.shape:
        raise DataError("scores and labels must have equal length")
    regular = np.sort(scores[~labels])
    anomalies = scores[labels]
    below = np.searchsorted(regular, anomalies, side="left")
    below_or_equal = np.searchsorted(regular, anomalies, side="right")
    concordant_halves = 2 * below.sum() + (below_or_equal - below).sum()
    return float(concordant_halves) / (2.0 * len(anomalies) * len(regular))


def eer_threshold(scores, labels) -> tuple[float, float, float]:
    """Operating point where true-positive and true-negative rates meet.

    Scans the finite score grid for the threshold minimizing |TPR - TNR|
    (classify anomalous when score >= threshold); ties prefer higher TPR,
    then the lower threshold. Returns (threshold, tpr, tnr).
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = _check_two_classes(labels)
    if scores.shape != labels.shape:
        raise DataError("scores and labels must have equal length")
    anomalies = np.sort(scores[labels])
    regular = np.sort(scores[~labels])
    candidates = np.unique(scores)
    # score >= t counts as predicted anomaly; rates as exact count ratios
    tpr = (len(anomalies) - np.searchsorted(anomalies, candidates, side="left")) / len(anomalies)
    tnr = np.searchsorted(regular, candidates, side="left") / len(regular)
    gap = np.abs(tpr - tnr)
    best = np.flatnonzero(gap == gap.min())
    best = best[tpr[best] == tpr[best].max()]
    pick = best[np.argmin(candidates[best])]
    return float(candidates[pick]), float(tpr[pick]), float(tnr[pick])


def histogram_bin_count(n_samples: int) -> int:
    """Bin count of the low-bias histogram rule used for MI estimation."""
    n = float(n_samples)
    xi = (8.0 + 324.0 * n + 12.0 * np.sqrt(36.0 * n + 729.0 * n * n)) ** (1.0 / 3.0)
    return int(round(xi / 6.0 + 2.0 / (3.0 * xi) + 1.0 / 3.0))


def histogram_mi(data: np.ndarray, i: int, j: int) -> float:
    """Plug-in mutual information between two feature columns (nats).

    Uses equal-width 2-D histograms with the low-bias bin-count rule
    applied per axis. A constant column carries no information and returns
    0 with a warning.
    """
    data = np.asarray(data, dtype=np.float64)
    if data.ndim != 2 or data.shape[0] < 30:
        raise DataError("histogram MI needs a (samples, features) matrix with >= 30 rows")
    x, y = data[:, i], data[:, j]
    if x.min() == x.max() or y.min() == y.max():
        logger.warning("histogram_mi: constant feature in pair (%d, %d)", i, j)
        return 0.0
    bins = histogram_bin_count(data.shape[0])
    joint, _, _ = np.histogram2d(x, y, bins=bins)
    joint /= joint.sum()
    px = joint.sum(axis=1)
    py = joint.sum(axis=0)
    mask = joint > 0.0
    denominator = np.outer(px, py)
    mi = float((joint[mask] * np.log(joint[mask] / denominator[mask])).sum())
    return max(mi, 0.0)
