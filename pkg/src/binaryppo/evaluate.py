"""Accuracy, rank metrics (AUROC/AUPRC) and confidence-bin analyses."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContractViolation, UndefinedMetricError


def _scores_labels(scores, labels):
    scores = np.asarray(scores, dtype=np.float64).ravel()
    labels = np.asarray(labels).ravel().astype(np.int64)
    if scores.shape != labels.shape:
        raise ContractViolation(f"{scores.shape[0]} scores vs {labels.shape[0]} labels")
    return scores, labels


def accuracy(scores, labels, threshold=0.5):
    """Fraction with ``(score >= threshold) == label``; ties predict class 1."""
    scores, labels = _scores_labels(scores, labels)
    if scores.size == 0:
        raise ContractViolation("accuracy of an empty prediction set")
    return float(np.mean((scores >= threshold).astype(np.int64) == labels))


def balanced_accuracy(scores, labels, threshold=0.5):
    scores, labels = _scores_labels(scores, labels)
    pred = scores >= threshold
    rates = [np.mean(pred[labels == c] == c) for c in (0, 1) if np.any(labels == c)]
    return float(np.mean(rates))


def _midranks(values):
    order = np.argsort(values, kind="mergesort")
    sorted_vals = values[order]
    # boundaries of runs of equal values
    starts = np.flatnonzero(np.r_[True, sorted_vals[1:] != sorted_vals[:-1]])
    ends = np.r_[starts[1:], values.size]
    avg = (starts + ends + 1) / 2.0  # 1-based average rank of each run
    ranks = np.empty(values.size)
    ranks[order] = np.repeat(avg, ends - starts)
    return ranks


def auroc(scores, labels):
    """P(score_pos > score_neg) + 0.5 * P(tie), via midranks (Mann-Whitney U)."""
    scores, labels = _scores_labels(scores, labels)
    n_pos = int(labels.sum())
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise UndefinedMetricError("AUROC needs at least one positive and one negative")
    ranks = _midranks(scores)
    u = ranks[labels == 1].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def auprc(scores, labels):
    """Average precision: sum over distinct thresholds of (delta recall) * precision.

    Thresholds run over distinct scores in descending order; tied scores enter
    together. No interpolation between operating points.
    """
    scores, labels = _scores_labels(scores, labels)
    n_pos = int(labels.sum())
    if n_pos == 0:
        raise UndefinedMetricError("AUPRC needs at least one positive")
    order = np.argsort(-scores, kind="mergesort")
    s, y = scores[order], labels[order]
    last = np.r_[s[1:] != s[:-1], True]  # last index of each tie group
    tp = np.cumsum(y)[last]
    predicted = (np.arange(1, s.size + 1))[last]
    precision = tp / predicted
    recall = tp / n_pos
    d_recall = np.diff(np.r_[0.0, recall])
    return float(np.sum(d_recall * precision))


@dataclass
class BinReport:
    """Equal-width confidence bins. Empty bins carry ``None`` statistics."""

    edges: list
    counts: list
    mean_confidence: list
    accuracy: list
    mean_advantage: list

    def rows(self):
        for i, count in enumerate(self.counts):
            yield {
                "bin": i,
                "lo": self.edges[i],
                "hi": self.edges[i + 1],
                "count": count,
                "mean_confidence": self.mean_confidence[i],
                "accuracy": self.accuracy[i],
                "mean_advantage": self.mean_advantage[i],
            }

    def as_dict(self):
        return {"edges": self.edges, "counts": self.counts, "mean_confidence": self.mean_confidence,
                "accuracy": self.accuracy, "mean_advantage": self.mean_advantage}


def confidence_bins(scores, labels, n_bins=10, advantages=None, axis="predicted"):
    """Bin predictions by confidence and report per-bin accuracy and advantage.

    ``axis="predicted"`` bins ``max(score, 1 - score)`` (confidence in the
    predicted class) over [0.5, 1]; ``axis="score"`` bins the raw score over
    [0, 1]. Predictions use the 0.5 threshold of :func:`accuracy`.
    """
    if n_bins < 2:
        raise ContractViolation("n_bins must be >= 2")
    scores, labels = _scores_labels(scores, labels)
    if axis == "predicted":
        conf = np.maximum(scores, 1.0 - scores)
        lo = 0.5
    elif axis == "score":
        conf, lo = scores, 0.0
    else:
        raise ValueError(f"unknown axis {axis!r}")
    edges = np.linspace(lo, 1.0, n_bins + 1)
    idx = np.clip(np.searchsorted(edges, conf, side="right") - 1, 0, n_bins - 1)
    correct = (scores >= 0.5).astype(np.int64) == labels
    adv = None if advantages is None else np.asarray(advantages, dtype=np.float64).ravel()
    counts, mconf, acc, madv = [], [], [], []
    for b in range(n_bins):
        mask = idx == b
        c = int(mask.sum())
        counts.append(c)
        if c == 0:
            mconf.append(None)
            acc.append(None)
            madv.append(None)
            continue
        mconf.append(float(conf[mask].mean()))
        acc.append(float(correct[mask].mean()))
        madv.append(None if adv is None else float(adv[mask].mean()))
    return BinReport([float(e) for e in edges], counts, mconf, acc, madv)
