"""Predictive and uncertainty evaluation.

AUROC uses the mid-rank Mann-Whitney statistic, so ties count half.
AUPRC is average precision with step interpolation. Risk-coverage orders
samples from most to least confident and reports the running error rate;
the selective sweep rejects samples above an uncertainty threshold and
reports misclassification among the kept ones.
"""

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DimensionError, UndefinedMetricError

DEFAULT_THRESHOLDS = tuple(np.round(np.linspace(0.05, 1.0, 20), 2))


def _paired(a, b):
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape or a.ndim != 1:
        raise DimensionError(f"inputs must be equal-length vectors, got {a.shape} and {b.shape}")
    if a.size == 0:
        raise UndefinedMetricError("empty input")
    return a, b


def accuracy(preds, labels):
    preds, labels = _paired(preds, labels)
    return float(np.mean(preds == labels))


def f1(preds, labels, num_classes):
    """Binary: F1 of class 1. Multiclass: unweighted macro average, with
    classes absent from both preds and labels contributing 0."""
    preds, labels = _paired(preds, labels)
    if num_classes < 2:
        raise DimensionError(f"num_classes must be >= 2, got {num_classes}")

    def _f1_of(positive):
        tp = np.sum((preds == positive) & (labels == positive))
        fp = np.sum((preds == positive) & (labels != positive))
        fn = np.sum((preds != positive) & (labels == positive))
        if tp == 0:
            return 0.0
        precision = tp / (tp + fp)
        recall = tp / (tp + fn)
        return 2 * precision * recall / (precision + recall)

    if num_classes == 2:
        return float(_f1_of(1))
    return float(np.mean([_f1_of(c) for c in range(num_classes)]))


def _midranks(scores):
    n = scores.size
    order = np.argsort(scores, kind="stable")
    sorted_scores = scores[order]
    boundaries = np.flatnonzero(np.diff(sorted_scores) != 0.0)
    starts = np.concatenate(([0], boundaries + 1))
    ends = np.concatenate((boundaries, [n - 1]))
    mid = (starts + ends) / 2.0 + 1.0
    ranks = np.empty(n)
    ranks[order] = np.repeat(mid, ends - starts + 1)
    return ranks


def auroc(scores, binary_labels):
    """P(score+ > score-) + 0.5 P(tie), via mid-rank ranking."""
    scores, y = _paired(np.asarray(scores, dtype=np.float64), np.asarray(binary_labels) != 0)
    n_pos = int(y.sum())
    n_neg = y.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise UndefinedMetricError("AUROC needs both classes present")
    ranks = _midranks(scores)
    u = ranks[y].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def auprc(scores, binary_labels):
    """Average precision over positives in descending-score order (ties
    broken by ascending index)."""
    scores, y = _paired(np.asarray(scores, dtype=np.float64), np.asarray(binary_labels) != 0)
    n_pos = int(y.sum())
    if n_pos == 0:
        raise UndefinedMetricError("average precision needs at least one positive")
    order = np.lexsort((np.arange(y.size), -scores))
    hits = y[order]
    tp = np.cumsum(hits)
    ranks = np.arange(1, y.size + 1)
    return float((tp[hits] / ranks[hits]).sum() / n_pos)


def uncertainty_auroc(uncertainties, correctness_flags):
    """How well uncertainty separates wrong from right predictions;
    incorrect predictions are the positive class."""
    u, correct = _paired(np.asarray(uncertainties, dtype=np.float64),
                         np.asarray(correctness_flags) != 0)
    wrong = ~correct
    if wrong.all() or correct.all():
        raise UndefinedMetricError(
            "uncertainty AUROC needs at least one correct and one incorrect prediction"
        )
    return auroc(u, wrong)


def risk_coverage(uncertainties, correctness_flags):
    """(coverage, risk) points over the most-confident k samples, k = 1..n."""
    u, correct = _paired(np.asarray(uncertainties, dtype=np.float64),
                         np.asarray(correctness_flags) != 0)
    n = u.size
    order = np.lexsort((np.arange(n), u))
    errors = np.cumsum(~correct[order])
    ks = np.arange(1, n + 1)
    return list(zip((ks / n).tolist(), (errors / ks).tolist()))


def selective_sweep(uncertainties, correctness_flags, thresholds):
    """(threshold, misclassification rate among accepted, rejection rate)
    per threshold; misclassification is 0 by convention when all samples
    are rejected."""
    u, correct = _paired(np.asarray(uncertainties, dtype=np.float64),
                         np.asarray(correctness_flags) != 0)
    thresholds = [float(t) for t in thresholds]
    if not thresholds:
        raise UndefinedMetricError("selective sweep needs at least one threshold")
    rows = []
    for tau in thresholds:
        rejected = u > tau
        rejection_rate = float(rejected.mean())
        kept = ~rejected
        miscls = float((~correct[kept]).mean()) if kept.any() else 0.0
        rows.append((tau, miscls, rejection_rate))
    return rows


@dataclass(frozen=True)
class EvalReport:
    accuracy: float
    f1: float
    auroc: float
    auprc: float
    uncertainty_auroc: float
    risk_coverage: list
    selective: list
    num_samples: int
    score_averaging: str


def _macro_ovr(metric, probs, labels, num_classes):
    values = []
    for c in range(num_classes):
        y = labels == c
        if y.all() or not y.any():
            continue
        try:
            values.append(metric(probs[:, c], y))
        except UndefinedMetricError:
            continue
    return float(np.mean(values)) if values else None


def build_report(predicted, labels, probs, uncertainties, num_classes,
                 thresholds=DEFAULT_THRESHOLDS):
    """Assemble the full evaluation report.

    Degenerate ranking metrics (single-class slices and the like) are
    reported as None instead of failing the whole evaluation.
    """
    predicted = np.asarray(predicted, dtype=np.int64)
    labels = np.asarray(labels, dtype=np.int64)
    probs = np.asarray(probs, dtype=np.float64)
    uncertainties = np.asarray(uncertainties, dtype=np.float64)
    correct = predicted == labels

    if num_classes == 2:
        averaging = "binary"
        try:
            roc = auroc(probs[:, 1], labels == 1)
        except UndefinedMetricError:
            roc = None
        try:
            ap = auprc(probs[:, 1], labels == 1)
        except UndefinedMetricError:
            ap = None
    else:
        averaging = "macro_ovr"
        roc = _macro_ovr(auroc, probs, labels, num_classes)
        ap = _macro_ovr(auprc, probs, labels, num_classes)
    try:
        unc_roc = uncertainty_auroc(uncertainties, correct)
    except UndefinedMetricError:
        unc_roc = None

    return EvalReport(
        accuracy=accuracy(predicted, labels),
        f1=f1(predicted, labels, num_classes),
        auroc=roc,
        auprc=ap,
        uncertainty_auroc=unc_roc,
        risk_coverage=risk_coverage(uncertainties, correct),
        selective=selective_sweep(uncertainties, correct, thresholds),
        num_samples=int(labels.size),
        score_averaging=averaging,
    )


def write_report(report, out_dir):
    """metrics.json + risk_coverage.csv + selective_sweep.csv under out_dir."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    scalars = {
        "accuracy": report.accuracy,
        "f1": report.f1,
        "auroc": report.auroc,
        "auprc": report.auprc,
        "uncertainty_auroc": report.uncertainty_auroc,
        "num_samples": report.num_samples,
        "score_averaging": report.score_averaging,
    }
    with open(out / "metrics.json", "w", encoding="utf-8") as f:
        json.dump(scalars, f, indent=2, sort_keys=True)
        f.write("\n")
    with open(out / "risk_coverage.csv", "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["coverage", "risk"])
        writer.writerows(report.risk_coverage)
    with open(out / "selective_sweep.csv", "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["threshold", "misclassification_rate", "rejection_rate"])
        writer.writerows(report.selective)
    return out / "metrics.json", out / "risk_coverage.csv", out / "selective_sweep.csv"
