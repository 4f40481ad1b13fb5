"""Imbalance-aware evaluation: confusion matrices, rates, AUC, composites.

The primary object is a confusion matrix of counts[true, predicted]. For
fault detection the multi-class matrix collapses to a binary view where class
0 (healthy) is negative and everything else, including a rejected-as-synthetic
call, is a positive alarm. Ratios with a zero denominator evaluate to 0.0 and
are flagged rather than raising, so reports stay machine-readable.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class MetricsError(ValueError):
    pass


FAKE_PREDICTION = -1


def confusion(y_true, y_pred, n_classes: int, fake_column: bool = False) -> np.ndarray:
    """Counts[true, predicted]. With `fake_column`, predictions equal to
    FAKE_PREDICTION land in an extra final column, giving a (K, K+1) matrix.
    """
    t = np.asarray(y_true, dtype=np.int64)
    p = np.asarray(y_pred, dtype=np.int64)
    if t.shape != p.shape or t.ndim != 1:
        raise MetricsError("y_true and y_pred must be equal-length 1D arrays")
    if t.size == 0:
        raise MetricsError("empty label arrays")
    if n_classes < 1:
        raise MetricsError("n_classes must be >= 1")
    if t.min() < 0 or t.max() >= n_classes:
        raise MetricsError("true label out of range")
    cols = n_classes + 1 if fake_column else n_classes
    m = np.zeros((n_classes, cols), dtype=np.int64)
    for ti, pi in zip(t, p):
        if pi == FAKE_PREDICTION:
            if not fake_column:
                raise MetricsError("fake prediction present but fake_column=False")
            m[ti, n_classes] += 1
        elif 0 <= pi < n_classes:
            m[ti, pi] += 1
        else:
            raise MetricsError(f"predicted label {pi} out of range")
    return m


def fault_collapse(cm: np.ndarray) -> np.ndarray:
    """Collapse a (K, K) or (K, K+1) matrix to 2x2 fault-vs-healthy counts.

    Row/column 0 is healthy, row/column 1 is fault; an extra fake column
    counts as a fault prediction. Layout: [[TN, FP], [FN, TP]].
    """
    m = np.asarray(cm)
    if m.ndim != 2 or m.shape[0] < 1 or m.shape[1] < m.shape[0]:
        raise MetricsError(f"bad confusion shape {m.shape}")
    tn = int(m[0, 0])
    fp = int(m[0, 1:].sum())
    fn = int(m[1:, 0].sum())
    tp = int(m[1:, 1:].sum())
    return np.array([[tn, fp], [fn, tp]], dtype=np.int64)


def one_vs_rest(cm: np.ndarray, positive_class: int) -> np.ndarray:
    """Collapse a square matrix to 2x2 with one focal class as positive."""
    m = np.asarray(cm)
    k = m.shape[0]
    if not 0 <= positive_class < k:
        raise MetricsError("positive_class out of range")
    tp = int(m[positive_class, positive_class])
    fn = int(m[positive_class].sum() - tp)
    fp = int(m[:, positive_class].sum() - tp)
    tn = int(m.sum() - tp - fn - fp)
    return np.array([[tn, fp], [fn, tp]], dtype=np.int64)


def _safe_div(num: float, den: float):
    if den == 0:
        return 0.0, True
    return float(num) / float(den), False


@dataclass
class BinaryRates:
    """Sensitivity, specificity, precision, recall of one 2x2 collapse."""

    tp: int
    fn: int
    tn: int
    fp: int
    sensitivity: float
    specificity: float
    precision: float
    recall: float
    flagged: bool


def binary_rates(cm2: np.ndarray, positive_class: int = 1) -> BinaryRates:
    """Rates of a binary matrix [[TN, FP], [FN, TP]] (positive_class=1).

    positive_class=0 swaps the roles. Zero denominators give 0.0 + flag.
    """
    m = np.asarray(cm2)
    if m.shape != (2, 2):
        raise MetricsError("binary_rates needs a 2x2 matrix")
    if positive_class not in (0, 1):
        raise MetricsError("positive_class must be 0 or 1")
    if positive_class == 0:
        m = m[::-1, ::-1]
    tn, fp, fn, tp = int(m[0, 0]), int(m[0, 1]), int(m[1, 0]), int(m[1, 1])
    sens, f1 = _safe_div(tp, tp + fn)
    spec, f2 = _safe_div(tn, tn + fp)
    prec, f3 = _safe_div(tp, tp + fp)
    return BinaryRates(tp, fn, tn, fp, sens, spec, prec, sens, f1 or f2 or f3)


def imbalance_metrics(sens: float, spec: float, alpha: float = 1.0,
                      squared_denominator: bool = False):
    """(BAC, G-mean, F-measure, flagged) from a sensitivity/specificity pair.

    BAC = (sens + spec)/2; G-mean = sqrt(sens*spec);
    F = (1 + a^2)*sens*spec / (a*sens + spec). `squared_denominator` switches
    the denominator weight to a^2 (the classic F-beta shape).
    """
    if not (0.0 <= sens <= 1.0 and 0.0 <= spec <= 1.0):
        raise MetricsError("rates must lie in [0, 1]")
    a = float(alpha)
    if a <= 0:
        raise MetricsError("alpha must be > 0")
    bac = 0.5 * (sens + spec)
    gmean = float(np.sqrt(sens * spec))
    w = a * a if squared_denominator else a
    f, flagged = _safe_div((1 + a * a) * sens * spec, w * sens + spec)
    return bac, gmean, f, flagged


def mcc(cm2: np.ndarray):
    """Matthews correlation of a 2x2 matrix; returns (value, flagged)."""
    m = np.asarray(cm2)
    if m.shape != (2, 2):
        raise MetricsError("mcc needs a 2x2 matrix")
    tn, fp, fn, tp = int(m[0, 0]), int(m[0, 1]), int(m[1, 0]), int(m[1, 1])
    num = tp * tn - fp * fn
    den2 = float(tp + fp) * (tp + fn) * (tn + fp) * (tn + fn)
    if den2 == 0:
        return 0.0, True
    return float(num) / float(np.sqrt(den2)), False


def roc_points(scores, positives) -> np.ndarray:
    """ROC points (fpr, tpr) sweeping a strictly-greater threshold.

    Scores are grouped by exact value, so a block of ties contributes one
    diagonal segment. Rows run from (0, 0) to (1, 1).
    """
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(positives, dtype=bool)
    if s.shape != y.shape or s.ndim != 1 or s.size == 0:
        raise MetricsError("scores and labels must be equal-length non-empty 1D")
    if not np.all(np.isfinite(s)):
        raise MetricsError("scores must be finite")
    n_pos = int(y.sum())
    n_neg = int(s.size - n_pos)
    if n_pos == 0 or n_neg == 0:
        raise MetricsError("need at least one positive and one negative")
    order = np.argsort(-s, kind="stable")
    s_sorted = s[order]
    y_sorted = y[order]
    pts = [(0.0, 0.0)]
    tp = fp = 0
    i = 0
    while i < s.size:
        j = i
        while j < s.size and s_sorted[j] == s_sorted[i]:
            tp += bool(y_sorted[j])
            fp += not y_sorted[j]
            j += 1
        pts.append((fp / n_neg, tp / n_pos))
        i = j
    return np.asarray(pts)


def roc_auc(scores, positives):
    """(ROC points, AUC). Trapezoidal area under the tie-grouped curve,
    numerically the Mann-Whitney statistic: the probability a random positive
    outscores a random negative, ties counting one half.
    """
    pts = roc_points(scores, positives)
    area = float(np.trapezoid(pts[:, 1], pts[:, 0]))
    return pts, area


def auc(scores, positives) -> float:
    return roc_auc(scores, positives)[1]


def fam(auc_value: float, mcc_value: float, f_value: float) -> float:
    """Composite score: plain mean of AUC, MCC, and F-measure."""
    return (float(auc_value) + float(mcc_value) + float(f_value)) / 3.0


def per_class_recall(cm: np.ndarray) -> np.ndarray:
    """Recall of each true class; rows with no samples give 0.0."""
    m = np.asarray(cm, dtype=np.float64)
    totals = m.sum(axis=1)
    k = m.shape[0]
    out = np.zeros(k)
    for c in range(k):
        if totals[c] > 0:
            out[c] = m[c, c] / totals[c]
    return out


def macro_rates(cm: np.ndarray):
    """Macro-averaged (sensitivity, specificity, precision, recall) over
    one-vs-rest collapses; classes absent from the true labels are skipped.
    """
    m = np.asarray(cm)
    k = m.shape[0]
    rows = []
    for c in range(k):
        if m[c].sum() == 0:
            continue
        rows.append(binary_rates(one_vs_rest(m[:, :k], c)))
    if not rows:
        raise MetricsError("no classes present")
    return (float(np.mean([r.sensitivity for r in rows])),
            float(np.mean([r.specificity for r in rows])),
            float(np.mean([r.precision for r in rows])),
            float(np.mean([r.recall for r in rows])))


@dataclass
class MetricsReport:
    """Headline numbers of one evaluation, fault-vs-healthy unless noted."""

    sensitivity: float
    specificity: float
    precision: float
    recall: float
    balanced_accuracy: float
    g_mean: float
    f_measure: float
    mcc: float
    auc: float
    fam: float
    per_class_recall: list
    degenerate: bool

    ROC_NOT_COMPUTED = float("nan")


def evaluate(y_true, y_pred, n_classes: int, scores=None, alpha: float = 1.0,
             fake_column: bool = False) -> MetricsReport:
    """Full report from labels (and optionally fault scores for AUC/FAM)."""
    cm = confusion(y_true, y_pred, n_classes, fake_column=fake_column)
    two = fault_collapse(cm)
    r = binary_rates(two)
    bac, gmean, f, f_flag = imbalance_metrics(r.sensitivity, r.specificity, alpha)
    m_val, m_flag = mcc(two)
    if scores is not None:
        t = np.asarray(y_true, dtype=np.int64)
        auc_val = auc(scores, t != 0)
        fam_val = fam(auc_val, m_val, f)
    else:
        auc_val = MetricsReport.ROC_NOT_COMPUTED
        fam_val = MetricsReport.ROC_NOT_COMPUTED
    return MetricsReport(
        sensitivity=r.sensitivity,
        specificity=r.specificity,
        precision=r.precision,
        recall=r.recall,
        balanced_accuracy=bac,
        g_mean=gmean,
        f_measure=f,
        mcc=m_val,
        auc=auc_val,
        fam=fam_val,
        per_class_recall=[float(v) for v in per_class_recall(cm)],
        degenerate=bool(r.flagged or f_flag or m_flag),
    )


def g_mean_from_labels(y_true, y_pred, n_classes: int, fake_column: bool = True) -> float:
    """Fault-vs-healthy G-mean straight from label arrays."""
    cm = confusion(y_true, y_pred, n_classes, fake_column=fake_column)
    r = binary_rates(fault_collapse(cm))
    return float(np.sqrt(r.sensitivity * r.specificity))
