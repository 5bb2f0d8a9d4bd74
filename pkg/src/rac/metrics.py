"""Ranking and set-agreement metrics over score/label matrices.

Scores are N x n_y real values (model probabilities, or {0,1} for human
annotations); labels are N x n_y binary. Macro averages are per label and
unweighted; micro averages pool every (document, label) cell. Averaging is
done by left-to-right summation over python floats so results are bit-stable
and reproducible against simple reference computations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


class MetricsError(ValueError):
    pass


def _check_pair(scores, labels) -> tuple[np.ndarray, np.ndarray]:
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    if scores.shape != labels.shape:
        raise MetricsError(f"scores shape {scores.shape} != labels shape {labels.shape}")
    if scores.ndim != 2:
        raise MetricsError(f"expected 2-d matrices, got shape {scores.shape}")
    if not np.all(np.isfinite(scores)):
        raise MetricsError("scores contain non-finite values")
    if not np.isin(labels, (0, 1)).all():
        raise MetricsError("labels must be binary")
    return scores, labels.astype(np.int64)


def _check_binary(matrix) -> np.ndarray:
    matrix = np.asarray(matrix)
    if not np.isin(matrix, (0, 1)).all():
        raise MetricsError("matrix must be binary")
    return matrix.astype(np.int64)


def _seq_mean(values: list[float]) -> float:
    # fsum is exactly rounded, so averages are independent of element order
    return math.fsum(values) / len(values) if values else 0.0


# ---------------------------------------------------------------------------
# F1


def f1(scores, labels, threshold: float = 0.5) -> tuple[float, float]:
    """(macro_f1, micro_f1) after binarizing scores at ``threshold`` (>=)."""
    scores, labels = _check_pair(scores, labels)
    pred = (scores >= threshold).astype(np.int64)
    tp = ((pred == 1) & (labels == 1)).sum(axis=0)
    fp = ((pred == 1) & (labels == 0)).sum(axis=0)
    fn = ((pred == 0) & (labels == 1)).sum(axis=0)
    per_label = []
    for label in range(labels.shape[1]):
        denom = 2 * int(tp[label]) + int(fp[label]) + int(fn[label])
        per_label.append(2 * int(tp[label]) / denom if denom else 0.0)
    macro = _seq_mean(per_label)
    denom = 2 * int(tp.sum()) + int(fp.sum()) + int(fn.sum())
    micro = 2 * int(tp.sum()) / denom if denom else 0.0
    return macro, micro


# ---------------------------------------------------------------------------
# AUC


def _midranks(x: np.ndarray) -> np.ndarray:
    """1-based ranks with ties assigned the mean rank of their group."""
    _, inverse, counts = np.unique(x, return_inverse=True, return_counts=True)
    ends = np.cumsum(counts)
    starts = ends - counts + 1
    mid = (starts + ends) / 2.0
    return mid[inverse]


def _binary_auc(scores: np.ndarray, labels: np.ndarray) -> float | None:
    """ROC-AUC via the rank statistic; None when a class is missing."""
    n_pos = int(labels.sum())
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        return None
    ranks = _midranks(scores)
    pos_rank_sum = math.fsum(ranks[labels == 1])
    return (pos_rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def auc(scores, labels) -> tuple[float, float, int]:
    """(macro_auc, micro_auc, skipped_label_count).

    Macro averages per-label AUC over labels that have both classes; others
    are skipped and counted. Micro is the AUC of the flattened cells.
    """
    scores, labels = _check_pair(scores, labels)
    per_label = []
    skipped = 0
    for label in range(labels.shape[1]):
        value = _binary_auc(scores[:, label], labels[:, label])
        if value is None:
            skipped += 1
        else:
            per_label.append(value)
    macro = _seq_mean(per_label)
    micro = _binary_auc(scores.reshape(-1), labels.reshape(-1))
    return macro, micro if micro is not None else 0.5, skipped


# ---------------------------------------------------------------------------
# Precision@n


def precision_at_n(scores, labels, n: int) -> float:
    """Mean over documents of |top-n scored labels ∩ true labels| / n.

    Score ties rank the lower label index first, so results are
    deterministic and invariant under monotone score transforms.
    """
    scores, labels = _check_pair(scores, labels)
    if n < 1:
        raise MetricsError(f"n must be >= 1, got {n}")
    if n > labels.shape[1]:
        raise MetricsError(f"n={n} exceeds the number of labels {labels.shape[1]}")
    per_doc = []
    for row in range(scores.shape[0]):
        top = np.argsort(-scores[row], kind="stable")[:n]
        per_doc.append(int(labels[row, top].sum()) / n)
    return _seq_mean(per_doc)


# ---------------------------------------------------------------------------
# set agreement (annotations vs references)


def set_agreement(annotations, references, macro_axis: str = "label") -> dict[str, float]:
    """Macro/micro Jaccard, precision and recall between binary matrices.

    Micro pools all cells. Macro is per label over the document axis by
    default (``macro_axis="document"`` averages per document instead);
    units with an empty union (or empty denominator) contribute 0.
    """
    a = _check_binary(annotations)
    r = _check_binary(references)
    if a.shape != r.shape:
        raise MetricsError(f"annotation shape {a.shape} != reference shape {r.shape}")
    if macro_axis not in ("label", "document"):
        raise MetricsError(f"macro_axis must be 'label' or 'document', got {macro_axis!r}")

    inter = ((a == 1) & (r == 1)).astype(np.int64)
    union = ((a == 1) | (r == 1)).astype(np.int64)
    axis = 0 if macro_axis == "label" else 1

    jac, prec, rec = [], [], []
    for unit in range(a.shape[1 - axis]):
        idx = (slice(None), unit) if axis == 0 else (unit, slice(None))
        i = int(inter[idx].sum())
        u = int(union[idx].sum())
        na = int(a[idx].sum())
        nr = int(r[idx].sum())
        jac.append(i / u if u else 0.0)
        prec.append(i / na if na else 0.0)
        rec.append(i / nr if nr else 0.0)

    total_i = int(inter.sum())
    total_u = int(union.sum())
    total_a = int(a.sum())
    total_r = int(r.sum())
    return {
        "macro_jaccard": _seq_mean(jac),
        "micro_jaccard": total_i / total_u if total_u else 1.0,
        "macro_precision": _seq_mean(prec),
        "micro_precision": total_i / total_a if total_a else (1.0 if total_r == 0 else 0.0),
        "macro_recall": _seq_mean(rec),
        "micro_recall": total_i / total_r if total_r else (1.0 if total_a == 0 else 0.0),
    }


# ---------------------------------------------------------------------------
# bundled report


@dataclass
class MetricsReport:
    macro_auc: float | None = None
    micro_auc: float | None = None
    macro_f1: float | None = None
    micro_f1: float | None = None
    precision_at: dict[int, float] = field(default_factory=dict)
    macro_jaccard: float | None = None
    micro_jaccard: float | None = None
    macro_precision: float | None = None
    micro_precision: float | None = None
    macro_recall: float | None = None
    micro_recall: float | None = None
    skipped_label_count: int = 0
    macro_axis: str = "label"

    def to_dict(self) -> dict:
        out = {}
        for name in (
            "macro_auc", "micro_auc", "macro_f1", "micro_f1",
            "macro_jaccard", "micro_jaccard", "macro_precision",
            "micro_precision", "macro_recall", "micro_recall",
        ):
            value = getattr(self, name)
            if value is not None:
                out[name] = value
        for n, value in sorted(self.precision_at.items()):
            out[f"precision_at_{n}"] = value
        out["skipped_label_count"] = self.skipped_label_count
        out["macro_axis"] = self.macro_axis
        return out


def full_report(scores, labels, mode: str = "ranking", ks=(5, 8, 15), threshold: float = 0.5) -> MetricsReport:
    """Bundle the ranking metrics or the agreement metrics into one report."""
    if mode == "ranking":
        macro_auc, micro_auc, skipped = auc(scores, labels)
        macro_f1, micro_f1 = f1(scores, labels, threshold)
        n_y = np.asarray(labels).shape[1]
        precision = {n: precision_at_n(scores, labels, n) for n in ks if 1 <= n <= n_y}
        return MetricsReport(
            macro_auc=macro_auc, micro_auc=micro_auc,
            macro_f1=macro_f1, micro_f1=micro_f1,
            precision_at=precision, skipped_label_count=skipped,
        )
    if mode == "agreement":
        scores_arr = np.asarray(scores)
        if not np.isin(scores_arr, (0, 1)).all():
            raise MetricsError("agreement mode requires binary scores")
        values = set_agreement(scores_arr, labels)
        return MetricsReport(**values)
    raise MetricsError(f"mode must be 'ranking' or 'agreement', got {mode!r}")
