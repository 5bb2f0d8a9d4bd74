"""Brute-force reference computations used to check the metrics module.

Everything here is deliberately naive: explicit loops, O(N^2) pairwise AUC,
per-set arithmetic. These stay independent of the vectorized implementations
they verify.
"""

from __future__ import annotations

import math


def _mean(values):
    # exactly-rounded sum: any correct fsum agrees bit-for-bit
    return math.fsum(values) / len(values) if values else 0.0


def oracle_f1(scores, labels, threshold=0.5):
    n_docs = len(scores)
    n_labels = len(scores[0]) if n_docs else 0
    per_label = []
    tp_total = fp_total = fn_total = 0
    for j in range(n_labels):
        tp = fp = fn = 0
        for i in range(n_docs):
            pred = 1 if scores[i][j] >= threshold else 0
            true = int(labels[i][j])
            if pred == 1 and true == 1:
                tp += 1
            elif pred == 1 and true == 0:
                fp += 1
            elif pred == 0 and true == 1:
                fn += 1
        tp_total += tp
        fp_total += fp
        fn_total += fn
        denom = 2 * tp + fp + fn
        per_label.append(2 * tp / denom if denom else 0.0)
    macro = _mean(per_label)
    denom = 2 * tp_total + fp_total + fn_total
    micro = 2 * tp_total / denom if denom else 0.0
    return macro, micro


def _pairwise_auc(scores, labels):
    pos = [s for s, t in zip(scores, labels) if t == 1]
    neg = [s for s, t in zip(scores, labels) if t == 0]
    if not pos or not neg:
        return None
    wins = 0.0
    for p in pos:
        for n in neg:
            if p > n:
                wins += 1.0
            elif p == n:
                wins += 0.5
    return wins / (len(pos) * len(neg))


def oracle_auc(scores, labels):
    n_docs = len(scores)
    n_labels = len(scores[0]) if n_docs else 0
    per_label = []
    skipped = 0
    for j in range(n_labels):
        value = _pairwise_auc([scores[i][j] for i in range(n_docs)],
                              [labels[i][j] for i in range(n_docs)])
        if value is None:
            skipped += 1
        else:
            per_label.append(value)
    flat_scores = [scores[i][j] for i in range(n_docs) for j in range(n_labels)]
    flat_labels = [labels[i][j] for i in range(n_docs) for j in range(n_labels)]
    micro = _pairwise_auc(flat_scores, flat_labels)
    return _mean(per_label), micro if micro is not None else 0.5, skipped


def oracle_precision_at_n(scores, labels, n):
    per_doc = []
    for row_scores, row_labels in zip(scores, labels):
        ranked = sorted(range(len(row_scores)), key=lambda j: (-row_scores[j], j))
        hits = 0
        for j in ranked[:n]:
            hits += int(row_labels[j])
        per_doc.append(hits / n)
    return _mean(per_doc)


def oracle_set_agreement(annotations, references):
    """Per-label macro averages and pooled micro values from raw sets."""
    n_docs = len(annotations)
    n_labels = len(annotations[0]) if n_docs else 0
    jac, prec, rec = [], [], []
    ti = tu = ta = tr = 0
    for j in range(n_labels):
        a_set = {i for i in range(n_docs) if annotations[i][j] == 1}
        r_set = {i for i in range(n_docs) if references[i][j] == 1}
        inter = len(a_set & r_set)
        union = len(a_set | r_set)
        ti += inter
        tu += union
        ta += len(a_set)
        tr += len(r_set)
        jac.append(inter / union if union else 0.0)
        prec.append(inter / len(a_set) if a_set else 0.0)
        rec.append(inter / len(r_set) if r_set else 0.0)
    return {
        "macro_jaccard": _mean(jac),
        "micro_jaccard": ti / tu if tu else 1.0,
        "macro_precision": _mean(prec),
        "micro_precision": ti / ta if ta else (1.0 if tr == 0 else 0.0),
        "macro_recall": _mean(rec),
        "micro_recall": ti / tr if tr else (1.0 if ta == 0 else 0.0),
    }
