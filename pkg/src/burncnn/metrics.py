"""Classifier evaluation: confusion matrix, accuracy/precision/recall/F1,
ROC curve and AUC, and full report generation.

Degenerate divisions (no predicted positives, empty classes) return 0
and are flagged in the report rather than raising, so early-training
evaluations stay total.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np

from .data import BINARY_CLASSES, BURN_CLASSES, GRAFT
from .errors import ContractViolation
from .network import forward
from .tensor import Tensor


@dataclass
class ConfusionMatrix:
    counts: np.ndarray                  # (C, C) int64; [true, predicted]
    class_order: tuple

    def total(self) -> int:
        return int(self.counts.sum())

    def index(self, label) -> int:
        try:
            return self.class_order.index(label)
        except ValueError:
            raise ContractViolation(
                f"label {label!r} not in class order {self.class_order}") from None


def confusion(true_labels, predicted_labels, class_order) -> ConfusionMatrix:
    """Count matrix: entry (i, j) = samples of true class i predicted as j."""
    if len(true_labels) != len(predicted_labels):
        raise ContractViolation(
            f"label lists differ in length: {len(true_labels)} vs "
            f"{len(predicted_labels)}")
    order = tuple(class_order)
    index = {label: i for i, label in enumerate(order)}
    counts = np.zeros((len(order), len(order)), dtype=np.int64)
    for t, p in zip(true_labels, predicted_labels):
        if t not in index:
            raise ContractViolation(f"unknown true label {t!r}")
        if p not in index:
            raise ContractViolation(f"unknown predicted label {p!r}")
        counts[index[t], index[p]] += 1
    return ConfusionMatrix(counts=counts, class_order=order)


def accuracy(cm: ConfusionMatrix) -> float:
    total = cm.total()
    return float(np.trace(cm.counts)) / total if total else 0.0


def precision(cm: ConfusionMatrix, positive) -> float:
    """TP / (TP + FP); 0.0 when the class is never predicted."""
    i = cm.index(positive)
    predicted = int(cm.counts[:, i].sum())
    return int(cm.counts[i, i]) / predicted if predicted else 0.0


def recall(cm: ConfusionMatrix, positive) -> float:
    """TP / (TP + FN); 0.0 when the class has no true samples."""
    i = cm.index(positive)
    actual = int(cm.counts[i, :].sum())
    return int(cm.counts[i, i]) / actual if actual else 0.0


def f1(p: float, r: float) -> float:
    return 2 * p * r / (p + r) if (p + r) > 0 else 0.0


@dataclass
class RocCurve:
    points: list[tuple[float, float]]   # (fpr, tpr), from (0,0) to (1,1)
    positive_class: object


def roc_and_auc(scores, true_labels, positive=1) -> tuple[RocCurve, float]:
    """ROC by threshold sweep over distinct scores (descending) and
    trapezoidal AUC, which equals the tie-adjusted probability that a
    random positive outscores a random negative."""
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray([1 if t == positive else 0 for t in true_labels])
    if s.shape != y.shape:
        raise ContractViolation(
            f"scores and labels differ in length: {s.shape} vs {y.shape}")
    n_pos = int(y.sum())
    n_neg = int(len(y) - n_pos)
    if n_pos == 0 or n_neg == 0:
        raise ContractViolation(
            "ROC needs at least one positive and one negative sample")

    order = np.argsort(-s, kind="stable")
    s_sorted = s[order]
    y_sorted = y[order]
    points = [(0.0, 0.0)]
    tp = fp = 0
    i = 0
    while i < len(s_sorted):
        j = i
        while j < len(s_sorted) and s_sorted[j] == s_sorted[i]:
            tp += int(y_sorted[j])
            fp += 1 - int(y_sorted[j])
            j += 1
        points.append((fp / n_neg, tp / n_pos))
        i = j

    auc = 0.0
    for (x0, y0), (x1, y1) in zip(points, points[1:]):
        auc += (x1 - x0) * (y0 + y1) / 2.0
    return RocCurve(points=points, positive_class=positive), auc


@dataclass
class ClassMetrics:
    precision: float
    recall: float
    f1: float
    support: int
    degenerate: bool


@dataclass
class EvalReport:
    mode: str
    class_order: tuple
    cm: ConfusionMatrix
    accuracy: float
    per_class: dict[str, ClassMetrics]
    counts: dict[str, int]
    positive_class: str | None = None
    roc: RocCurve | None = None
    auc: float | None = None
    macro: dict[str, float] = field(default_factory=dict)

    def to_json_dict(self) -> dict:
        out = {
            "mode": self.mode,
            "class_order": list(self.class_order),
            "confusion": self.cm.counts.tolist(),
            "accuracy": self.accuracy,
            "per_class": {
                name: {"precision": m.precision, "recall": m.recall,
                       "f1": m.f1, "support": m.support,
                       "degenerate": m.degenerate}
                for name, m in self.per_class.items()},
            "counts": dict(self.counts),
        }
        if self.mode == "binary":
            out["positive_class"] = self.positive_class
            out["roc"] = [[x, y] for x, y in self.roc.points]
            out["auc"] = self.auc
        else:
            out["macro"] = dict(self.macro)
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), sort_keys=True, indent=2) + "\n"


def write_roc_csv(curve: RocCurve, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["fpr", "tpr"])
        for x, y in curve.points:
            w.writerow([repr(x), repr(y)])


def softmax_rows(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def class_order_for(mode: str) -> tuple:
    if mode == "binary":
        return tuple(BINARY_CLASSES)
    if mode == "three-class":
        return tuple(BURN_CLASSES)
    raise ContractViolation(f"unknown mode {mode!r}")


def build_report(true_labels, predicted_labels, mode: str,
                 positive_scores=None) -> EvalReport:
    """Assemble an EvalReport from label lists (and graft scores in
    binary mode)."""
    order = class_order_for(mode)
    cm = confusion(true_labels, predicted_labels, order)
    per_class: dict[str, ClassMetrics] = {}
    for name in order:
        i = cm.class_order.index(name)
        support = int(cm.counts[i, :].sum())
        predicted = int(cm.counts[:, i].sum())
        p = precision(cm, name)
        r = recall(cm, name)
        per_class[name] = ClassMetrics(
            precision=p, recall=r, f1=f1(p, r), support=support,
            degenerate=predicted == 0 or support == 0 or (p + r) == 0)
    report = EvalReport(
        mode=mode, class_order=order, cm=cm, accuracy=accuracy(cm),
        per_class=per_class,
        counts={"total": cm.total(),
                **{str(name): m.support for name, m in per_class.items()}})
    if mode == "binary":
        report.positive_class = GRAFT
        curve, auc = roc_and_auc(positive_scores, true_labels, positive=GRAFT)
        report.roc = curve
        report.auc = auc
    else:
        ms = list(per_class.values())
        report.macro = {
            "precision": sum(m.precision for m in ms) / len(ms),
            "recall": sum(m.recall for m in ms) / len(ms),
            "f1": sum(m.f1 for m in ms) / len(ms)}
    return report


def evaluate(checkpoint, test_set, mode: str, batch_size: int = 32) -> EvalReport:
    """Evaluate a checkpoint on (input tensor, true label name) pairs.

    Predictions are the argmax of the softmax probabilities (ties go to
    the lowest class index); in binary mode the ROC sweeps the
    graft-class probability.
    """
    order = class_order_for(mode)
    if len(test_set) == 0:
        raise ContractViolation("test set is empty")
    if checkpoint.spec.num_classes != len(order):
        raise ContractViolation(
            f"checkpoint has {checkpoint.spec.num_classes} classes, "
            f"mode {mode!r} needs {len(order)}")
    true_labels = []
    predicted = []
    graft_scores: list[float] = []
    for start in range(0, len(test_set), batch_size):
        chunk = test_set[start:start + batch_size]
        batch = Tensor._wrap(np.stack([x.data for x, _ in chunk]))
        logits, _ = forward(checkpoint.spec, checkpoint.params, batch,
                            mode="infer")
        probs = softmax_rows(logits.data)
        preds = probs.argmax(axis=1)
        for (_, label), pred, row in zip(chunk, preds, probs):
            true_labels.append(label)
            predicted.append(order[int(pred)])
            if mode == "binary":
                graft_scores.append(float(row[order.index(GRAFT)]))
    return build_report(true_labels, predicted, mode,
                        positive_scores=graft_scores if mode == "binary" else None)
