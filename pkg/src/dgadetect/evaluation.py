"""Confusion matrix, accuracy/precision/recall/F1 and model comparison.

The positive class is DGA (label 1).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Dict, Iterable, Tuple

from .errors import EmptyInput, EmptyMatrix

METRICS = ("accuracy", "precision", "recall", "f1")


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int = 0
    fp: int = 0
    tn: int = 0
    fn: int = 0

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


@dataclass(frozen=True)
class EvalReport:
    accuracy: float
    precision: float
    recall: float
    f1: float
    matrix: ConfusionMatrix

    def as_dict(self) -> Dict[str, float]:
        m = self.matrix
        return {
            "accuracy": self.accuracy,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "tp": m.tp,
            "fp": m.fp,
            "tn": m.tn,
            "fn": m.fn,
        }

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), separators=(",", ":"))

    @classmethod
    def from_dict(cls, d) -> "EvalReport":
        cm = ConfusionMatrix(int(d["tp"]), int(d["fp"]), int(d["tn"]), int(d["fn"]))
        return cls(float(d["accuracy"]), float(d["precision"]), float(d["recall"]), float(d["f1"]), cm)


def confusion(scores: Iterable[Tuple[float, int]], threshold: float = 0.5) -> ConfusionMatrix:
    """Tally predictions; a score is DGA only when strictly above ``threshold``."""
    tp = fp = tn = fn = 0
    for score, label in scores:
        pred = score > threshold
        if int(label) == 1:
            if pred:
                tp += 1
            else:
                fn += 1
        elif pred:
            fp += 1
        else:
            tn += 1
    cm = ConfusionMatrix(tp, fp, tn, fn)
    if cm.total == 0:
        raise EmptyInput("no scores to evaluate")
    return cm


def _ratio(num: int, den: int) -> float:
    return num / den if den else 0.0


def f1_score(precision: float, recall: float) -> float:
    if precision + recall <= 0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def metrics(cm: ConfusionMatrix) -> EvalReport:
    """Zero denominators yield 0 for precision, recall and F1."""
    if cm.total == 0:
        raise EmptyMatrix("confusion matrix is empty")
    precision = _ratio(cm.tp, cm.tp + cm.fp)
    recall = _ratio(cm.tp, cm.tp + cm.fn)
    return EvalReport(
        accuracy=(cm.tp + cm.tn) / cm.total,
        precision=precision,
        recall=recall,
        f1=f1_score(precision, recall),
        matrix=cm,
    )


def evaluate(scores, labels, threshold: float = 0.5) -> EvalReport:
    return metrics(confusion(zip(scores, labels), threshold))


@dataclass(frozen=True)
class Comparison:
    deltas: Dict[str, float]
    winners: Dict[str, str]

    def as_dict(self, a_name: str = "a", b_name: str = "b") -> dict:
        names = {"a": a_name, "b": b_name, "tie": "tie"}
        return {
            "models": [a_name, b_name],
            "deltas": dict(self.deltas),
            "winners": {k: names[v] for k, v in self.winners.items()},
        }


def compare(a: EvalReport, b: EvalReport) -> Comparison:
    """Per-metric ``a - b`` and the strict winner ("a", "b" or "tie")."""
    deltas, winners = {}, {}
    for name in METRICS:
        va, vb = getattr(a, name), getattr(b, name)
        deltas[name] = va - vb
        winners[name] = "a" if va > vb else "b" if vb > va else "tie"
    return Comparison(deltas, winners)
