"""Evaluation metrics over ranked label predictions.

Single-label: flat hit@k and the top-1 confusion matrix. Multi-label: the
per-class (C-P, C-R, C-F1) and overall (O-P, O-R, O-F1) scores of the top-k
predicted labels, non-interpolated mAP over classes and per-image mAP@N.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class PredictionRanking:
    """Candidate labels sorted by descending cosine similarity."""

    instance_id: str
    labels: tuple
    scores: np.ndarray

    def __post_init__(self):
        scores = np.asarray(self.scores, dtype=np.float64)
        labels = tuple(self.labels)
        if scores.shape != (len(labels),):
            raise ValueError("labels and scores must have equal length")
        if len(set(labels)) != len(labels):
            raise ValueError("duplicate labels in ranking")
        if np.any(np.diff(scores) > 0):
            raise ValueError("scores must be non-increasing")
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "scores", scores)

    @property
    def ranked(self) -> list:
        return list(zip(self.labels, self.scores.tolist()))

    def top(self, k: int) -> tuple:
        return self.labels[:k]

    def rank_of(self, label: str) -> int:
        """1-based position of ``label``."""
        return self.labels.index(label) + 1

    def score_of(self, label: str) -> float:
        return float(self.scores[self.labels.index(label)])


def _f1(p: float, r: float) -> float:
    return 0.0 if p + r == 0 else 2.0 * p * r / (p + r)


def hit_at_k(rankings: Sequence[PredictionRanking], ground_truth: Sequence[str], k: int) -> float:
    """Fraction of instances whose true label is among the top ``k``."""
    if k < 1:
        raise ValueError("k must be at least 1")
    if len(rankings) != len(ground_truth):
        raise ValueError("rankings and ground truth differ in length")
    if not rankings:
        return 0.0
    hits = 0
    for r, gt in zip(rankings, ground_truth):
        if gt not in r.labels:
            raise ValueError(f"ground-truth label {gt!r} is not a candidate for {r.instance_id}")
        hits += gt in r.top(k)
    return hits / len(rankings)


@dataclass
class MultiLabelScores:
    cp: float
    cr: float
    cf1: float
    op: float
    or_: float
    of1: float

    def __iter__(self):
        return iter((self.cp, self.cr, self.cf1, self.op, self.or_, self.of1))


def multilabel_metrics(rankings: Sequence[PredictionRanking], gt_sets: Sequence, k: int = 3,
                       classes: Optional[Sequence[str]] = None) -> MultiLabelScores:
    """Precision/recall/F1 of the top-``k`` labels of every image.

    Per-class precision averages over every class that is predicted or
    present in the ground truth; a ground-truth class that is never predicted
    scores precision 0. Per-class recall averages over classes present in the
    ground truth only. ``classes`` overrides the class set for both averages.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    if len(rankings) != len(gt_sets):
        raise ValueError("rankings and ground truth differ in length")
    preds = [set(r.top(k)) for r in rankings]
    gts = [set(g) for g in gt_sets]
    n_correct = sum(len(p & g) for p, g in zip(preds, gts))
    n_pred = sum(len(p) for p in preds)
    n_gt = sum(len(g) for g in gts)
    op = n_correct / n_pred if n_pred else 0.0
    or_ = n_correct / n_gt if n_gt else 0.0

    pred_count: dict = {}
    gt_count: dict = {}
    hit_count: dict = {}
    for p, g in zip(preds, gts):
        for lab in p:
            pred_count[lab] = pred_count.get(lab, 0) + 1
        for lab in g:
            gt_count[lab] = gt_count.get(lab, 0) + 1
        for lab in p & g:
            hit_count[lab] = hit_count.get(lab, 0) + 1
    if classes is None:
        p_classes = set(pred_count) | set(gt_count)
        r_classes = set(gt_count)
    else:
        p_classes = r_classes = set(classes)
    precisions = [hit_count.get(c, 0) / pred_count[c] if pred_count.get(c) else 0.0
                  for c in sorted(p_classes)]
    recalls = [hit_count.get(c, 0) / gt_count[c] if gt_count.get(c) else 0.0
               for c in sorted(r_classes)]
    cp = float(np.mean(precisions)) if precisions else 0.0
    cr = float(np.mean(recalls)) if recalls else 0.0
    return MultiLabelScores(cp, cr, _f1(cp, cr), op, or_, _f1(op, or_))


def average_precision(scores, relevant) -> float:
    """Non-interpolated AP: mean precision at the rank of each relevant item.

    Items are ordered by descending score; ties keep their input order.
    """
    scores = np.asarray(scores, dtype=np.float64)
    relevant = np.asarray(relevant, dtype=bool)
    n_pos = int(relevant.sum())
    if n_pos == 0:
        raise ValueError("average precision needs at least one relevant item")
    order = np.argsort(-scores, kind="stable")
    rel = relevant[order]
    hits = np.cumsum(rel)
    ranks = np.arange(1, len(rel) + 1)
    return float(np.sum((hits / ranks)[rel]) / n_pos)


def mean_average_precision(rankings: Sequence[PredictionRanking], gt_sets: Sequence,
                           classes: Optional[Sequence[str]] = None) -> float:
    """Mean over classes of the AP of ranking all images by that class's score.

    Classes without a positive image are excluded with a warning.
    """
    if len(rankings) != len(gt_sets):
        raise ValueError("rankings and ground truth differ in length")
    if not rankings:
        raise ValueError("no rankings to evaluate")
    if classes is None:
        classes = rankings[0].labels
    gts = [set(g) for g in gt_sets]
    aps = []
    for c in classes:
        relevant = [c in g for g in gts]
        if not any(relevant):
            logger.warning("class %r has no positive images; excluded from mAP", c)
            continue
        scores = [r.score_of(c) for r in rankings]
        aps.append(average_precision(scores, relevant))
    if not aps:
        raise ValueError("no class has a positive image")
    return float(np.mean(aps))


def map_at_n(rankings: Sequence[PredictionRanking], gt_sets: Sequence, n: int = 10) -> float:
    """Mean over images of the AP of each image's top-``n`` labels.

    Per-image AP sums precision at each correct label within the top ``n``
    and divides by ``min(|gt|, n)``, so a perfect list scores 1.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    if len(rankings) != len(gt_sets):
        raise ValueError("rankings and ground truth differ in length")
    if not rankings:
        return 0.0
    total = 0.0
    for r, g in zip(rankings, gt_sets):
        g = set(g)
        if not g:
            continue
        hits = 0
        acc = 0.0
        for pos, lab in enumerate(r.top(n), start=1):
            if lab in g:
                hits += 1
                acc += hits / pos
        total += acc / min(len(g), n)
    return total / len(rankings)


def confusion_matrix(rankings: Sequence[PredictionRanking], ground_truth: Sequence[str],
                     classes: Optional[Sequence[str]] = None) -> tuple:
    """Counts of (true class, top-1 predicted class).

    Returns ``(matrix, classes)``; rows and columns follow ``classes``, which
    defaults to the candidate order of the first ranking.
    """
    if len(rankings) != len(ground_truth):
        raise ValueError("rankings and ground truth differ in length")
    if classes is None:
        classes = rankings[0].labels if rankings else ()
    classes = tuple(classes)
    index = {c: k for k, c in enumerate(classes)}
    mat = np.zeros((len(classes), len(classes)), dtype=np.int64)
    for r, gt in zip(rankings, ground_truth):
        mat[index[gt], index[r.labels[0]]] += 1
    return mat, classes


@dataclass
class EvalReport:
    hit_at_k: dict = field(default_factory=dict)
    cp: Optional[float] = None
    cr: Optional[float] = None
    cf1: Optional[float] = None
    op: Optional[float] = None
    or_: Optional[float] = None
    of1: Optional[float] = None
    map: Optional[float] = None
    map_at_n: dict = field(default_factory=dict)
    confusion: Optional[np.ndarray] = None
    classes: tuple = ()
    n_instances: int = 0

    def flat(self) -> dict:
        """Scalar metrics as ``name -> value`` in a stable order."""
        out = {"n_instances": self.n_instances}
        for k in sorted(self.hit_at_k):
            out[f"hit@{k}"] = self.hit_at_k[k]
        names = [("C-P", self.cp), ("C-R", self.cr), ("C-F1", self.cf1),
                 ("O-P", self.op), ("O-R", self.or_), ("O-F1", self.of1), ("mAP", self.map)]
        for name, v in names:
            if v is not None:
                out[name] = v
        for n in sorted(self.map_at_n):
            out[f"mAP@{n}"] = self.map_at_n[n]
        return out

    def to_text(self) -> str:
        lines = [f"{k}={v!r}" if isinstance(v, float) else f"{k}={v}"
                 for k, v in self.flat().items()]
        if self.confusion is not None:
            lines.append("classes=" + ",".join(self.classes))
            for c, row in zip(self.classes, self.confusion):
                lines.append(f"confusion.{c}=" + " ".join(str(int(v)) for v in row))
        return "\n".join(lines) + "\n"

    def to_dict(self) -> dict:
        d = {
            "n_instances": self.n_instances,
            "hit_at_k": {str(k): v for k, v in sorted(self.hit_at_k.items())},
            "cp": self.cp, "cr": self.cr, "cf1": self.cf1,
            "op": self.op, "or": self.or_, "of1": self.of1,
            "map": self.map,
            "map_at_n": {str(n): v for n, v in sorted(self.map_at_n.items())},
            "classes": list(self.classes),
            "confusion": None if self.confusion is None else self.confusion.tolist(),
        }
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> "EvalReport":
        conf = d.get("confusion")
        return cls(
            hit_at_k={int(k): v for k, v in d.get("hit_at_k", {}).items()},
            cp=d.get("cp"), cr=d.get("cr"), cf1=d.get("cf1"),
            op=d.get("op"), or_=d.get("or"), of1=d.get("of1"),
            map=d.get("map"),
            map_at_n={int(k): v for k, v in d.get("map_at_n", {}).items()},
            confusion=None if conf is None else np.asarray(conf, dtype=np.int64),
            classes=tuple(d.get("classes", ())),
            n_instances=d.get("n_instances", 0),
        )


def evaluate_single_label(rankings, ground_truth, ks=(1, 2, 5, 10)) -> EvalReport:
    n_cand = len(rankings[0].labels) if rankings else 0
    hits = {k: hit_at_k(rankings, ground_truth, k) for k in ks if k <= max(n_cand, 1)}
    mat, classes = confusion_matrix(rankings, ground_truth)
    return EvalReport(hit_at_k=hits, confusion=mat, classes=classes,
                      n_instances=len(rankings))


def evaluate_multi_label(rankings, gt_sets, k: int = 3, map_ns=(10,)) -> EvalReport:
    s = multilabel_metrics(rankings, gt_sets, k)
    return EvalReport(cp=s.cp, cr=s.cr, cf1=s.cf1, op=s.op, or_=s.or_, of1=s.of1,
                      map=mean_average_precision(rankings, gt_sets),
                      map_at_n={n: map_at_n(rankings, gt_sets, n) for n in map_ns},
                      n_instances=len(rankings))
