"""Region mining for multi-label images.

A linear one-vs-rest scorer is fit on whole-image features, then reused to
score every candidate region; each ground-truth label of an image is assigned
its highest-scoring region. The result is a single-label training set.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .embedding import Instance

logger = logging.getLogger(__name__)

MIN_SIDE_FRACTION = 0.3
ASPECT_RANGE = (0.25, 4.0)


@dataclass(frozen=True)
class MultiLabelImage:
    id: str
    image_features: np.ndarray
    labels: tuple
    regions: tuple  # of (region_id, features)

    def __post_init__(self):
        feats = np.asarray(self.image_features, dtype=np.float64)
        labels = tuple(dict.fromkeys(self.labels))
        if not labels:
            raise ValueError(f"image {self.id!r} has no labels")
        regions = tuple((str(rid), np.asarray(f, dtype=np.float64)) for rid, f in self.regions)
        for rid, f in regions:
            if f.shape != feats.shape:
                raise ValueError(f"region {rid!r} of image {self.id!r} has {f.shape[0]} "
                                 f"features, image has {feats.shape[0]}")
        object.__setattr__(self, "image_features", feats)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "regions", regions)

    def region_matrix(self) -> np.ndarray:
        return np.stack([f for _, f in self.regions])


@dataclass
class MultiLabelScorer:
    label_ids: tuple
    score_weights: np.ndarray  # L x F
    biases: np.ndarray  # L

    def scores(self, X) -> np.ndarray:
        """``(n, L)`` scores for the rows of ``X``."""
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        return X @ self.score_weights.T + self.biases

    def label_index(self, label: str) -> int:
        try:
            return self.label_ids.index(label)
        except ValueError:
            raise KeyError(f"label {label!r} unknown to the scorer") from None


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def train_scorer(images: Sequence[MultiLabelImage], epochs: int = 50, lr: float = 0.1,
                 seed=0, label_ids: Optional[Sequence[str]] = None) -> MultiLabelScorer:
    """Independent logistic regressions (one per label) fit by per-image SGD.

    ``label_ids`` fixes the label set and its order (default: sorted labels
    of ``images``). A label with no positive image, or with no negative one,
    keeps an all-zero row and a warning is logged.
    """
    if label_ids is None:
        label_ids = sorted({lab for img in images for lab in img.labels})
    label_ids = tuple(label_ids)
    if len(label_ids) < 2:
        raise ValueError("need at least 2 distinct labels to train a scorer")
    X = np.stack([img.image_features for img in images])
    Y = np.array([[lab in img.labels for lab in label_ids] for img in images], dtype=np.float64)
    W = np.zeros((len(label_ids), X.shape[1]))
    b = np.zeros(len(label_ids))
    active = np.ones(len(label_ids), dtype=bool)
    for j, lab in enumerate(label_ids):
        n_pos = Y[:, j].sum()
        if n_pos == 0:
            logger.warning("label %r has no positive images; its scorer row stays zero", lab)
            active[j] = False
        elif n_pos == len(images):
            logger.warning("label %r is present in every image; its scorer row stays zero", lab)
            active[j] = False
    rng = np.random.default_rng(seed)
    for _ in range(epochs):
        for i in rng.permutation(len(images)):
            err = (_sigmoid(W @ X[i] + b) - Y[i]) * active
            W -= lr * np.outer(err, X[i])
            b -= lr * err
    return MultiLabelScorer(label_ids, W, b)


def assign_regions(score_matrix) -> np.ndarray:
    """Best region per label column; ties go to the lowest region index."""
    S = np.asarray(score_matrix, dtype=np.float64)
    if S.ndim != 2 or S.shape[0] == 0:
        raise ValueError("score matrix must be (regions x labels) with at least one region")
    return np.argmax(S, axis=0)


def mine_regions(image: MultiLabelImage, scorer: MultiLabelScorer) -> list:
    """One single-label instance per ground-truth label, using its best region."""
    if not image.regions:
        raise ValueError(f"image {image.id!r} has no candidate regions")
    cols = [scorer.label_index(lab) for lab in image.labels]
    S = scorer.scores(image.region_matrix())[:, cols]
    best = assign_regions(S)
    out = []
    for lab, r in zip(image.labels, best):
        rid, feats = image.regions[int(r)]
        out.append(Instance(f"{image.id}/{rid}", feats, lab))
    return out


def mine_dataset(images: Sequence[MultiLabelImage], scorer: MultiLabelScorer) -> list:
    return [inst for img in images for inst in mine_regions(img, scorer)]


def filter_proposals(proposals, image_w: float, image_h: float) -> list:
    """Keep boxes ``(x, y, w, h)`` at least 0.3 of the image per side with aspect in [0.25, 4]."""
    if image_w <= 0 or image_h <= 0:
        raise ValueError("image dimensions must be positive")
    lo, hi = ASPECT_RANGE
    kept = []
    for box in proposals:
        _, _, w, h = box
        if w <= 0 or h <= 0:
            continue
        if w >= MIN_SIDE_FRACTION * image_w and h >= MIN_SIDE_FRACTION * image_h \
                and lo <= w / h <= hi:
            kept.append(box)
    return kept
