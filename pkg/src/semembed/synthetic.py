"""Synthetic labelled feature data with a known linear relation to the labels."""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .embedding import Dataset, EmbeddingModel, Instance, LabelTable

TRAIN_FRACTION = 0.8
# pairwise label cosine at overlap=1; keeps the labels distinguishable
MAX_LABEL_COSINE = 0.95


@dataclass(frozen=True)
class SyntheticSpec:
    classes: int = 10
    per_class: int = 50
    feature_dim: int = 16
    embed_dim: int = 8
    noise_sigma: float = 0.05
    class_overlap: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.classes < 2:
            raise ValueError("need at least 2 classes")
        if self.per_class < 2:
            raise ValueError("need at least 2 instances per class")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be non-negative")
        if not 0.0 <= self.class_overlap <= 1.0:
            raise ValueError("class_overlap must lie in [0, 1]")
        if self.embed_dim < 1:
            raise ValueError("embed_dim must be at least 1")
        if self.feature_dim < self.embed_dim:
            raise ValueError(f"feature_dim ({self.feature_dim}) < embed_dim ({self.embed_dim}): "
                             "the hidden map would not be injective")


class SyntheticData(NamedTuple):
    train: Dataset
    test: Dataset
    labels: LabelTable
    mixing: np.ndarray  # hidden F x D map from label space to feature space


def label_id(k: int, classes: int) -> str:
    return f"class{k:0{len(str(classes - 1))}d}"


def _label_vectors(rng, C: int, D: int, overlap: float) -> np.ndarray:
    """Unit label vectors with pairwise cosine ``0.95 * overlap``.

    With ``C <= D`` the vectors are a Cholesky factor of the target Gram
    matrix expressed in a random orthonormal basis, so every pairwise cosine
    is exact. With ``C > D`` that Gram matrix is not realizable; random unit
    directions are blended with a shared center instead.
    """
    rho = MAX_LABEL_COSINE * overlap
    if C <= D:
        Q, _ = np.linalg.qr(rng.standard_normal((D, C)))
        gram = (1.0 - rho) * np.eye(C) + rho * np.ones((C, C))
        V = np.linalg.cholesky(gram) @ Q.T
    else:
        G = rng.standard_normal((C + 1, D))
        G /= np.linalg.norm(G, axis=1, keepdims=True)
        V = np.sqrt(1.0 - rho) * G[1:] + np.sqrt(rho) * G[0]
    return V / np.linalg.norm(V, axis=1, keepdims=True)


def generate_synthetic(spec: SyntheticSpec) -> SyntheticData:
    """Draw labels, a hidden full-rank map and noisy instances; split 80/20 per class."""
    rng = np.random.default_rng(spec.seed)
    C, D, F = spec.classes, spec.embed_dim, spec.feature_dim
    S = _label_vectors(rng, C, D, spec.class_overlap)
    while True:
        M = rng.standard_normal((F, D)) / np.sqrt(D)
        if np.linalg.matrix_rank(M) == D:
            break
    ids = [label_id(k, C) for k in range(C)]
    labels = LabelTable(ids, S)

    n_train = int(round(TRAIN_FRACTION * spec.per_class))
    train, test = [], []
    for k, lid in enumerate(ids):
        X = S[k] @ M.T + spec.noise_sigma * rng.standard_normal((spec.per_class, F))
        order = rng.permutation(spec.per_class)
        for rank, j in enumerate(order):
            inst = Instance(f"{lid}_{j:04d}", X[j], lid)
            (train if rank < n_train else test).append(inst)
    return SyntheticData(Dataset(train), Dataset(test), labels, M)


def oracle_model(data: SyntheticData) -> EmbeddingModel:
    """The pseudo-inverse of the hidden map; exact on noiseless data."""
    return EmbeddingModel(np.linalg.pinv(data.mixing))


def split_classes(data: SyntheticData, seen: list) -> tuple:
    """Split into (seen train set, unseen test set, seen labels, unseen labels)."""
    seen_set = set(seen)
    unseen = [lid for lid in data.labels.ids if lid not in seen_set]
    return (data.train.filter_labels(seen), data.test.filter_labels(unseen),
            data.labels.subset(seen), data.labels.subset(unseen))
