"""Semantic space primitives: label tables, instances and the projection model.

Images are represented by fixed feature vectors. A learned linear map
followed by L2 normalization sends them onto the unit sphere of the label
embedding space, where similarity is measured with the cosine distance.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

logger = logging.getLogger(__name__)

DEFAULT_EPSILON = 1e-12
NORM_WARN_TOL = 1e-3
NORM_ERROR_TOL = 0.5


class DegenerateProjectionError(ValueError):
    """Raised when ``W @ x`` is too short to define a direction."""


def _as_vector(v, name="vector") -> np.ndarray:
    arr = np.asarray(v, dtype=np.float64)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional, got shape {arr.shape}")
    return arr


class LabelTable:
    """Ordered, unit-normalized label embeddings.

    Vectors are always renormalized on construction. A vector whose norm
    deviates from 1 by more than ``1e-3`` triggers a warning; with
    ``strict=True`` a deviation above ``0.5`` is an error, since it usually
    means the wrong file was passed.
    """

    def __init__(self, label_ids: Sequence[str], vectors, *, strict: bool = False):
        ids = [str(i) for i in label_ids]
        mat = np.array(vectors, dtype=np.float64, copy=True)
        if mat.ndim == 1 and len(ids) == 0:
            mat = mat.reshape(0, 0)
        if mat.ndim != 2:
            raise ValueError("label vectors must form a 2-d array")
        if mat.shape[0] != len(ids):
            raise ValueError(f"{len(ids)} label ids but {mat.shape[0]} vectors")
        if len(set(ids)) != len(ids):
            seen = set()
            dup = next(i for i in ids if i in seen or seen.add(i))
            raise ValueError(f"duplicate label id {dup!r}")
        if not np.all(np.isfinite(mat)):
            raise ValueError("label vectors contain non-finite values")
        norms = np.linalg.norm(mat, axis=1)
        for lid, n in zip(ids, norms):
            if n == 0.0:
                raise ValueError(f"label {lid!r} has a zero vector")
            dev = abs(n - 1.0)
            if strict and dev > NORM_ERROR_TOL:
                raise ValueError(f"label {lid!r} has norm {n:.6g}; expected unit norm")
            if dev > NORM_WARN_TOL:
                logger.warning("label %r has norm %.6g; renormalizing", lid, n)
        if len(ids):
            mat /= norms[:, None]
        mat.setflags(write=False)
        self._ids = tuple(ids)
        self._vectors = mat
        self._index = {lid: k for k, lid in enumerate(ids)}

    @classmethod
    def from_dict(cls, mapping: dict, **kwargs) -> "LabelTable":
        return cls(list(mapping), [mapping[k] for k in mapping], **kwargs)

    @property
    def ids(self) -> tuple:
        return self._ids

    @property
    def vectors(self) -> np.ndarray:
        """Read-only ``(L, D)`` matrix of unit vectors, in table order."""
        return self._vectors

    @property
    def dim(self) -> int:
        return self._vectors.shape[1]

    def __len__(self) -> int:
        return len(self._ids)

    def __contains__(self, label_id) -> bool:
        return label_id in self._index

    def __iter__(self):
        return iter(self._ids)

    def index(self, label_id: str) -> int:
        try:
            return self._index[label_id]
        except KeyError:
            raise KeyError(f"label {label_id!r} not in label table") from None

    def vector(self, label_id: str) -> np.ndarray:
        return self._vectors[self.index(label_id)]

    def subset(self, label_ids: Iterable[str]) -> "LabelTable":
        ids = list(label_ids)
        return LabelTable(ids, self._vectors[[self.index(i) for i in ids]])

    def union(self, other: "LabelTable") -> "LabelTable":
        """Concatenate two tables with disjoint ids (self first)."""
        overlap = set(self._ids) & set(other.ids)
        if overlap:
            raise ValueError(f"label tables overlap on {sorted(overlap)}")
        if len(self) and len(other) and self.dim != other.dim:
            raise ValueError("label tables have different dimensions")
        return LabelTable(self._ids + other.ids, np.vstack([self._vectors, other.vectors]))

    def __repr__(self) -> str:
        return f"LabelTable(n={len(self)}, dim={self.dim if len(self) else 0})"


@dataclass(frozen=True)
class Instance:
    """A feature vector with a single label."""

    id: str
    features: np.ndarray
    label: str

    def __post_init__(self):
        feats = _as_vector(self.features, "features").copy()
        feats.setflags(write=False)
        object.__setattr__(self, "features", feats)

    def __eq__(self, other):
        if not isinstance(other, Instance):
            return NotImplemented
        return (self.id == other.id and self.label == other.label
                and np.array_equal(self.features, other.features))

    def __hash__(self):
        return hash((self.id, self.label))


@dataclass
class Dataset:
    instances: list
    feature_dim: int = field(init=False)

    def __post_init__(self):
        self.instances = list(self.instances)
        if not self.instances:
            raise ValueError("dataset must contain at least one instance")
        dims = {inst.features.shape[0] for inst in self.instances}
        if len(dims) != 1:
            raise ValueError(f"inconsistent feature dimensions {sorted(dims)}")
        self.feature_dim = dims.pop()

    @property
    def size(self) -> int:
        return len(self.instances)

    def __len__(self) -> int:
        return len(self.instances)

    def __iter__(self):
        return iter(self.instances)

    def __getitem__(self, k):
        return self.instances[k]

    @property
    def labels(self) -> list:
        """Distinct labels in order of first appearance."""
        return list(dict.fromkeys(inst.label for inst in self.instances))

    def features_matrix(self) -> np.ndarray:
        return np.stack([inst.features for inst in self.instances])

    def by_label(self) -> dict:
        groups: dict = {}
        for inst in self.instances:
            groups.setdefault(inst.label, []).append(inst)
        return groups

    def filter_labels(self, label_ids: Iterable[str]) -> "Dataset":
        keep = set(label_ids)
        return Dataset([inst for inst in self.instances if inst.label in keep])

    def check_labels(self, labels: LabelTable) -> None:
        missing = sorted({inst.label for inst in self.instances} - set(labels.ids))
        if missing:
            raise ValueError(f"labels missing from label table: {missing}")


class EmbeddingModel:
    """Linear map ``W`` (``D x F``) followed by normalization to unit length."""

    def __init__(self, weights, epsilon: float = DEFAULT_EPSILON):
        w = np.array(weights, dtype=np.float64, copy=True)
        if w.ndim != 2:
            raise ValueError(f"weights must be 2-d (D x F), got shape {w.shape}")
        if not np.all(np.isfinite(w)):
            raise ValueError("weights contain non-finite values")
        if epsilon <= 0:
            raise ValueError("epsilon must be positive")
        self.weights = w
        self.epsilon = float(epsilon)

    @property
    def embed_dim(self) -> int:
        return self.weights.shape[0]

    @property
    def feature_dim(self) -> int:
        return self.weights.shape[1]

    @property
    def shape(self) -> tuple:
        return self.weights.shape

    def copy(self) -> "EmbeddingModel":
        return EmbeddingModel(self.weights, self.epsilon)

    def project(self, x) -> np.ndarray:
        return project(self, x)

    def project_many(self, X) -> np.ndarray:
        """Project the rows of ``X``; raises if any row is degenerate."""
        Z, norms = _raw_many(self, X)
        return Z / norms[:, None]

    def __repr__(self) -> str:
        return f"EmbeddingModel(D={self.embed_dim}, F={self.feature_dim})"


def cosine_distance(u, v) -> float:
    """``1 - u.v`` for unit vectors; lies in ``[0, 2]``."""
    u = _as_vector(u, "u")
    v = _as_vector(v, "v")
    if u.shape != v.shape:
        raise ValueError(f"dimension mismatch: {u.shape[0]} vs {v.shape[0]}")
    if np.array_equal(u, v):
        return 0.0
    # rounding can push u.v slightly outside [-1, 1]
    return min(max(1.0 - float(np.dot(u, v)), 0.0), 2.0)


def _raw(model: EmbeddingModel, x) -> tuple:
    x = _as_vector(x, "x")
    if x.shape[0] != model.feature_dim:
        raise ValueError(f"expected {model.feature_dim} features, got {x.shape[0]}")
    z = model.weights @ x
    norm = float(np.linalg.norm(z))
    if not norm > model.epsilon:
        raise DegenerateProjectionError(f"|W x| = {norm:.3g} <= epsilon={model.epsilon:g}")
    return z, norm


def _raw_many(model: EmbeddingModel, X) -> tuple:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != model.feature_dim:
        raise ValueError(f"expected (n, {model.feature_dim}) features, got {X.shape}")
    Z = X @ model.weights.T
    norms = np.linalg.norm(Z, axis=1)
    bad = np.flatnonzero(~(norms > model.epsilon))
    if bad.size:
        raise DegenerateProjectionError(
            f"{bad.size} degenerate projection(s), first at row {bad[0]}")
    return Z, norms


def project(model: EmbeddingModel, x) -> np.ndarray:
    z, norm = _raw(model, x)
    return z / norm


def project_jacobian(model: EmbeddingModel, x) -> np.ndarray:
    """Derivative of ``project(model, x)`` with respect to the weights.

    Returns an array of shape ``(D, D, F)`` whose entry ``[d, a, b]`` is
    ``d f_d / d W_ab``. With ``z = W x`` and ``f = z / |z|``::

        d f / d W_ab = (I - f f^T)[:, a] * x_b / |z|
    """
    x = _as_vector(x, "x")
    z, norm = _raw(model, x)
    f = z / norm
    P = (np.eye(f.shape[0]) - np.outer(f, f)) / norm
    return P[:, :, None] * x[None, None, :]


def backprop(model: EmbeddingModel, x, grad_f) -> np.ndarray:
    """Pull a gradient w.r.t. the embedding back to a ``D x F`` weight gradient."""
    z, norm = _raw(model, x)
    f = z / norm
    g = _as_vector(grad_f, "grad_f")
    return np.outer((g - f * np.dot(f, g)) / norm, x)
