"""Ranking, discriminative and difference losses with exact (sub)gradients.

All distances are cosine distances between unit vectors, ``d(u, v) = 1 - u.v``.
A hinge ``max(0, a)`` contributes gradient only when ``a > 0``; at ``a == 0``
the subgradient is taken to be zero.

Every per-item loss returns a :class:`LossValueAndGrad` whose gradient is with
respect to the model weights. :func:`combined_objective` evaluates a whole
batch in vectorized form; it is tested against the per-item functions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .embedding import EmbeddingModel, Instance, LabelTable, _raw, _raw_many, backprop

DISC_MODES = ("none", "contrastive", "triplet")


@dataclass(frozen=True)
class LossConfig:
    margin_rank: float = 0.1
    margin_disc: float = 1.0
    lambda1: float = 1.0
    lambda2: float = 1.0
    lambda3: float = 1.0
    weight_decay: float = 0.0005
    disc_mode: str = "none"
    difference_enabled: bool = False
    rank_enabled: bool = True

    def __post_init__(self):
        if self.margin_rank < 0 or self.margin_disc < 0:
            raise ValueError("margins must be non-negative")
        if min(self.lambda1, self.lambda2, self.lambda3) < 0:
            raise ValueError("balance weights must be non-negative")
        if self.weight_decay < 0:
            raise ValueError("weight_decay must be non-negative")
        if self.disc_mode not in DISC_MODES:
            raise ValueError(f"disc_mode must be one of {DISC_MODES}, got {self.disc_mode!r}")
        if not (self.rank_enabled or self.difference_enabled or self.disc_mode != "none"):
            raise ValueError("at least one loss term must be enabled")

    @property
    def is_rank_only(self) -> bool:
        """True when the objective reduces to the ranking baseline."""
        disc_off = self.disc_mode == "none" or self.lambda2 == 0
        diff_off = not self.difference_enabled or self.lambda3 == 0
        return self.rank_enabled and disc_off and diff_off

    def describe(self) -> str:
        if self.is_rank_only:
            return "rank-only baseline"
        parts = []
        if self.rank_enabled:
            parts.append("rank")
        if self.disc_mode != "none" and self.lambda2 != 0:
            parts.append(self.disc_mode)
        if self.difference_enabled and self.lambda3 != 0:
            parts.append("difference")
        return "+".join(parts) if parts else "weight-decay only"


@dataclass
class LossValueAndGrad:
    value: float
    grad: np.ndarray

    def __iter__(self):
        yield self.value
        yield self.grad


def _hinge(a: float) -> tuple:
    """Value and derivative of ``max(0, a)`` with zero subgradient at the kink."""
    return (a, 1.0) if a > 0 else (0.0, 0.0)


def ranking_loss(model: EmbeddingModel, instance: Instance, labels: LabelTable,
                 m: float = 0.1) -> LossValueAndGrad:
    """Sum of hinge terms over every label other than the true one."""
    t = labels.index(instance.label)
    z, norm = _raw(model, instance.features)
    f = z / norm
    S = labels.vectors
    sims = S @ f
    args = m - sims[t] + sims
    active = args > 0
    active[t] = False
    value = float(np.sum(args[active]))
    if not active.any():
        return LossValueAndGrad(value, np.zeros_like(model.weights))
    grad_f = S[active].sum(axis=0) - active.sum() * S[t]
    return LossValueAndGrad(value, backprop(model, instance.features, grad_f))


def contrastive_loss(model: EmbeddingModel, a: Instance, b: Instance,
                     m: float = 1.0) -> LossValueAndGrad:
    fa = model.project(a.features)
    fb = model.project(b.features)
    d = 1.0 - float(np.dot(fa, fb))
    if a.label == b.label:
        value, ga, gb = d, -fb, -fa
    else:
        value, slope = _hinge(m - d)
        ga, gb = slope * fb, slope * fa
    if value == 0.0 and a.label != b.label:
        return LossValueAndGrad(0.0, np.zeros_like(model.weights))
    grad = backprop(model, a.features, ga) + backprop(model, b.features, gb)
    return LossValueAndGrad(value, grad)


def triplet_loss(model: EmbeddingModel, ref: Instance, pos: Instance, neg: Instance,
                 m: float = 1.0) -> LossValueAndGrad:
    if ref.label != pos.label:
        raise ValueError(f"positive label {pos.label!r} differs from reference {ref.label!r}")
    if ref.label == neg.label:
        raise ValueError(f"negative shares the reference label {ref.label!r}")
    fr = model.project(ref.features)
    fp = model.project(pos.features)
    fn = model.project(neg.features)
    d_pos = 1.0 - float(np.dot(fr, fp))
    d_neg = 1.0 - float(np.dot(fr, fn))
    value, slope = _hinge(m + d_pos - d_neg)
    if slope == 0.0:
        return LossValueAndGrad(0.0, np.zeros_like(model.weights))
    grad = (backprop(model, ref.features, fn - fp)
            + backprop(model, pos.features, -fr)
            + backprop(model, neg.features, fr))
    return LossValueAndGrad(value, grad)


def difference_loss(model: EmbeddingModel, a: Instance, b: Instance,
                    labels: LabelTable) -> LossValueAndGrad:
    """Squared mismatch between the image difference and the label difference."""
    sa = labels.vector(a.label)
    sb = labels.vector(b.label)
    fa = model.project(a.features)
    fb = model.project(b.features)
    r = (fa - fb) - (sa - sb)
    value = float(np.dot(r, r))
    grad = backprop(model, a.features, 2.0 * r) + backprop(model, b.features, -2.0 * r)
    return LossValueAndGrad(value, grad)


# -- batched evaluation ------------------------------------------------------

class _Accumulator:
    """Collects (features, dL/df) rows and pulls them back through the projection."""

    def __init__(self, model: EmbeddingModel):
        self.model = model
        self._X = []
        self._G = []

    def embed(self, X):
        Z, norms = _raw_many(self.model, X)
        return Z / norms[:, None]

    def add(self, X, G):
        self._X.append(np.asarray(X, dtype=np.float64))
        self._G.append(np.asarray(G, dtype=np.float64))

    def grad(self) -> np.ndarray:
        if not self._X:
            return np.zeros_like(self.model.weights)
        X = np.vstack(self._X)
        G = np.vstack(self._G)
        Z, norms = _raw_many(self.model, X)
        Fm = Z / norms[:, None]
        proj = (G - Fm * np.sum(Fm * G, axis=1, keepdims=True)) / norms[:, None]
        return proj.T @ X


def _stack(instances) -> np.ndarray:
    return np.stack([inst.features for inst in instances])


def _batch_ranking(acc: _Accumulator, instances, labels: LabelTable, m: float) -> float:
    if not instances:
        return 0.0
    X = _stack(instances)
    t = np.array([labels.index(inst.label) for inst in instances])
    Fm = acc.embed(X)
    S = labels.vectors
    sims = Fm @ S.T
    rows = np.arange(len(t))
    args = m - sims[rows, t][:, None] + sims
    active = args > 0
    active[rows, t] = False
    value = float(np.sum(np.where(active, args, 0.0)))
    G = active.astype(np.float64) @ S - active.sum(axis=1)[:, None] * S[t]
    acc.add(X, G)
    return value


def _batch_contrastive(acc: _Accumulator, pairs, m: float) -> float:
    if not pairs:
        return 0.0
    Xa = _stack([p[0] for p in pairs])
    Xb = _stack([p[1] for p in pairs])
    same = np.array([p[0].label == p[1].label for p in pairs])
    Fa, Fb = acc.embed(Xa), acc.embed(Xb)
    d = 1.0 - np.sum(Fa * Fb, axis=1)
    hinge = m - d
    active = ~same & (hinge > 0)
    value = float(np.sum(d[same]) + np.sum(hinge[active]))
    # d/dfa of d is -fb; of the hinge it is +fb
    coef = np.where(same, -1.0, np.where(active, 1.0, 0.0))[:, None]
    acc.add(Xa, coef * Fb)
    acc.add(Xb, coef * Fa)
    return value


def _batch_triplet(acc: _Accumulator, triplets, m: float) -> float:
    if not triplets:
        return 0.0
    for r, p, n in triplets:
        if r.label != p.label or r.label == n.label:
            raise ValueError(f"invalid triplet labels ({r.label}, {p.label}, {n.label})")
    Xr = _stack([t[0] for t in triplets])
    Xp = _stack([t[1] for t in triplets])
    Xn = _stack([t[2] for t in triplets])
    Fr, Fp, Fn = acc.embed(Xr), acc.embed(Xp), acc.embed(Xn)
    args = m - np.sum(Fr * Fp, axis=1) + np.sum(Fr * Fn, axis=1)
    active = (args > 0)[:, None].astype(np.float64)
    value = float(np.sum(np.where(args > 0, args, 0.0)))
    acc.add(Xr, active * (Fn - Fp))
    acc.add(Xp, -active * Fr)
    acc.add(Xn, active * Fr)
    return value


def _batch_difference(acc: _Accumulator, pairs, labels: LabelTable) -> float:
    if not pairs:
        return 0.0
    Xa = _stack([p[0] for p in pairs])
    Xb = _stack([p[1] for p in pairs])
    Sa = labels.vectors[[labels.index(p[0].label) for p in pairs]]
    Sb = labels.vectors[[labels.index(p[1].label) for p in pairs]]
    Fa, Fb = acc.embed(Xa), acc.embed(Xb)
    R = (Fa - Fb) - (Sa - Sb)
    value = float(np.sum(R * R))
    acc.add(Xa, 2.0 * R)
    acc.add(Xb, -2.0 * R)
    return value


def check_batch_mode(batch, cfg: LossConfig) -> None:
    if batch.pairs and cfg.disc_mode != "contrastive":
        raise ValueError(f"batch carries pairs but disc_mode is {cfg.disc_mode!r}")
    if batch.triplets and cfg.disc_mode != "triplet":
        raise ValueError(f"batch carries triplets but disc_mode is {cfg.disc_mode!r}")


def combined_objective(model: EmbeddingModel, batch, labels: LabelTable,
                       cfg: LossConfig, *, return_terms: bool = False):
    """Weighted sum of the enabled terms over a batch plus ``(w/2)|W|^2``.

    With ``return_terms=True`` a dict of the unweighted per-term sums is
    returned alongside the result.
    """
    check_batch_mode(batch, cfg)
    acc_terms = {}
    total_grad = cfg.weight_decay * model.weights
    value = 0.5 * cfg.weight_decay * float(np.sum(model.weights ** 2))

    def run(name, weight, fn, *args):
        nonlocal value, total_grad
        acc = _Accumulator(model)
        v = fn(acc, *args)
        acc_terms[name] = v
        if weight != 0.0:
            value += weight * v
            total_grad = total_grad + weight * acc.grad()

    if cfg.rank_enabled:
        rank_labels = getattr(batch, "rank_labels", None)
        rank_table = labels if rank_labels is None else labels.subset(rank_labels)
        run("rank", cfg.lambda1, _batch_ranking, batch.ranking_instances, rank_table,
            cfg.margin_rank)
    if cfg.disc_mode == "contrastive":
        run("contrastive", cfg.lambda2, _batch_contrastive, batch.pairs, cfg.margin_disc)
    elif cfg.disc_mode == "triplet":
        run("triplet", cfg.lambda2, _batch_triplet, batch.triplets, cfg.margin_disc)
    if cfg.difference_enabled:
        run("difference", cfg.lambda3, _batch_difference, batch.diff_pairs, labels)

    result = LossValueAndGrad(value, total_grad)
    if return_terms:
        return result, acc_terms
    return result
