"""Central finite-difference checks of the analytic loss gradients."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .embedding import EmbeddingModel, Instance, LabelTable, project, project_jacobian
from .losses import (LossConfig, combined_objective, contrastive_loss, difference_loss,
                     ranking_loss, triplet_loss)
from .sampling import Batch

FD_STEP = 1e-5
REL_TOL = 1e-4
KINK_GAP = 1e-3
# entries smaller than this are compared on an absolute scale
REL_FLOOR = 1e-6

KINDS = ("jacobian", "ranking", "contrastive", "triplet", "difference", "combined")


def finite_difference(fn, W: np.ndarray, step: float = FD_STEP) -> np.ndarray:
    """Central differences of the scalar (or array-valued) ``fn`` w.r.t. every entry of ``W``."""
    W = np.asarray(W, dtype=np.float64)
    base = np.asarray(fn(W))
    out = np.zeros(base.shape + W.shape)
    for idx in np.ndindex(W.shape):
        Wp = W.copy()
        Wm = W.copy()
        Wp[idx] += step
        Wm[idx] -= step
        out[(...,) + idx] = (np.asarray(fn(Wp)) - np.asarray(fn(Wm))) / (2.0 * step)
    return out


def relative_error(analytic, numeric, floor: float = REL_FLOOR) -> float:
    """Largest entrywise ``|a - n| / max(|a|, |n|, floor)``."""
    a = np.asarray(analytic, dtype=np.float64)
    n = np.asarray(numeric, dtype=np.float64)
    denom = np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)
    return float(np.max(np.abs(a - n) / denom)) if a.size else 0.0


@dataclass
class CheckResult:
    kind: str
    checked: int = 0
    max_rel_error: float = 0.0
    failures: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.checked > 0 and not self.failures


def _unit(rng, d):
    v = rng.standard_normal(d)
    return v / np.linalg.norm(v)


def _labels(rng, n, D):
    return LabelTable([f"l{k}" for k in range(n)], [_unit(rng, D) for _ in range(n)])


def _inst(rng, F, label, name):
    return Instance(name, rng.standard_normal(F), label)


def _model(rng, D, F):
    return EmbeddingModel(rng.uniform(-1.0, 1.0, size=(D, F)))


def _dot(model, a, b):
    return float(np.dot(project(model, a.features), project(model, b.features)))


def _ranking_args(model, inst, labels, m):
    f = project(model, inst.features)
    sims = labels.vectors @ f
    t = labels.index(inst.label)
    return [m - sims[t] + s for k, s in enumerate(sims) if k != t]


def _contrastive_args(model, a, b, m):
    if a.label == b.label:
        return []
    return [m - (1.0 - _dot(model, a, b))]


def _triplet_args(model, r, p, n, m):
    return [m + (1.0 - _dot(model, r, p)) - (1.0 - _dot(model, r, n))]


def _away_from_kinks(args) -> bool:
    return all(abs(a) > KINK_GAP for a in args)


def _draw_config(kind, rng):
    """A random (value_fn, analytic_grad, W) triple, or None when too close to a kink."""
    D = int(rng.integers(2, 6))
    F = int(rng.integers(2, 7))
    model = _model(rng, D, F)
    W0 = model.weights.copy()
    labels = _labels(rng, int(rng.integers(2, 6)), D)
    ids = labels.ids

    def with_w(W):
        return EmbeddingModel(W)

    if kind == "jacobian":
        x = rng.standard_normal(F)
        if np.linalg.norm(W0 @ x) <= 0.1:
            return None
        return (lambda W: project(with_w(W), x)), project_jacobian(model, x), W0

    if kind == "ranking":
        inst = _inst(rng, F, ids[int(rng.integers(len(ids)))], "x")
        m = float(rng.uniform(0.05, 1.5))
        if not _away_from_kinks(_ranking_args(model, inst, labels, m)):
            return None
        grad = ranking_loss(model, inst, labels, m).grad
        return (lambda W: ranking_loss(with_w(W), inst, labels, m).value), grad, W0

    if kind == "contrastive":
        la = ids[int(rng.integers(len(ids)))]
        lb = la if rng.random() < 0.5 else ids[int(rng.integers(len(ids)))]
        a, b = _inst(rng, F, la, "a"), _inst(rng, F, lb, "b")
        m = float(rng.uniform(0.2, 2.0))
        if not _away_from_kinks(_contrastive_args(model, a, b, m)):
            return None
        grad = contrastive_loss(model, a, b, m).grad
        return (lambda W: contrastive_loss(with_w(W), a, b, m).value), grad, W0

    if kind == "triplet":
        lr_, ln = rng.choice(len(ids), size=2, replace=False)
        r, p = _inst(rng, F, ids[lr_], "r"), _inst(rng, F, ids[lr_], "p")
        n = _inst(rng, F, ids[ln], "n")
        m = float(rng.uniform(0.2, 2.0))
        if not _away_from_kinks(_triplet_args(model, r, p, n, m)):
            return None
        grad = triplet_loss(model, r, p, n, m).grad
        return (lambda W: triplet_loss(with_w(W), r, p, n, m).value), grad, W0

    if kind == "difference":
        a = _inst(rng, F, ids[int(rng.integers(len(ids)))], "a")
        b = _inst(rng, F, ids[int(rng.integers(len(ids)))], "b")
        grad = difference_loss(model, a, b, labels).grad
        return (lambda W: difference_loss(with_w(W), a, b, labels).value), grad, W0

    if kind == "combined":
        mode = ("contrastive", "triplet")[int(rng.integers(2))]
        cfg = LossConfig(margin_rank=float(rng.uniform(0.05, 1.0)),
                         margin_disc=float(rng.uniform(0.2, 2.0)),
                         lambda1=float(rng.uniform(0, 2)), lambda2=float(rng.uniform(0, 2)),
                         lambda3=float(rng.uniform(0, 2)),
                         weight_decay=float(rng.uniform(0, 0.01)),
                         disc_mode=mode, difference_enabled=True)
        pool = [_inst(rng, F, ids[k % len(ids)], f"i{k}") for k in range(6)]
        args = []
        for inst in pool:
            args += _ranking_args(model, inst, labels, cfg.margin_rank)
        pairs, triplets = [], []
        if mode == "contrastive":
            for _ in range(3):
                i, j = rng.choice(len(pool), size=2, replace=False)
                pairs.append((pool[i], pool[j]))
                args += _contrastive_args(model, pool[i], pool[j], cfg.margin_disc)
            diff_pairs = list(pairs)
        else:
            r = pool[0]
            p = _inst(rng, F, r.label, "p")
            negs = [inst for inst in pool if inst.label != r.label][:3]
            triplets = [(r, p, n) for n in negs]
            for t in triplets:
                args += _triplet_args(model, *t, cfg.margin_disc)
            diff_pairs = [(r, p)] + [(r, n) for n in negs]
        if not _away_from_kinks(args):
            return None
        batch = Batch(ranking_instances=pool, pairs=pairs, triplets=triplets,
                      diff_pairs=diff_pairs)
        grad = combined_objective(model, batch, labels, cfg).grad
        return (lambda W: combined_objective(with_w(W), batch, labels, cfg).value), grad, W0

    raise ValueError(f"unknown check kind {kind!r}")


def check_kind(kind: str, n_configs: int = 100, seed: int = 0, tol: float = REL_TOL,
               max_draws: int = 100_000) -> CheckResult:
    """Compare analytic and finite-difference gradients on ``n_configs`` random draws."""
    rng = np.random.default_rng([seed, KINDS.index(kind)])
    res = CheckResult(kind)
    draws = 0
    while res.checked < n_configs:
        draws += 1
        if draws > max_draws:
            raise RuntimeError(f"{kind}: could not draw {n_configs} configurations away from kinks")
        cfg = _draw_config(kind, rng)
        if cfg is None:
            continue
        fn, analytic, W = cfg
        numeric = finite_difference(fn, W)
        err = relative_error(analytic, numeric)
        res.checked += 1
        res.max_rel_error = max(res.max_rel_error, err)
        if err > tol:
            res.failures.append((res.checked - 1, err))
    return res


def run_suite(n_configs: int = 100, seed: int = 0, kinds=KINDS) -> dict:
    return {kind: check_kind(kind, n_configs, seed) for kind in kinds}
