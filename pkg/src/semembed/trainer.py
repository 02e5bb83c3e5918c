"""SGD with momentum and step-decayed learning rate over sampled batches."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .embedding import Dataset, EmbeddingModel, LabelTable
from .losses import LossConfig, combined_objective
from .sampling import (Batch, cap_rank_negatives, ranking_batches, sample_pair_batch,
                       sample_triplet_batch)

logger = logging.getLogger(__name__)

MAX_SKIP_FRACTION = 0.5


class NumericalError(RuntimeError):
    """Training produced non-finite values or too many degenerate projections."""


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.001
    momentum: float = 0.9
    lr_step_epochs: int = 100
    lr_step_factor: float = 0.1
    epochs: int = 50
    pair_batch_size: int = 64
    reference_batch_size: int = 16
    rank_batch_size: int = 64
    positive_fraction: float = 0.2
    candidates_per_reference: int = 10
    batches_per_epoch: Optional[int] = None
    max_negatives: Optional[int] = None
    rng_seed: int = 0
    init_scale: float = 0.1

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if not 0 <= self.momentum < 1:
            raise ValueError("momentum must lie in [0, 1)")
        if not 0 < self.lr_step_factor <= 1:
            raise ValueError("lr_step_factor must lie in (0, 1]")
        if self.lr_step_epochs < 1:
            raise ValueError("lr_step_epochs must be at least 1")
        if self.epochs < 0:
            raise ValueError("epochs must be non-negative")
        if self.init_scale < 0:
            raise ValueError("init_scale must be non-negative")

    def lr_at(self, epoch: int) -> float:
        return self.learning_rate * self.lr_step_factor ** (epoch // self.lr_step_epochs)


@dataclass
class TrainState:
    model: EmbeddingModel
    velocity: np.ndarray = None
    epoch: int = 0
    loss_history: list = field(default_factory=list)

    def __post_init__(self):
        if self.velocity is None:
            self.velocity = np.zeros_like(self.model.weights)
        self.velocity = np.asarray(self.velocity, dtype=np.float64)
        if self.velocity.shape != self.model.weights.shape:
            raise ValueError(f"velocity shape {self.velocity.shape} != weight shape "
                             f"{self.model.weights.shape}")


def init_model(feature_dim: int, embed_dim: int, init_scale: float = 0.1,
               rng_seed=0) -> EmbeddingModel:
    """Uniform ``[-init_scale, init_scale]`` weights of shape ``(embed_dim, feature_dim)``."""
    if feature_dim < 1 or embed_dim < 1:
        raise ValueError("dimensions must be at least 1")
    rng = np.random.default_rng(rng_seed)
    w = rng.uniform(-init_scale, init_scale, size=(embed_dim, feature_dim))
    return EmbeddingModel(w)


def sgd_step(state: TrainState, grad, lr: float, momentum: float = 0.9) -> TrainState:
    """``v <- momentum * v - lr * grad``; ``W <- W + v``. Updates ``state`` in place."""
    grad = np.asarray(grad, dtype=np.float64)
    if grad.shape != state.model.weights.shape:
        raise ValueError(f"gradient shape {grad.shape} != weight shape {state.model.weights.shape}")
    if not np.all(np.isfinite(grad)):
        raise NumericalError("non-finite gradient")
    state.velocity = momentum * state.velocity - lr * grad
    state.model.weights = state.model.weights + state.velocity
    return state


def _drop_degenerate(batch: Batch, model: EmbeddingModel) -> tuple:
    """Remove every batch item touching an instance whose projection is degenerate."""
    insts = batch.instances()
    if not insts:
        return batch, 0, 0
    X = np.stack([i.features for i in insts])
    norms = np.linalg.norm(X @ model.weights.T, axis=1)
    bad = {id(i) for i, n in zip(insts, norms) if not n > model.epsilon}
    if not bad:
        return batch, 0, len(insts)

    def ok(group):
        return all(id(i) not in bad for i in group)

    cleaned = Batch(
        ranking_instances=[i for i in batch.ranking_instances if id(i) not in bad],
        pairs=[p for p in batch.pairs if ok(p)],
        triplets=[t for t in batch.triplets if ok(t)],
        diff_pairs=[p for p in batch.diff_pairs if ok(p)],
        rank_labels=batch.rank_labels,
    )
    logger.warning("skipping %d degenerate instance(s) in batch", len(bad))
    return cleaned, len(bad), len(insts)


def _epoch_batches(dataset: Dataset, loss_cfg: LossConfig, cfg: TrainConfig,
                   rng: np.random.Generator) -> list:
    n = len(dataset)
    if loss_cfg.disc_mode == "triplet":
        count = cfg.batches_per_epoch or math.ceil(n / cfg.reference_batch_size)
        return [sample_triplet_batch(dataset, cfg.reference_batch_size, cfg.positive_fraction,
                                     rng, candidates=cfg.candidates_per_reference)
                for _ in range(count)]
    if loss_cfg.disc_mode == "contrastive" or loss_cfg.difference_enabled:
        count = cfg.batches_per_epoch or math.ceil(n / cfg.pair_batch_size)
        batches = [sample_pair_batch(dataset, cfg.pair_batch_size, rng) for _ in range(count)]
        if loss_cfg.disc_mode == "none":
            for b in batches:
                b.pairs = []
        return batches
    batches = ranking_batches(dataset, cfg.rank_batch_size, rng)
    if cfg.batches_per_epoch is not None:
        batches = batches[:cfg.batches_per_epoch]
    return batches


def train(dataset: Dataset, labels: LabelTable, loss_cfg: LossConfig,
          train_cfg: TrainConfig, *, state: Optional[TrainState] = None,
          verbose: bool = False) -> TrainState:
    """Run ``train_cfg.epochs`` epochs of sample -> objective -> SGD step.

    Passing ``state`` resumes from it; otherwise weights are initialized from
    ``train_cfg.rng_seed``. With ``verbose`` each epoch prints
    ``epoch <n> loss <value>`` where the value is the mean batch objective.
    """
    dataset.check_labels(labels)
    init_seq, sample_seq = np.random.SeedSequence(train_cfg.rng_seed).spawn(2)
    if state is None:
        model = init_model(dataset.feature_dim, labels.dim, train_cfg.init_scale,
                           np.random.default_rng(init_seq))
        state = TrainState(model)
    if state.model.feature_dim != dataset.feature_dim or state.model.embed_dim != labels.dim:
        raise ValueError(f"model shape {state.model.shape} incompatible with "
                         f"D={labels.dim}, F={dataset.feature_dim}")
    rng = np.random.default_rng(sample_seq)
    # burn sampler draws of epochs already completed so resumed runs stay aligned
    for _ in range(state.epoch):
        _epoch_batches(dataset, loss_cfg, train_cfg, rng)

    for epoch in range(state.epoch, train_cfg.epochs):
        lr = train_cfg.lr_at(epoch)
        losses = []
        skipped = seen = 0
        for batch in _epoch_batches(dataset, loss_cfg, train_cfg, rng):
            batch = cap_rank_negatives(batch, labels, train_cfg.max_negatives, rng)
            batch, n_bad, n_seen = _drop_degenerate(batch, state.model)
            skipped += n_bad
            seen += n_seen
            out = combined_objective(state.model, batch, labels, loss_cfg)
            if not math.isfinite(out.value):
                raise NumericalError(f"non-finite loss at epoch {epoch + 1}")
            losses.append(out.value)
            sgd_step(state, out.grad, lr, train_cfg.momentum)
        if seen and skipped / seen > MAX_SKIP_FRACTION:
            raise NumericalError(
                f"epoch {epoch + 1}: {skipped} of {seen} instances had degenerate projections")
        state.epoch = epoch + 1
        mean_loss = float(np.mean(losses)) if losses else 0.0
        state.loss_history.append((state.epoch, mean_loss))
        if verbose:
            print(f"epoch {state.epoch} loss {mean_loss:.6f}", flush=True)
    return state
