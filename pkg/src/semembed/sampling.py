"""Seeded batch construction for the ranking, pair and triplet objectives."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .embedding import Dataset, Instance, LabelTable


@dataclass
class Batch:
    ranking_instances: list = field(default_factory=list)
    pairs: list = field(default_factory=list)
    triplets: list = field(default_factory=list)
    diff_pairs: list = field(default_factory=list)
    # restricts the ranking sum to these labels when set
    rank_labels: Optional[list] = None

    def __post_init__(self):
        for r, p, n in self.triplets:
            if r.label != p.label or r.label == n.label:
                raise ValueError(f"invalid triplet labels ({r.label}, {p.label}, {n.label})")
        if self.pairs and self.triplets:
            raise ValueError("a batch carries either pairs or triplets, not both")

    def is_empty(self) -> bool:
        return not (self.ranking_instances or self.pairs or self.triplets or self.diff_pairs)

    def instances(self) -> list:
        """Every distinct instance referenced by the batch, in first-seen order."""
        seen = {}
        groups = [self.ranking_instances, *self.pairs, *self.triplets, *self.diff_pairs]
        for group in groups:
            for inst in group:
                seen.setdefault(id(inst), inst)
        return list(seen.values())


def _rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def _distinct(instances) -> list:
    seen = {}
    for inst in instances:
        seen.setdefault(id(inst), inst)
    return list(seen.values())


def _check_pairable(dataset: Dataset) -> dict:
    groups = dataset.by_label()
    if len(groups) < 2:
        raise ValueError(f"need at least 2 classes, dataset has {len(groups)}")
    small = [lab for lab, members in groups.items() if len(members) < 2]
    if small:
        raise ValueError(f"classes with fewer than 2 instances: {small}")
    return groups


def _draw(rng, pool: list, k: int) -> list:
    """Draw ``k`` items, without replacement when the pool is large enough."""
    if k <= len(pool):
        idx = rng.choice(len(pool), size=k, replace=False)
    else:
        idx = rng.choice(len(pool), size=k, replace=True)
    return [pool[i] for i in idx]


def sample_pair_batch(dataset: Dataset, batch_size: int, rng_seed=None) -> Batch:
    """Half same-class and half different-class pairs.

    The same pairs are reused for the difference term and their members
    form the ranking instances of the batch.
    """
    if batch_size < 0 or batch_size % 2:
        raise ValueError(f"batch_size must be a non-negative even integer, got {batch_size}")
    groups = _check_pairable(dataset)
    if batch_size == 0:
        return Batch()
    rng = _rng(rng_seed)
    members = dataset.instances
    label_of = [inst.label for inst in members]
    index_of = {id(inst): k for k, inst in enumerate(members)}
    group_idx = {lab: [index_of[id(i)] for i in insts] for lab, insts in groups.items()}

    half = batch_size // 2
    used = set()
    pairs = []

    def add_unique(make):
        # a few retries keep pairs distinct within the batch on small datasets
        for _ in range(20):
            a, b = make()
            key = (min(a, b), max(a, b))
            if key not in used:
                break
        used.add(key)
        pairs.append((members[a], members[b]))

    def same_pair():
        a = int(rng.integers(len(members)))
        pool = group_idx[label_of[a]]
        b = pool[int(rng.integers(len(pool) - 1))]
        if b == a:
            b = pool[-1]
        return a, b

    def diff_pair():
        a = int(rng.integers(len(members)))
        while True:
            b = int(rng.integers(len(members)))
            if label_of[b] != label_of[a]:
                return a, b

    for _ in range(half):
        add_unique(same_pair)
    for _ in range(half):
        add_unique(diff_pair)
    ranking = _distinct(inst for pair in pairs for inst in pair)
    return Batch(ranking_instances=ranking, pairs=pairs, diff_pairs=list(pairs))


def sample_triplet_batch(dataset: Dataset, batch_size: int, positive_fraction: float = 0.2,
                         rng_seed=None, candidates: int = 10) -> Batch:
    """Reference instances with ``positive_fraction`` same-class partners each.

    Every reference draws ``candidates`` partners: ``round(positive_fraction *
    candidates)`` from its own class and the rest from other classes. All
    (reference, positive, negative) combinations become triplets.
    """
    if batch_size < 0:
        raise ValueError("batch_size must be non-negative")
    if not 0.0 <= positive_fraction <= 1.0:
        raise ValueError("positive_fraction must lie in [0, 1]")
    groups = _check_pairable(dataset)
    n_pos = _round_half_up(positive_fraction * candidates)
    n_neg = candidates - n_pos
    if n_pos < 1:
        raise ValueError("no positives per reference; raise positive_fraction or candidates")
    if n_neg < 1:
        raise ValueError("no negatives per reference; lower positive_fraction")
    if batch_size == 0:
        return Batch()
    rng = _rng(rng_seed)
    refs = _draw(rng, dataset.instances, batch_size)

    triplets, diff_pairs, seen_pairs = [], [], set()
    for ref in refs:
        same = [i for i in groups[ref.label] if i is not ref]
        other = [i for lab, insts in groups.items() if lab != ref.label for i in insts]
        positives = _draw(rng, same, n_pos)
        negatives = _draw(rng, other, n_neg)
        for p in positives:
            for n in negatives:
                triplets.append((ref, p, n))
        for partner in positives + negatives:
            key = (id(ref), id(partner))
            if key not in seen_pairs:
                seen_pairs.add(key)
                diff_pairs.append((ref, partner))
    ranking = _distinct(inst for t in triplets for inst in t)
    return Batch(ranking_instances=ranking, triplets=triplets, diff_pairs=diff_pairs)


def ranking_batches(dataset: Dataset, batch_size: int, rng_seed=None) -> list:
    """One shuffled pass over the dataset split into ranking-only batches."""
    if batch_size < 1:
        raise ValueError("batch_size must be positive")
    rng = _rng(rng_seed)
    order = rng.permutation(len(dataset))
    return [Batch(ranking_instances=[dataset[int(k)] for k in order[s:s + batch_size]])
            for s in range(0, len(order), batch_size)]


def cap_rank_negatives(batch: Batch, labels: LabelTable, max_negatives: Optional[int],
                       rng_seed=None) -> Batch:
    """Limit the ranking sum to the batch's true labels plus sampled negatives."""
    if max_negatives is None:
        return batch
    if max_negatives < 0:
        raise ValueError("max_negatives must be non-negative")
    rng = _rng(rng_seed)
    true = list(dict.fromkeys(inst.label for inst in batch.ranking_instances))
    rest = [lab for lab in labels.ids if lab not in set(true)]
    k = min(max_negatives, len(rest))
    extra = [rest[i] for i in sorted(rng.choice(len(rest), size=k, replace=False))] if k else []
    keep = set(true) | set(extra)
    batch.rank_labels = [lab for lab in labels.ids if lab in keep]
    return batch
