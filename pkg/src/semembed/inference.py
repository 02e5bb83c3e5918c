"""Nearest-neighbor label inference in the embedding space."""

from __future__ import annotations

from typing import Optional, Sequence

import numpy as np

from .embedding import Dataset, EmbeddingModel, LabelTable
from .metrics import EvalReport, PredictionRanking, evaluate_single_label


def _rank(instance_id: str, f: np.ndarray, candidates: LabelTable) -> PredictionRanking:
    if len(candidates) == 0:
        raise ValueError("candidate label set is empty")
    sims = candidates.vectors @ f
    order = np.argsort(-sims, kind="stable")
    return PredictionRanking(instance_id, [candidates.ids[i] for i in order], sims[order])


def rank_labels(model: EmbeddingModel, features, candidate_labels: LabelTable,
                instance_id: str = "") -> PredictionRanking:
    """Candidates sorted by cosine similarity to the projected features.

    Ties keep label-table order.
    """
    return _rank(instance_id, model.project(features), candidate_labels)


def rank_dataset(model: EmbeddingModel, dataset: Dataset, candidate_labels: LabelTable) -> list:
    F = model.project_many(dataset.features_matrix())
    return [_rank(inst.id, f, candidate_labels) for inst, f in zip(dataset, F)]


def _normalize(v: np.ndarray) -> np.ndarray:
    return v / np.linalg.norm(v)


def concat_embeddings(models: Sequence[EmbeddingModel], label_tables: Sequence[LabelTable],
                      features: Sequence) -> tuple:
    """Concatenate per-space embeddings of one image and of every label.

    ``features[i]`` is the input for ``models[i]``. Each block is already unit
    length; the concatenated vectors are renormalized so cosine similarity
    stays a plain dot product. Label order follows the first table.
    """
    if not (len(models) == len(label_tables) == len(features)) or not models:
        raise ValueError("need one label table and one feature vector per model")
    ids = label_tables[0].ids
    for t in label_tables[1:]:
        if set(t.ids) != set(ids):
            raise ValueError("label tables cover different label sets")
    image = _normalize(np.concatenate([m.project(x) for m, x in zip(models, features)]))
    blocks = [t.vectors[[t.index(i) for i in ids]] for t in label_tables]
    return image, LabelTable(ids, np.hstack(blocks))


def rank_concatenated(models, label_tables, features, instance_id: str = "") -> PredictionRanking:
    image, table = concat_embeddings(models, label_tables, features)
    return _rank(instance_id, image, table)


def zero_shot_eval(model: EmbeddingModel, test: Dataset, unseen_labels: LabelTable,
                   seen_labels: Optional[LabelTable] = None, *,
                   training_labels: Optional[Sequence[str]] = None,
                   ks=(1, 2, 5, 10)) -> EvalReport:
    """Nearest-neighbor evaluation over unseen (or seen and unseen) labels.

    Without ``seen_labels`` the candidates are the unseen labels only and
    ``training_labels``, when given, must not overlap them. With
    ``seen_labels`` the candidate set is their union (generalized setting).
    """
    if seen_labels is None:
        if training_labels is not None:
            overlap = sorted(set(training_labels) & set(unseen_labels.ids))
            if overlap:
                raise ValueError(f"unseen labels were used in training: {overlap}")
        candidates = unseen_labels
    else:
        candidates = seen_labels.union(unseen_labels)
    test.check_labels(candidates)
    if seen_labels is None:
        test.check_labels(unseen_labels)
    rankings = rank_dataset(model, test, candidates)
    return evaluate_single_label(rankings, [inst.label for inst in test], ks)
