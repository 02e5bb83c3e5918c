"""Hand-derived loss fixtures shared by the unit and acceptance tests.

Every fixture uses an identity-like model so that an instance's features are
its embedding direction; each returns ``(computed, expected)``.
"""

import numpy as np

from semembed.embedding import EmbeddingModel, Instance, LabelTable
from semembed.losses import (LossConfig, combined_objective, contrastive_loss, difference_loss,
                             ranking_loss, triplet_loss)
from semembed.sampling import Batch

IDENTITY2 = EmbeddingModel(np.eye(2))
E1 = np.array([1.0, 0.0])


def at_cos(c):
    """2-d unit vector with cosine ``c`` to the first axis."""
    return np.array([c, np.sqrt(1.0 - c * c)])


def ranking_margin_satisfied():
    labels = LabelTable(["a", "b"], [E1, [0.0, 1.0]])
    return ranking_loss(IDENTITY2, Instance("x", E1, "a"), labels, 0.1).value, 0.0


def ranking_one_violation():
    labels = LabelTable(["a", "b"], [E1, at_cos(0.95)])
    return ranking_loss(IDENTITY2, Instance("x", E1, "a"), labels, 0.1).value, 0.05


def contrastive_same_class():
    a, b = Instance("a", E1, "c"), Instance("b", at_cos(0.7), "c")
    return contrastive_loss(IDENTITY2, a, b, 1.0).value, 0.3


def contrastive_different_class():
    a, b = Instance("a", E1, "c"), Instance("b", at_cos(0.7), "d")
    return contrastive_loss(IDENTITY2, a, b, 1.0).value, 0.7


def triplet_active():
    # d_pos = 0.2 and d_neg = 0.9 need the positive and negative on opposite
    # sides of the reference
    r = Instance("r", E1, "c")
    p = Instance("p", at_cos(0.8), "c")
    n = Instance("n", at_cos(0.1) * [1.0, -1.0], "d")
    return triplet_loss(IDENTITY2, r, p, n, 1.0).value, 0.3


def difference_misaligned():
    # f_a - f_b = (0.1, 0, 0), s_a - s_b = (0, 0.1, 0)
    c = np.sqrt(1.0 - 0.05 ** 2)
    model = EmbeddingModel(np.eye(3))
    labels = LabelTable(["A", "B"], [[0.0, 0.05, c], [0.0, -0.05, c]])
    a = Instance("a", [0.05, 0.0, c], "A")
    b = Instance("b", [-0.05, 0.0, c], "B")
    return difference_loss(model, a, b, labels).value, 0.02


def combined_fixture():
    """Ranking 0.05 + contrastive 0.30 + difference 0.02 + decay (w/2)*2 = 0.3705."""
    c = np.sqrt(1.0 - 0.05 ** 2)
    # |W|^2 = 2; projection ignores the scale
    model = EmbeddingModel(np.sqrt(2.0 / 3.0) * np.eye(3))
    labels = LabelTable(
        ["A", "B", "C", "E"],
        [[0.0, 0.05, c], [0.0, -0.05, c], [1.0, 0.0, 0.0], [0.95, np.sqrt(1 - 0.95 ** 2), 0.0]])
    rank_inst = Instance("r", [1.0, 0.0, 0.0], "C")
    p1 = Instance("p1", [1.0, 0.0, 0.0], "C")
    p2 = Instance("p2", [0.7, np.sqrt(0.51), 0.0], "C")
    da = Instance("a", [0.05, 0.0, c], "A")
    db = Instance("b", [-0.05, 0.0, c], "B")
    batch = Batch(ranking_instances=[rank_inst], pairs=[(p1, p2)], diff_pairs=[(da, db)])
    cfg = LossConfig(lambda1=1.0, lambda2=1.0, lambda3=1.0, weight_decay=0.0005,
                     disc_mode="contrastive", difference_enabled=True)
    return combined_objective(model, batch, labels, cfg).value, 0.3705


ALL = {
    "ranking m=0.1 satisfied": ranking_margin_satisfied,
    "ranking d=0.05 -> 0.05": ranking_one_violation,
    "contrastive same d=0.3 -> 0.3": contrastive_same_class,
    "contrastive diff d=0.3 m=1 -> 0.7": contrastive_different_class,
    "triplet 0.2/0.9 m=1 -> 0.3": triplet_active,
    "difference -> 0.02": difference_misaligned,
    "combined -> 0.3705": combined_fixture,
}
