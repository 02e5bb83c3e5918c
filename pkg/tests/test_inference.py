import numpy as np
import pytest

from semembed.embedding import Dataset, EmbeddingModel, Instance, LabelTable
from semembed.inference import (concat_embeddings, rank_concatenated, rank_dataset, rank_labels,
                                zero_shot_eval)

I2 = EmbeddingModel(np.eye(2))


def test_rank_labels_fixtures():
    cands = LabelTable(["p", "q"], [[1.0, 0.0], [0.6, 0.8]])
    r = rank_labels(I2, [0.0, 1.0], cands)
    assert r.labels == ("q", "p")
    assert r.scores[0] == pytest.approx(0.8) and r.scores[1] == pytest.approx(0.0)
    exact = rank_labels(I2, [2.0, 0.0], cands)
    assert exact.labels[0] == "p" and exact.scores[0] == 1.0
    ortho = rank_labels(I2, [1.0, 0.0], LabelTable(["a", "b"], [[1.0, 0.0], [0.0, 1.0]]))
    assert ortho.scores.tolist() == [1.0, 0.0]


def test_concat_single_model_equals_rank_labels():
    rng = np.random.default_rng(0)
    model = EmbeddingModel(rng.standard_normal((3, 5)))
    table = LabelTable(list("abcd"), rng.standard_normal((4, 3)))
    x = rng.standard_normal(5)
    a = rank_concatenated([model], [table], [x])
    b = rank_labels(model, x, table)
    assert a.labels == b.labels
    np.testing.assert_allclose(a.scores, b.scores, atol=1e-15)


def test_concat_tie_goes_to_table_order():
    words = LabelTable(["A", "B"], [[1.0, 0.0], [0.0, 1.0]])
    attrs = LabelTable(["A", "B"], [[0.0, 1.0], [1.0, 0.0]])
    r = rank_concatenated([I2, I2], [words, attrs], [[1.0, 0.0], [1.0, 0.0]])
    assert r.labels == ("A", "B")
    assert r.scores[0] == pytest.approx(r.scores[1])
    agree = rank_concatenated([I2, I2], [words, words], [[1.0, 0.0], [1.0, 0.0]])
    assert agree.scores[0] == pytest.approx(1.0)
    vec, table = concat_embeddings([I2, I2], [words, attrs], [[1.0, 0.0], [1.0, 0.0]])
    assert table.dim == 4 and np.linalg.norm(vec) == pytest.approx(1.0)


def _split():
    seen = LabelTable(["s1", "s2"], [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])
    unseen = LabelTable(["u1", "u2"], [[0.0, 0.0, 1.0], [0.0, 0.6, 0.8]])
    test = Dataset([Instance("t1", [0.0, 0.0, 1.0], "u1"), Instance("t2", [0.0, 0.6, 0.8], "u2")])
    return seen, unseen, test


def test_zero_shot_standard_and_generalized():
    seen, unseen, test = _split()
    model = EmbeddingModel(np.eye(3))
    rep = zero_shot_eval(model, test, unseen, training_labels=["s1", "s2"], ks=(1,))
    assert rep.hit_at_k[1] == 1.0
    assert rep.confusion.shape == (2, 2)
    gen = zero_shot_eval(model, test, unseen, seen, ks=(1,))
    assert gen.confusion.shape == (4, 4)
    assert len(gen.classes) == len(seen) + len(unseen)


def test_zero_shot_errors():
    seen, unseen, test = _split()
    model = EmbeddingModel(np.eye(3))
    with pytest.raises(ValueError):
        zero_shot_eval(model, test, unseen, training_labels=["s1", "u2"])
    bad = Dataset([Instance("t", [1.0, 0.0, 0.0], "s1")])
    with pytest.raises(ValueError):
        zero_shot_eval(model, bad, unseen)


def test_random_model_hits_chance():
    C, D, F = 4, 6, 8
    rng = np.random.default_rng(0)
    hits = []
    for _ in range(400):
        labels = LabelTable([f"u{k}" for k in range(C)], rng.standard_normal((C, D)))
        data = Dataset([Instance(str(n), rng.standard_normal(F), f"u{n % C}") for n in range(8)])
        model = EmbeddingModel(rng.standard_normal((D, F)))
        rs = rank_dataset(model, data, labels)
        hits += [r.labels[0] == inst.label for r, inst in zip(rs, data)]
    assert np.mean(hits) == pytest.approx(1 / C, abs=0.03)


def test_appending_weaker_candidates_keeps_order():
    rng = np.random.default_rng(3)
    model = EmbeddingModel(rng.standard_normal((3, 4)))
    x = rng.standard_normal(4)
    f = model.project(x)
    table = LabelTable(list("abcd"), rng.standard_normal((4, 3)))
    before = rank_labels(model, x, table)
    weak = [v for v in rng.standard_normal((50, 3)) if v @ f / np.linalg.norm(v) < before.scores[-1]]
    extended = table.union(LabelTable([f"w{k}" for k in range(len(weak))], weak))
    after = rank_labels(model, x, extended)
    assert after.labels[:4] == before.labels
