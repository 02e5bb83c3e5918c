import numpy as np
import pytest

from semembed.inference import rank_dataset
from semembed.metrics import hit_at_k
from semembed.synthetic import SyntheticSpec, generate_synthetic, oracle_model, split_classes


def test_split_sizes():
    d = generate_synthetic(SyntheticSpec(classes=10, per_class=50))
    assert len(d.train) == 400 and len(d.test) == 100
    assert all(len(v) == 40 for v in d.train.by_label().values())


def test_deterministic():
    spec = SyntheticSpec(classes=4, per_class=10, seed=7, class_overlap=0.3)
    a, b = generate_synthetic(spec), generate_synthetic(spec)
    assert a.train.features_matrix().tobytes() == b.train.features_matrix().tobytes()
    assert a.labels.vectors.tobytes() == b.labels.vectors.tobytes()
    c = generate_synthetic(SyntheticSpec(classes=4, per_class=10, seed=8, class_overlap=0.3))
    assert a.train.features_matrix().tobytes() != c.train.features_matrix().tobytes()


@pytest.mark.parametrize("classes,embed_dim", [(6, 8), (8, 8), (12, 8)])
def test_noiseless_oracle_is_perfect(classes, embed_dim):
    d = generate_synthetic(SyntheticSpec(classes=classes, per_class=10, embed_dim=embed_dim,
                                         noise_sigma=0.0))
    model = oracle_model(d)
    for part in (d.train, d.test):
        rs = rank_dataset(model, part, d.labels)
        assert hit_at_k(rs, [i.label for i in part], 1) == 1.0
        np.testing.assert_allclose(model.project_many(part.features_matrix()),
                                   np.stack([d.labels.vector(i.label) for i in part]), atol=1e-9)


@pytest.mark.parametrize("classes", [5, 8])
@pytest.mark.parametrize("overlap", [0.0, 0.4, 0.8])
def test_overlap_controls_label_cosine(classes, overlap):
    d = generate_synthetic(SyntheticSpec(classes=classes, embed_dim=8, class_overlap=overlap))
    G = d.labels.vectors @ d.labels.vectors.T
    off = G[~np.eye(classes, dtype=bool)]
    np.testing.assert_allclose(off, 0.95 * overlap, atol=1e-12)


def test_spec_validation_and_split():
    with pytest.raises(ValueError):
        SyntheticSpec(feature_dim=4, embed_dim=8)
    with pytest.raises(ValueError):
        SyntheticSpec(class_overlap=1.5)
    d = generate_synthetic(SyntheticSpec(classes=5, per_class=10))
    tr, te, sl, ul = split_classes(d, list(d.labels.ids[:3]))
    assert set(tr.labels) == set(sl.ids) and set(te.labels) == set(ul.ids)
    assert not set(sl.ids) & set(ul.ids)
