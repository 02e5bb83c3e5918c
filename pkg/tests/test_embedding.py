import logging

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra import numpy as hnp

from semembed.embedding import (Dataset, DegenerateProjectionError, EmbeddingModel, Instance,
                                LabelTable, cosine_distance, project, project_jacobian)
from semembed.gradcheck import finite_difference, relative_error


def test_cosine_distance_fixtures():
    u = np.array([0.6, 0.8])
    assert cosine_distance(u, u) == pytest.approx(0.0, abs=1e-15)
    assert cosine_distance(u, -u) == pytest.approx(2.0)
    assert cosine_distance([0.6, 0.8], [0.8, 0.6]) == pytest.approx(0.04, abs=1e-12)


def test_cosine_distance_dimension_mismatch():
    with pytest.raises(ValueError):
        cosine_distance([1.0, 0.0], [1.0, 0.0, 0.0])


def test_project_fixtures():
    model = EmbeddingModel(np.eye(2))
    np.testing.assert_allclose(project(model, [3.0, 4.0]), [0.6, 0.8], atol=1e-15)
    x = np.array([0.6, 0.8])
    np.testing.assert_allclose(project(model, x), x, atol=1e-15)
    with pytest.raises(DegenerateProjectionError):
        project(model, [0.0, 0.0])


def test_project_rejects_wrong_feature_dim():
    with pytest.raises(ValueError):
        project(EmbeddingModel(np.eye(2)), [1.0, 2.0, 3.0])


def test_model_rejects_nonfinite_weights():
    with pytest.raises(ValueError):
        EmbeddingModel([[1.0, np.nan]])


@pytest.mark.parametrize("seed", range(10))
def test_jacobian_matches_finite_differences(seed):
    rng = np.random.default_rng(seed)
    D, F = 3, 4
    W = rng.uniform(-1, 1, (D, F))
    x = rng.standard_normal(F)
    if np.linalg.norm(W @ x) <= 0.1:
        pytest.skip("too close to degenerate")
    J = project_jacobian(EmbeddingModel(W), x)
    num = finite_difference(lambda w: project(EmbeddingModel(w), x), W)
    assert J.shape == (D, D, F)
    assert relative_error(J, num) < 1e-4
    # normalization removes scale: the check still holds for 2x
    J2 = project_jacobian(EmbeddingModel(W), 2 * x)
    num2 = finite_difference(lambda w: project(EmbeddingModel(w), 2 * x), W)
    assert relative_error(J2, num2) < 1e-4


def test_jacobian_is_zero_in_one_dimension():
    J = project_jacobian(EmbeddingModel([[2.0]]), [5.0])
    np.testing.assert_array_equal(J, np.zeros((1, 1, 1)))


finite = st.floats(-10, 10, allow_nan=False)


@settings(max_examples=200, deadline=None)
@given(hnp.arrays(np.float64, (3, 4), elements=finite),
       hnp.arrays(np.float64, 4, elements=finite),
       st.floats(1e-3, 1e3))
def test_projection_unit_norm_and_scale_invariant(W, x, c):
    model = EmbeddingModel(W)
    if np.linalg.norm(W @ x) < 1e-6:
        return
    f = project(model, x)
    assert abs(np.linalg.norm(f) - 1.0) < 1e-9
    np.testing.assert_allclose(project(model, c * x), f, atol=1e-9)


@settings(max_examples=200, deadline=None)
@given(hnp.arrays(np.float64, 5, elements=finite), hnp.arrays(np.float64, 5, elements=finite))
def test_cosine_distance_symmetric(a, b):
    if np.linalg.norm(a) < 1e-6 or np.linalg.norm(b) < 1e-6:
        return
    u, v = a / np.linalg.norm(a), b / np.linalg.norm(b)
    assert cosine_distance(u, v) == cosine_distance(v, u)
    assert 0.0 <= cosine_distance(u, v) <= 2.0 + 1e-12


def test_label_table_normalizes_and_indexes():
    table = LabelTable(["cat", "dog"], [[3.0, 4.0], [0.0, 2.0]])
    np.testing.assert_allclose(table.vector("cat"), [0.6, 0.8])
    np.testing.assert_allclose(np.linalg.norm(table.vectors, axis=1), 1.0, atol=1e-12)
    assert table.index("dog") == 1
    assert "cat" in table and "cow" not in table
    with pytest.raises(KeyError):
        table.vector("cow")


def test_label_table_norm_warnings_and_strict(caplog):
    with caplog.at_level(logging.WARNING):
        LabelTable(["a"], [[1.01, 0.0]])
    assert "renormalizing" in caplog.text
    with pytest.raises(ValueError):
        LabelTable(["a"], [[3.0, 4.0]], strict=True)
    LabelTable(["a"], [[1.2, 0.0]], strict=True)


def test_label_table_rejects_duplicates_and_zero():
    with pytest.raises(ValueError, match="duplicate"):
        LabelTable(["a", "a"], [[1.0, 0.0], [0.0, 1.0]])
    with pytest.raises(ValueError):
        LabelTable(["a"], [[0.0, 0.0]])


def test_label_table_subset_and_union():
    t = LabelTable(["a", "b", "c"], np.eye(3))
    s = t.subset(["c", "a"])
    assert s.ids == ("c", "a")
    u = s.union(LabelTable(["b"], [[0.0, 1.0, 0.0]]))
    assert u.ids == ("c", "a", "b")
    with pytest.raises(ValueError):
        s.union(t)


def test_dataset_invariants():
    ds = Dataset([Instance("1", [1.0, 2.0], "a"), Instance("2", [3.0, 4.0], "b")])
    assert ds.size == 2 and ds.feature_dim == 2
    with pytest.raises(ValueError):
        Dataset([])
    with pytest.raises(ValueError):
        Dataset([Instance("1", [1.0], "a"), Instance("2", [1.0, 2.0], "a")])
    with pytest.raises(ValueError):
        ds.check_labels(LabelTable(["a"], [[1.0]]))
