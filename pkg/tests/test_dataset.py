"""Panel container validation, standardization, and design assembly."""

import numpy as np
import pytest

from lmrj.dataset import CovariateDesign, PanelDataset
from lmrj.errors import DataError


def make_panel(**overrides):
    base = dict(
        responses=np.array([[[0], [1], [2]], [[2], [1], [0]]]),
        levels=(3,),
    )
    base.update(overrides)
    return PanelDataset(**base)


def test_two_dim_responses_promoted_to_univariate():
    d = PanelDataset(responses=np.array([[0, 1], [1, 0]]), levels=(2,))
    assert d.responses.shape == (2, 2, 1)
    assert d.r == 1


def test_default_names_and_subjects():
    d = make_panel()
    assert d.var_names == ("y1",)
    assert d.subjects == ("1", "2")


def test_out_of_range_category_names_subject_and_occasion():
    with pytest.raises(DataError, match=r"subject 2, occasion 3"):
        make_panel(responses=np.array([[[0], [1], [2]], [[2], [1], [3]]]))


def test_level_count_mismatch():
    with pytest.raises(DataError, match="level counts"):
        make_panel(levels=(3, 2))


def test_float_responses_rejected():
    with pytest.raises(DataError, match="integer coded"):
        make_panel(responses=np.array([[[0.0], [1.0], [2.0]], [[2.0], [1.0], [0.0]]]))


def test_covariate_alignment_checked():
    with pytest.raises(DataError, match="align"):
        make_panel(covariates=np.zeros((2, 2, 1)), covariate_names=("x",))
    with pytest.raises(DataError, match="covariate_names"):
        make_panel(covariates=np.zeros((2, 3, 2)), covariate_names=("x",))
    with pytest.raises(DataError, match="non-finite"):
        make_panel(covariates=np.full((2, 3, 1), np.nan), covariate_names=("x",))


def test_covariate_column_lookup():
    cov = np.arange(12, dtype=float).reshape(2, 3, 2)
    d = make_panel(covariates=cov, covariate_names=("age", "income"))
    np.testing.assert_array_equal(d.covariate_column("income"), cov[:, :, 1])
    with pytest.raises(DataError, match="unknown covariate"):
        d.covariate_column("wealth")


def test_standardize_zero_mean_unit_sd():
    rng = np.random.default_rng(3)
    cov = rng.normal(5.0, 2.0, size=(4, 3, 1))
    d = make_panel(
        responses=np.zeros((4, 3, 1), dtype=int),
        levels=(2,),
        covariates=cov,
        covariate_names=("x",),
    ).standardize(("x",))
    col = d.covariate_column("x")
    assert col.mean() == pytest.approx(0.0, abs=1e-12)
    assert col.std() == pytest.approx(1.0, abs=1e-12)
    assert d.standardized == ("x",)


def test_standardize_idempotent():
    rng = np.random.default_rng(4)
    cov = rng.normal(size=(4, 3, 1)) * 3.0 + 1.0
    d = make_panel(
        responses=np.zeros((4, 3, 1), dtype=int),
        levels=(2,),
        covariates=cov,
        covariate_names=("x",),
    )
    once = d.standardize(("x",))
    twice = once.standardize(("x",))
    np.testing.assert_allclose(twice.covariates, once.covariates, atol=1e-12)
    assert twice.standardized == ("x",)


def test_standardize_constant_column_rejected():
    d = make_panel(covariates=np.ones((2, 3, 1)), covariate_names=("x",))
    with pytest.raises(DataError, match="constant column"):
        d.standardize(("x",))


def test_design_matrix_with_occasion_dummies():
    cov = np.arange(6, dtype=float).reshape(1, 3, 2)
    d = make_panel(
        responses=np.zeros((1, 3, 1), dtype=int),
        levels=(2,),
        covariates=cov,
        covariate_names=("a", "b"),
        design=CovariateDesign(("b",)),
    )
    X = d.design_matrix()
    assert X.shape == (1, 3, 3)  # one column plus T-1 dummies
    np.testing.assert_array_equal(X[0, :, 0], cov[0, :, 1])
    np.testing.assert_array_equal(X[0, :, 1], [0.0, 1.0, 0.0])
    np.testing.assert_array_equal(X[0, :, 2], [0.0, 0.0, 1.0])
    assert d.design.names(3) == ("b", "occ2", "occ3")


def test_design_matrix_without_dummies():
    cov = np.ones((2, 3, 1))
    d = make_panel(
        covariates=cov,
        covariate_names=("x",),
        design=CovariateDesign(("x",), occasion_dummies=False),
    )
    assert d.design_matrix().shape == (2, 3, 1)
    assert d.design.width(3) == 1


def test_design_requires_recipe():
    with pytest.raises(DataError, match="no covariate design"):
        make_panel().design_matrix()


def test_equals_detects_changes():
    a = make_panel()
    b = make_panel()
    assert a.equals(b)
    c = make_panel(responses=np.array([[[0], [1], [2]], [[2], [2], [0]]]))
    assert not a.equals(c)
    assert not a.equals("not a panel")
