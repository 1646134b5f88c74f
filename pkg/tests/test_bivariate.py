"""Joint 2x2 cell construction from margins and a log-odds ratio."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lmrj.bivariate import JointCellTable, invert_bivariate_margins, joint_cells
from lmrj.errors import ModelError


def logit(p):
    return math.log(p / (1.0 - p))


def test_known_cell_value():
    # hand-derived root of the cross-ratio quadratic at p1=0.3, p2=0.6, gamma=1
    table = invert_bivariate_margins(logit(0.3), logit(0.6), 1.0)
    assert table.p11 == pytest.approx(0.22687948102597327, abs=1e-14)


def test_independence_gives_product_cells():
    table = invert_bivariate_margins(logit(0.3), logit(0.6), 0.0)
    assert table.p11 == pytest.approx(0.18, abs=1e-15)
    assert table.p10 == pytest.approx(0.12, abs=1e-15)
    assert table.p01 == pytest.approx(0.42, abs=1e-15)
    assert table.p00 == pytest.approx(0.28, abs=1e-15)


logits = st.floats(min_value=-4.0, max_value=4.0, allow_nan=False)
lors = st.floats(min_value=-5.0, max_value=5.0, allow_nan=False)


@settings(max_examples=300, deadline=None)
@given(logits, logits, lors)
def test_margin_roundtrip(l1, l2, lor):
    table = invert_bivariate_margins(l1, l2, lor)
    m1, m2 = table.marginals()
    p1 = 1.0 / (1.0 + math.exp(-l1))
    p2 = 1.0 / (1.0 + math.exp(-l2))
    assert abs(m1 - p1) <= 1e-10
    assert abs(m2 - p2) <= 1e-10
    if abs(lor) > 1e-8:
        assert abs(table.log_odds_ratio() - lor) <= 1e-8


@settings(max_examples=200, deadline=None)
@given(logits, logits, lors)
def test_cells_form_a_distribution(l1, l2, lor):
    table = invert_bivariate_margins(l1, l2, lor)
    cells = table.as_array()
    assert np.all(cells > 0)
    assert cells.sum() == pytest.approx(1.0, abs=1e-12)


def test_p11_increases_with_log_odds_ratio():
    values = [invert_bivariate_margins(logit(0.4), logit(0.55), g).p11
              for g in (-3.0, -1.0, 0.0, 1.0, 3.0)]
    assert all(a < b for a, b in zip(values, values[1:]))


def test_near_zero_ratio_matches_product_limit():
    # below the independence threshold the solver must not lose digits
    table = invert_bivariate_margins(logit(0.3), logit(0.6), 1e-9)
    assert table.p11 == pytest.approx(0.18, abs=1e-9)


def test_closed_form_matches_small_ratio_expansion():
    # first-order expansion p11 = p1 p2 (1 + gamma q00) + O(gamma^2)
    p1, p2, g = 0.3, 0.6, 1e-4
    table = invert_bivariate_margins(logit(p1), logit(p2), g)
    expected = p1 * p2 * (1.0 + g * (1 - p1) * (1 - p2))
    assert table.p11 == pytest.approx(expected, abs=1e-8)


def test_vectorized_cells_match_scalar_path():
    rng = np.random.default_rng(7)
    p1 = rng.uniform(0.05, 0.95, size=50)
    p2 = rng.uniform(0.05, 0.95, size=50)
    for gamma in (-2.5, -0.3, 0.0, 0.7, 3.1):
        cells = joint_cells(p1, p2, gamma)
        assert cells.shape == (50, 4)
        for i in range(50):
            table = invert_bivariate_margins(logit(p1[i]), logit(p2[i]), gamma)
            np.testing.assert_allclose(cells[i], table.as_array(), atol=1e-12)


def test_nonfinite_inputs_rejected():
    with pytest.raises(ModelError):
        invert_bivariate_margins(math.inf, 0.0, 0.0)
    with pytest.raises(ModelError):
        invert_bivariate_margins(0.0, 0.0, math.nan)


def test_validate_flags_degenerate_tables():
    with pytest.raises(ModelError):
        JointCellTable(0.5, 0.5, 0.0, 0.0).validate()
    with pytest.raises(ModelError):
        JointCellTable(0.5, 0.3, 0.3, 0.3).validate()
