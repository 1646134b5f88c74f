"""Parameter containers: flatten/unflatten, permutation, validation."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lmrj.errors import ModelError
from lmrj.params import (
    BasicMeasurement,
    CutpointMeasurement,
    ModelParams,
    ModelStructure,
    flat_dim,
    flat_names,
    unflatten,
)

from conftest import ALL_STRUCTURES, random_params


@settings(max_examples=60, deadline=None)
@given(
    st.sampled_from(sorted(ALL_STRUCTURES)),
    st.integers(min_value=1, max_value=4),
    st.integers(min_value=0, max_value=2**31 - 1),
)
def test_flatten_unflatten_roundtrip(name, k, seed):
    structure = ALL_STRUCTURES[name]
    p = random_params(structure, k, np.random.default_rng(seed))
    theta = p.flatten()
    assert theta.shape == (flat_dim(k, structure),)
    q = unflatten(theta, k, structure)
    np.testing.assert_array_equal(q.flatten(), theta)
    q.validate(structure)


def test_flat_names_align_with_flatten(rng):
    for structure in ALL_STRUCTURES.values():
        for k in (1, 3):
            p = random_params(structure, k, rng)
            names = flat_names(k, structure)
            assert len(names) == p.flatten().size
            assert len(set(names)) == len(names)


def test_flat_names_basic_layout():
    names = flat_names(2, ModelStructure("basic", T=3, levels=(2,)))
    assert names[:2] == ["init_w[1]", "init_w[2]"]
    assert names[2:6] == ["trans_w[1,1]", "trans_w[1,2]", "trans_w[2,1]", "trans_w[2,2]"]
    assert names[6:] == ["emit_w[v1:y=0,u=1]", "emit_w[v1:y=0,u=2]",
                         "emit_w[v1:y=1,u=1]", "emit_w[v1:y=1,u=2]"]


def test_permute_roundtrip(rng):
    for structure in ALL_STRUCTURES.values():
        p = random_params(structure, 3, rng)
        perm = np.array([2, 0, 1])
        inverse = np.argsort(perm)
        q = p.permute(perm).permute(inverse)
        np.testing.assert_allclose(q.flatten(), p.flatten(), atol=0)


def test_permute_moves_state_blocks(rng):
    p = random_params(ALL_STRUCTURES["basic"], 3, rng)
    q = p.permute([1, 2, 0])
    np.testing.assert_array_equal(q.init_w, p.init_w[[1, 2, 0]])
    assert q.trans_w[0, 2] == p.trans_w[1, 0]
    np.testing.assert_array_equal(q.measurement.emit_w[:, 0], p.measurement.emit_w[:, 1])


def test_permute_keeps_shared_blocks(rng):
    p = random_params(ALL_STRUCTURES["cutpoint"], 3, rng)
    q = p.permute([2, 1, 0])
    np.testing.assert_array_equal(q.measurement.cutpoints, p.measurement.cutpoints)
    np.testing.assert_array_equal(q.measurement.tendency, p.measurement.tendency[[2, 1, 0]])

    c = random_params(ALL_STRUCTURES["covariate"], 3, rng)
    d = c.permute([2, 1, 0])
    np.testing.assert_array_equal(d.measurement.slopes, c.measurement.slopes)
    np.testing.assert_array_equal(d.measurement.log_odds, c.measurement.log_odds)
    np.testing.assert_array_equal(d.measurement.support, c.measurement.support[:, [2, 1, 0]])


def test_copy_is_deep(rng):
    p = random_params(ALL_STRUCTURES["basic"], 2, rng)
    q = p.copy()
    q.init_w[0] = 123.0
    assert p.init_w[0] != 123.0


def test_probability_normalization(basic_params):
    assert basic_params.init_probs().sum() == pytest.approx(1.0)
    np.testing.assert_allclose(basic_params.trans_probs().sum(axis=1), 1.0)


def test_validate_rejects_bad_shapes():
    with pytest.raises(ModelError, match="k x k"):
        ModelParams(np.ones(2), np.ones((3, 3)), BasicMeasurement(np.ones((2, 2)))).validate()
    with pytest.raises(ModelError, match="does not match k"):
        ModelParams(np.ones(2), np.ones((2, 2)), BasicMeasurement(np.ones((2, 3)))).validate()
    with pytest.raises(ModelError, match="positive"):
        ModelParams(np.array([1.0, -1.0]), np.ones((2, 2)),
                    BasicMeasurement(np.ones((2, 2)))).validate()
    with pytest.raises(ModelError, match="finite"):
        ModelParams(np.ones(2), np.ones((2, 2)),
                    CutpointMeasurement(np.array([0.0, np.inf]), np.zeros(2))).validate()


def test_validate_against_structure(rng):
    structure = ALL_STRUCTURES["cutpoint"]
    p = random_params(structure, 2, rng)
    with pytest.raises(ModelError, match="basic measurement"):
        p.validate(ALL_STRUCTURES["basic"])
    short = CutpointMeasurement(p.measurement.tendency, p.measurement.cutpoints[:-1])
    with pytest.raises(ModelError, match="l-1"):
        p.replace_measurement(short).validate(structure)


def test_unflatten_rejects_wrong_length():
    structure = ALL_STRUCTURES["basic"]
    with pytest.raises(ModelError, match="does not match k"):
        unflatten(np.ones(5), 2, structure)


def test_structure_meta_roundtrip():
    for structure in ALL_STRUCTURES.values():
        again = ModelStructure.from_meta(structure.to_meta())
        assert again == structure


def test_structure_validation():
    with pytest.raises(ModelError):
        ModelStructure("nope", T=3, levels=(2,))
    with pytest.raises(ModelError):
        ModelStructure("basic", T=0, levels=(2,))
    with pytest.raises(ModelError):
        ModelStructure("cutpoint", T=3, levels=(3, 3))
    with pytest.raises(ModelError):
        ModelStructure("covariate", T=3, levels=(3, 2), n_covariates=1)
