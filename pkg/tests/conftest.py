"""Shared fixtures: model structures, random parameter draws, small panels."""

import numpy as np
import pytest

from lmrj.dataset import CovariateDesign
from lmrj.params import (
    BasicMeasurement,
    CovariateMeasurement,
    CutpointMeasurement,
    ModelParams,
    ModelStructure,
)
from lmrj.priors import PriorSpec, sample_prior
from lmrj.simulate import simulate_panel


@pytest.fixture
def rng():
    return np.random.default_rng(20260815)


@pytest.fixture
def basic_structure():
    return ModelStructure("basic", T=4, levels=(3,))


@pytest.fixture
def multivariate_structure():
    return ModelStructure("basic", T=4, levels=(3, 2))


@pytest.fixture
def cutpoint_structure():
    return ModelStructure("cutpoint", T=4, levels=(4,))


@pytest.fixture
def covariate_structure():
    return ModelStructure("covariate", T=3, levels=(2, 2), n_covariates=2)


ALL_STRUCTURES = {
    "basic": ModelStructure("basic", T=4, levels=(3,)),
    "multivariate": ModelStructure("basic", T=4, levels=(3, 2)),
    "time_varying": ModelStructure("basic", T=3, levels=(3,), time_varying=True),
    "cutpoint": ModelStructure("cutpoint", T=4, levels=(4,)),
    "covariate": ModelStructure("covariate", T=3, levels=(2, 2), n_covariates=2),
}


@pytest.fixture(params=sorted(ALL_STRUCTURES))
def any_structure(request):
    return ALL_STRUCTURES[request.param]


def random_params(structure, k, rng):
    """Draw a valid parameter state from the default prior."""
    return sample_prior(PriorSpec(), k, structure, rng)


@pytest.fixture
def basic_params():
    pi = np.array([0.6, 0.4])
    trans = np.array([[0.7, 0.3], [0.2, 0.8]])
    emit = np.array([[0.9, 0.3], [0.1, 0.7]])
    return ModelParams(pi, trans, BasicMeasurement(emit))


def covariate_args(structure, n, rng):
    """Covariate array, names, and design recipe for simulate_panel."""
    x = rng.normal(size=(n, structure.T, structure.n_covariates))
    names = tuple(f"x{j + 1}" for j in range(structure.n_covariates))
    return {
        "covariates": x,
        "covariate_names": names,
        "design": CovariateDesign(names, occasion_dummies=False),
    }


def small_panel(structure, k, n, seed):
    """Simulate a panel from a prior draw; returns (dataset, truth)."""
    rng = np.random.default_rng(seed)
    truth = random_params(structure, k, rng)
    kwargs = {}
    if structure.variant == "covariate":
        kwargs = covariate_args(structure, n, rng)
    elif not structure.time_varying:
        kwargs["T"] = structure.T
    if structure.variant == "basic" and structure.r > 1:
        kwargs["levels"] = structure.levels
    data = simulate_panel(truth, n=n, seed=seed + 1, **kwargs)
    return data, truth


__all__ = [
    "ALL_STRUCTURES",
    "covariate_args",
    "random_params",
    "small_panel",
]
