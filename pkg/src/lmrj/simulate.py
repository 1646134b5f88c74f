"""Draw synthetic panels from a fully specified model."""

from __future__ import annotations

import numpy as np

from .bivariate import joint_cells
from .dataset import CovariateDesign, PanelDataset
from .errors import ModelError
from .likelihood import basic_emission_probs, covariate_marginal_probs, cutpoint_emission_probs
from .params import BasicMeasurement, CovariateMeasurement, CutpointMeasurement, ModelParams


def _as_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def _sample_rows(cum: np.ndarray, draws: np.ndarray) -> np.ndarray:
    """Categorical draws from per-row cumulative distributions [n, c]."""
    return (cum < draws[:, None]).sum(axis=1)


def simulate_latent_paths(params: ModelParams, n: int, T: int,
                          rng: np.random.Generator) -> np.ndarray:
    """[n, T] latent state indices, first-order Markov."""
    pi_cum = np.cumsum(params.init_probs())
    P_cum = np.cumsum(params.trans_probs(), axis=1)
    states = np.empty((n, T), dtype=int)
    states[:, 0] = _sample_rows(np.broadcast_to(pi_cum, (n, params.k)), rng.random(n))
    for t in range(1, T):
        rows = P_cum[states[:, t - 1]]
        states[:, t] = _sample_rows(rows, rng.random(n))
    return states


def simulate_panel(params: ModelParams, n: int, seed, *, T: int | None = None,
                   covariates: np.ndarray | None = None,
                   covariate_names: tuple[str, ...] = (),
                   design: CovariateDesign | None = None,
                   levels: tuple[int, ...] | None = None,
                   return_states: bool = False):
    """Simulate a panel of n subjects. Deterministic given the seed.

    T is taken from a time-varying emission tensor or the covariate array when
    not passed explicitly. The covariate variant requires raw covariate
    columns plus a design recipe; the realized design matrix drives the
    marginal logits.
    """
    rng = _as_rng(seed)
    m = params.measurement

    if isinstance(m, CovariateMeasurement):
        if covariates is None or design is None:
            raise ModelError("covariate variant needs covariates and a design recipe")
        covariates = np.asarray(covariates, dtype=float)
        if covariates.ndim != 3 or covariates.shape[0] != n:
            raise ModelError("covariates must be [n, T, c]")
        T = covariates.shape[1]
    elif isinstance(m, BasicMeasurement) and m.time_varying:
        T = m.emit_w.shape[2]
    if T is None:
        raise ModelError("T is required for time-homogeneous simulation")

    states = simulate_latent_paths(params, n, T, rng)

    if isinstance(m, BasicMeasurement):
        if levels is None:
            # default reading: a single response variable over all L rows
            levels = (m.emit_w.shape[0],)
        if sum(levels) != m.emit_w.shape[0]:
            raise ModelError("levels do not match the emission tensor")
        phi = basic_emission_probs(m.emit_w, tuple(levels))
        responses = np.empty((n, T, len(levels)), dtype=int)
        base = 0
        for j, l in enumerate(levels):
            block = phi[base:base + l]
            cum = np.cumsum(block, axis=0)  # [l, k(, T)]
            for t in range(T):
                col = cum[:, states[:, t], t] if m.time_varying else cum[:, states[:, t]]
                responses[:, t, j] = _sample_rows(col.T, rng.random(n))
            base += l
        data = PanelDataset(responses, tuple(levels))
    elif isinstance(m, CutpointMeasurement):
        phi = cutpoint_emission_probs(m.tendency, m.cutpoints)
        cum = np.cumsum(phi, axis=0)
        responses = np.empty((n, T, 1), dtype=int)
        for t in range(T):
            responses[:, t, 0] = _sample_rows(cum[:, states[:, t]].T, rng.random(n))
        data = PanelDataset(responses, (phi.shape[0],))
    else:
        probe = PanelDataset(np.zeros((n, T, 2), dtype=int), (2, 2),
                             covariates=covariates, covariate_names=covariate_names,
                             design=design)
        X = probe.design_matrix()
        p = X.shape[2]
        if m.slopes.shape[0] != 2 * p:
            raise ModelError(f"slopes sized {m.slopes.shape[0]}, design implies {2 * p}")
        p1, p2 = covariate_marginal_probs(m, X, p)  # [n, T, k]
        cells = joint_cells(p1, p2, float(m.log_odds[0]))  # [n, T, k, 4]
        responses = np.empty((n, T, 2), dtype=int)
        for t in range(T):
            tab = cells[np.arange(n), t, states[:, t]]  # [n, 4]
            code = _sample_rows(np.cumsum(tab, axis=1), rng.random(n))
            responses[:, t, 0] = code // 2
            responses[:, t, 1] = code % 2
        data = PanelDataset(responses, (2, 2), covariates=covariates,
                            covariate_names=covariate_names, design=design)

    if return_states:
        return data, states
    return data
