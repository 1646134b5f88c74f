"""Manifest-distribution evaluation via the scaled forward recursion.

For a response sequence y with emission probabilities E_t(u) = p(y^(t) | u),
the forward vector satisfies q^(1) = E_1 * pi and q^(t) = E_t * (P' q^(t-1));
the sequence likelihood is the sum of q^(T). Each step rescales q by its sum
and accumulates the log scale factor, so log f is exact up to float error for
any horizon.

Three evaluator classes precompute per-dataset gather indices so repeated
calls inside the sampler touch only O(m T k) flops:

* ``AggregatedSequenceLikelihood``: basic and cutpoint variants; identical
  response sequences are collapsed to (unique sequence, count) pairs.
* ``BivariateCovariateLikelihood``: per-subject emission cells from marginal
  logits and a constant log-odds ratio.
* ``ConstantLikelihood``: data-free stub (prior-only runs).
"""

from __future__ import annotations

import numpy as np
from scipy.special import expit

from .bivariate import joint_cells
from .dataset import PanelDataset
from .errors import DataError, ModelError
from .params import (
    BasicMeasurement,
    CovariateMeasurement,
    CutpointMeasurement,
    ModelParams,
    ModelStructure,
)


def basic_emission_probs(emit_w: np.ndarray, levels: tuple[int, ...]) -> np.ndarray:
    """Normalize the stacked weight tensor per variable block: [L, k(, T)]."""
    phi = np.empty_like(emit_w)
    base = 0
    for l in levels:
        block = emit_w[base:base + l]
        phi[base:base + l] = block / block.sum(axis=0, keepdims=True)
        base += l
    return phi


def cutpoint_emission_probs(tendency: np.ndarray, cutpoints: np.ndarray) -> np.ndarray:
    """Response probabilities [l, k] from adjacent-category logits.

    Cumulative logit of category y against the base category is
    y * tendency_u + sum of the first y cutpoints; a max-subtracted softmax
    over categories recovers the probabilities without overflow.
    """
    l = cutpoints.shape[0] + 1
    csum = np.concatenate([[0.0], np.cumsum(cutpoints)])
    logits = np.arange(l)[:, None] * tendency[None, :] + csum[:, None]
    logits = logits - logits.max(axis=0, keepdims=True)
    w = np.exp(logits)
    return w / w.sum(axis=0, keepdims=True)


def covariate_marginal_probs(m: CovariateMeasurement, X: np.ndarray, p: int):
    """Success margins of both responses for every (subject, occasion, state)."""
    b1 = m.slopes[:p]
    b2 = m.slopes[p:]
    lin1 = X @ b1
    lin2 = X @ b2
    eta1 = m.support[0][None, None, :] + lin1[:, :, None]
    eta2 = m.support[1][None, None, :] + lin2[:, :, None]
    return expit(eta1), expit(eta2)


def conditional_response_probs(params: ModelParams, structure: ModelStructure,
                               x: np.ndarray | None = None,
                               t: int | None = None) -> np.ndarray:
    """Distribution over response configurations per state: [n_configs, k].

    Configurations enumerate the response vector lexicographically (last
    variable fastest). The covariate variant requires the design vector x of
    the subject-occasion; the time-varying basic variant requires t (1-based).
    """
    params.validate(structure)
    m = params.measurement
    if isinstance(m, BasicMeasurement):
        phi = basic_emission_probs(m.emit_w, structure.levels)
        if m.time_varying:
            if t is None:
                raise ModelError("time-varying model needs an occasion index t")
            phi = phi[:, :, t - 1]
        out = None
        base = 0
        for l in structure.levels:
            block = phi[base:base + l]
            out = block if out is None else (out[:, None, :] * block[None, :, :]).reshape(-1, params.k)
            base += l
        return out
    if isinstance(m, CutpointMeasurement):
        return cutpoint_emission_probs(m.tendency, m.cutpoints)
    if x is None:
        raise ModelError("covariate variant needs the design vector x")
    x = np.asarray(x, dtype=float)
    if x.shape != (structure.n_covariates,):
        raise ModelError(f"design vector must have length {structure.n_covariates}")
    p1, p2 = covariate_marginal_probs(m, x[None, None, :], structure.n_covariates)
    cells = joint_cells(p1, p2, float(m.log_odds[0]))  # [1, 1, k, 4]
    return cells[0, 0].T


def _forward(E: np.ndarray, pi: np.ndarray, P: np.ndarray, counts: np.ndarray) -> float:
    """Count-weighted total log-likelihood from emission probs E [m, T, k]."""
    m, T, _ = E.shape
    q = E[:, 0, :] * pi[None, :]
    tot = np.zeros(m)
    dead = np.zeros(m, dtype=bool)
    for t in range(1, T + 1):
        s = q.sum(axis=1)
        dead |= ~(s > 0.0)
        safe = np.where(dead, 1.0, s)
        tot += np.log(safe)
        if t == T:
            break
        q = (q / safe[:, None]) @ P * E[:, t, :]
    tot[dead] = -np.inf
    with np.errstate(invalid="ignore"):
        total = float(tot @ counts)
    return total


def _forward_unscaled(E: np.ndarray, pi: np.ndarray, P: np.ndarray) -> np.ndarray:
    """Textbook recursion without rescaling; underflows for long horizons.

    Kept for equivalence testing against the scaled version.
    """
    q = E[:, 0, :] * pi[None, :]
    for t in range(1, E.shape[1]):
        q = (q @ P) * E[:, t, :]
    with np.errstate(divide="ignore"):
        return np.log(q.sum(axis=1))


class ConstantLikelihood:
    """Data-free evaluator: log-likelihood identically zero."""

    def __init__(self, structure: ModelStructure):
        self.structure = structure

    def loglik(self, params: ModelParams) -> float:
        params.validate(self.structure)
        return 0.0


class AggregatedSequenceLikelihood:
    """Forward likelihood over unique response sequences (basic / cutpoint)."""

    def __init__(self, data: PanelDataset, structure: ModelStructure):
        if structure.variant not in ("basic", "cutpoint"):
            raise ModelError("aggregated evaluator covers basic and cutpoint variants")
        if tuple(data.levels) != structure.levels or data.T != structure.T:
            raise DataError("dataset shape does not match model structure")
        self.structure = structure
        flat = data.responses.reshape(data.n, data.T * data.r)
        uniq, counts = np.unique(flat, axis=0, return_counts=True)
        self._counts = counts.astype(float)
        seqs = uniq.reshape(-1, data.T, data.r)
        # stacked-row index per (sequence, occasion, variable)
        offsets = np.concatenate([[0], np.cumsum(structure.levels[:-1])]).astype(int)
        self._rows = seqs + offsets[None, None, :]
        self._t_index = np.broadcast_to(
            np.arange(data.T)[None, :, None], self._rows.shape)

    @property
    def n_sequences(self) -> int:
        return self._rows.shape[0]

    def _emission(self, params: ModelParams) -> np.ndarray:
        m = params.measurement
        if isinstance(m, CutpointMeasurement):
            phi = cutpoint_emission_probs(m.tendency, m.cutpoints)
            return phi[self._rows[:, :, 0]]
        phi = basic_emission_probs(m.emit_w, self.structure.levels)
        if m.time_varying:
            # advanced indices on axes 0 and 2 with a slice between: the
            # broadcast index shape leads, giving [m, T, r, k]
            picked = phi[self._rows, :, self._t_index]
        else:
            picked = phi[self._rows]  # [m, T, r, k]
        return picked.prod(axis=2)

    def loglik(self, params: ModelParams) -> float:
        params.validate(self.structure)
        E = self._emission(params)
        return _forward(E, params.init_probs(), params.trans_probs(), self._counts)

    def loglik_unscaled(self, params: ModelParams) -> float:
        params.validate(self.structure)
        E = self._emission(params)
        per_seq = _forward_unscaled(E, params.init_probs(), params.trans_probs())
        return float(per_seq @ self._counts)


class BivariateCovariateLikelihood:
    """Forward likelihood for two binary responses with subject covariates."""

    def __init__(self, data: PanelDataset, structure: ModelStructure):
        if structure.variant != "covariate":
            raise ModelError("covariate evaluator requires the covariate variant")
        if tuple(data.levels) != (2, 2) or data.T != structure.T:
            raise DataError("dataset shape does not match model structure")
        self.structure = structure
        self._X = data.design_matrix()
        if self._X.shape[2] != structure.n_covariates:
            raise DataError(
                f"design width {self._X.shape[2]} does not match structure "
                f"({structure.n_covariates})")
        y = data.responses
        self._cell = (2 * y[:, :, 0] + y[:, :, 1]).astype(int)  # lexicographic cell code
        self._counts = np.ones(data.n)

    def _emission(self, params: ModelParams) -> np.ndarray:
        m = params.measurement
        p1, p2 = covariate_marginal_probs(m, self._X, self.structure.n_covariates)
        cells = joint_cells(p1, p2, float(m.log_odds[0]))  # [n, T, k, 4]
        take = np.take_along_axis(cells, self._cell[:, :, None, None], axis=3)
        return take[:, :, :, 0]

    def loglik(self, params: ModelParams) -> float:
        params.validate(self.structure)
        E = self._emission(params)
        return _forward(E, params.init_probs(), params.trans_probs(), self._counts)

    def loglik_unscaled(self, params: ModelParams) -> float:
        params.validate(self.structure)
        E = self._emission(params)
        per_subject = _forward_unscaled(E, params.init_probs(), params.trans_probs())
        return float(per_subject.sum())


def build_likelihood(data: PanelDataset | None, structure: ModelStructure):
    if data is None:
        return ConstantLikelihood(structure)
    if structure.variant == "covariate":
        return BivariateCovariateLikelihood(data, structure)
    return AggregatedSequenceLikelihood(data, structure)


def infer_structure(params: ModelParams, data: PanelDataset) -> ModelStructure:
    m = params.measurement
    if isinstance(m, BasicMeasurement):
        return ModelStructure("basic", T=data.T, levels=data.levels,
                              time_varying=m.time_varying)
    if isinstance(m, CutpointMeasurement):
        return ModelStructure("cutpoint", T=data.T, levels=data.levels)
    p = data.design_matrix().shape[2] if data.design is not None else 0
    return ModelStructure("covariate", T=data.T, levels=data.levels, n_covariates=p)


def forward_loglik(params: ModelParams, data: PanelDataset) -> float:
    """Total log-likelihood of the panel; variant inferred from the params."""
    structure = infer_structure(params, data)
    return build_likelihood(data, structure).loglik(params)
