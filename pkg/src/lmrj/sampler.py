"""Reversible-jump MCMC over (k, theta).

Every sweep runs block-wise Metropolis-Hastings updates at fixed k (log-scale
random walks for positive weight blocks, additive walks for real-valued
blocks), then exactly one trans-dimensional attempt: a fair coin picks the
split/combine family or the birth/death family, and within the family the
direction is a fair coin away from the boundaries (split forced at k=1,
combine forced at k=k_max, same for birth/death).

Dimension bookkeeping, chosen so the acceptance ratios below are exactly
detailed-balanced:

* split picks the parent uniformly among k states and inserts the second
  child at a uniform position among k+1 slots; the first child keeps the
  parent's slot;
* combine picks an ordered pair (first child, second child) uniformly among
  (k+1)k ordered pairs, which is the same as a uniform unordered pair plus a
  fair role assignment; the merged state takes the first child's slot;
* birth inserts the new state at a uniform position; death deletes a
  uniformly chosen state.

With these conventions the position factors cancel and the split acceptance
reduces to

    log A = dlog L + dlog prior + log(Pc(k+1)/Ps(k)) + log|J| - log q(aux)

with |J| = |J1 J2 J3 J4 J5| the product of the five block determinants of the
split map, and q(aux) the density of the non-uniform auxiliaries. Birth uses
the prior as proposal for the new block, so log A = dlog L + dlog prior +
log(Pd(k+1)/Pb(k)) - log prior(new block); combine and death accept with the
negated log ratio of the matching reverse move.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ModelError
from .likelihood import build_likelihood, infer_structure
from .params import (
    BasicMeasurement,
    CovariateMeasurement,
    CutpointMeasurement,
    ModelParams,
    ModelStructure,
)
from .priors import (
    PriorSpec,
    StateBlock,
    draw_state_block,
    log_prior,
    normal_logpdf,
    state_block_logpdf,
)
from .trace import (
    MOVE_BIRTH,
    MOVE_COMBINE,
    MOVE_DEATH,
    MOVE_NONE,
    MOVE_SPLIT,
    MoveCounters,
    TraceCollector,
    TraceMeta,
    mh_block_names,
)


@dataclass
class SamplerConfig:
    sweeps: int
    burn_in: int = 0
    seed: int = 0
    # random-walk standard deviations
    step_init: float = 0.5
    step_trans: float = 0.1
    step_emit: float = 0.2
    step_tendency: float = 0.5
    step_cutpoints: float = 0.5
    step_support: float = 0.5
    step_slopes: float = 0.1
    step_log_odds: float = 0.1
    # split auxiliary distributions (Gamma shape/rate, Normal sd)
    a_row: float = 1.0
    b_row: float = 1.0
    a_diag: float = 1.0
    b_diag: float = 1.0
    a_emit: float = 1.0
    b_emit: float = 1.0
    split_step_support: float = 2.0
    split_step_tendency: float = 0.2
    # cached-value consistency check interval, in sweeps
    check_every: int = 10_000

    def __post_init__(self):
        if self.sweeps < 0:
            raise ModelError("sweeps must be >= 0")
        if self.sweeps == 0:
            if self.burn_in != 0:
                raise ModelError("burn_in must be 0 for an empty run")
        elif not 0 <= self.burn_in < self.sweeps:
            raise ModelError("burn_in must satisfy 0 <= burn_in < sweeps")
        for name in ("step_init", "step_trans", "step_emit", "step_tendency",
                     "step_cutpoints", "step_support", "step_slopes", "step_log_odds",
                     "a_row", "b_row", "a_diag", "b_diag", "a_emit", "b_emit",
                     "split_step_support", "split_step_tendency"):
            if getattr(self, name) <= 0:
                raise ModelError(f"{name} must be positive")
        if self.check_every < 1:
            raise ModelError("check_every must be >= 1")

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in (
            "sweeps", "burn_in", "seed", "step_init", "step_trans", "step_emit",
            "step_tendency", "step_cutpoints", "step_support", "step_slopes",
            "step_log_odds", "a_row", "b_row", "a_diag", "b_diag", "a_emit",
            "b_emit", "split_step_support", "split_step_tendency", "check_every")}

    @classmethod
    def from_dict(cls, d: dict) -> "SamplerConfig":
        return cls(**d)


@dataclass
class ChainState:
    params: ModelParams
    loglik: float
    logprior: float
    counters: MoveCounters = field(default=None)  # shared tallies, owned by the sampler

    @property
    def k(self) -> int:
        return self.params.k


@dataclass
class SplitAux:
    """Auxiliary draws of a split, indexed by ascending other-state order."""

    rho: float
    rho_col: np.ndarray
    rho_diag: float
    theta_row: np.ndarray
    theta_diag: tuple[float, float]
    meas: np.ndarray


def split_prob(k: int, k_max: int) -> float:
    """Probability of proposing the dimension-increasing direction at k."""
    if k_max == 1:
        return 0.0
    if k == 1:
        return 1.0
    if k == k_max:
        return 0.0
    return 0.5


def combine_prob(k: int, k_max: int) -> float:
    if k_max == 1:
        return 0.0
    return 1.0 - split_prob(k, k_max)


def _others(k: int, u0: int) -> np.ndarray:
    return np.array([i for i in range(k) if i != u0], dtype=int)


def _split_measurement(meas, u0: int, aux: np.ndarray):
    """Child measurement column values (c1, c2) from the parent column."""
    if isinstance(meas, BasicMeasurement):
        col = meas.emit_w[:, u0]
        return col * aux, col / aux
    if isinstance(meas, CutpointMeasurement):
        z = meas.tendency[u0]
        return z - aux[0], z + aux[0]
    col = meas.support[:, u0]
    return col - aux, col + aux


def _insert_meas_column(meas, s: int, c1, c2, u0: int):
    """Measurement block at k+1: child1 overwrites u0, child2 inserted at s."""
    if isinstance(meas, BasicMeasurement):
        w = meas.emit_w.copy()
        w[:, u0] = c1
        return BasicMeasurement(np.insert(w, s, c2, axis=1))
    if isinstance(meas, CutpointMeasurement):
        z = meas.tendency.copy()
        z[u0] = c1
        return CutpointMeasurement(np.insert(z, s, c2), meas.cutpoints.copy())
    sup = meas.support.copy()
    sup[:, u0] = c1
    return CovariateMeasurement(np.insert(sup, s, c2, axis=1),
                                meas.slopes.copy(), meas.log_odds.copy())


def apply_split(params: ModelParams, u0: int, aux: SplitAux, s: int) -> ModelParams:
    """Deterministic split map: parent state u0 at dimension k, second child
    inserted at slot s of the new dimension k+1."""
    k = params.k
    others = _others(k, u0)

    lam0 = params.init_w[u0]
    init_mid = params.init_w.copy()
    init_mid[u0] = lam0 * aux.rho
    init_new = np.insert(init_mid, s, lam0 * (1.0 - aux.rho))

    W = params.trans_w
    col0 = W[others, u0]
    row0 = W[u0, others]
    d0 = W[u0, u0]
    d11 = d0 * aux.rho_diag * aux.theta_diag[0]
    d12 = d0 * (1.0 - aux.rho_diag) * aux.theta_diag[1]
    d21 = d0 * aux.rho_diag / aux.theta_diag[0]
    d22 = d0 * (1.0 - aux.rho_diag) / aux.theta_diag[1]

    mid = W.copy()
    mid[others, u0] = col0 * aux.rho_col
    mid[u0, others] = row0 * aux.theta_row
    mid[u0, u0] = d11
    col2 = np.empty(k)
    col2[others] = col0 * (1.0 - aux.rho_col)
    col2[u0] = d12
    tmp = np.insert(mid, s, col2, axis=1)
    row2 = np.empty(k + 1)
    row2[others + (others >= s)] = row0 / aux.theta_row
    row2[u0 + (u0 >= s)] = d21
    row2[s] = d22
    trans_new = np.insert(tmp, s, row2, axis=0)

    c1, c2 = _split_measurement(params.measurement, u0, aux.meas)
    meas_new = _insert_meas_column(params.measurement, s, c1, c2, u0)
    return ModelParams(init_new, trans_new, meas_new)


def _delete_meas_column(meas, pos: int):
    if isinstance(meas, BasicMeasurement):
        return BasicMeasurement(np.delete(meas.emit_w, pos, axis=1)), meas.emit_w[:, pos].copy()
    if isinstance(meas, CutpointMeasurement):
        return (CutpointMeasurement(np.delete(meas.tendency, pos), meas.cutpoints.copy()),
                np.array([meas.tendency[pos]]))
    return (CovariateMeasurement(np.delete(meas.support, pos, axis=1),
                                 meas.slopes.copy(), meas.log_odds.copy()),
            meas.support[:, pos].copy())


def _set_meas_column(meas, pos: int, col):
    if isinstance(meas, BasicMeasurement):
        w = meas.emit_w.copy()
        w[:, pos] = col
        return BasicMeasurement(w)
    if isinstance(meas, CutpointMeasurement):
        z = meas.tendency.copy()
        z[pos] = col if np.isscalar(col) else col[0]
        return CutpointMeasurement(z, meas.cutpoints.copy())
    sup = meas.support.copy()
    sup[:, pos] = col
    return CovariateMeasurement(sup, meas.slopes.copy(), meas.log_odds.copy())


def _meas_column(meas, pos: int) -> np.ndarray:
    if isinstance(meas, BasicMeasurement):
        return meas.emit_w[:, pos]
    if isinstance(meas, CutpointMeasurement):
        return np.array([meas.tendency[pos]])
    return meas.support[:, pos]


def apply_combine(params: ModelParams, pos1: int, pos2: int):
    """Merge the ordered child pair (pos1, pos2) at dimension k+1.

    Returns (parent params at dimension k, parent index u0, recovered SplitAux)
    such that apply_split(parent, u0, aux, pos2) reproduces the input exactly.
    """
    if pos1 == pos2:
        raise ModelError("combine needs two distinct states")
    k1 = params.k
    u0 = pos1 - (1 if pos2 < pos1 else 0)
    others1 = np.array([i for i in range(k1) if i not in (pos1, pos2)], dtype=int)

    l1, l2 = params.init_w[pos1], params.init_w[pos2]
    rho = l1 / (l1 + l2)
    init_new = np.delete(params.init_w, pos2)
    init_new[u0] = l1 + l2

    W = params.trans_w
    c1 = W[others1, pos1]
    c2 = W[others1, pos2]
    rho_col = c1 / (c1 + c2)
    r1 = W[pos1, others1]
    r2 = W[pos2, others1]
    row0 = np.sqrt(r1 * r2)
    theta_row = np.sqrt(r1 / r2)
    a = math.sqrt(W[pos1, pos1] * W[pos2, pos1])
    b = math.sqrt(W[pos1, pos2] * W[pos2, pos2])
    d0 = a + b
    rho_diag = a / d0
    theta_diag = (math.sqrt(W[pos1, pos1] / W[pos2, pos1]),
                  math.sqrt(W[pos1, pos2] / W[pos2, pos2]))

    trans_new = np.delete(np.delete(W, pos2, axis=0), pos2, axis=1)
    u0_others = others1 - (others1 > pos2)
    trans_new[u0_others, u0] = c1 + c2
    trans_new[u0, u0_others] = row0
    trans_new[u0, u0] = d0

    m = params.measurement
    m1 = _meas_column(m, pos1)
    m2 = _meas_column(m, pos2)
    if isinstance(m, BasicMeasurement):
        parent_col = np.sqrt(m1 * m2)
        meas_aux = np.sqrt(m1 / m2)
    else:
        parent_col = 0.5 * (m1 + m2)
        meas_aux = 0.5 * (m2 - m1)
    meas_del, _ = _delete_meas_column(m, pos2)
    meas_new = _set_meas_column(meas_del, u0, parent_col)

    aux = SplitAux(rho=float(rho), rho_col=rho_col, rho_diag=float(rho_diag),
                   theta_row=theta_row, theta_diag=theta_diag, meas=meas_aux)
    return ModelParams(init_new, trans_new, meas_new), u0, aux


def split_log_jacobian(params: ModelParams, u0: int, aux: SplitAux) -> float:
    """log |J| of the split map, evaluated at the parent state."""
    k = params.k
    others = _others(k, u0)
    W = params.trans_w
    total = math.log(params.init_w[u0])
    if k > 1:
        total += float(np.log(W[others, u0]).sum())
        total += (k - 1) * math.log(2.0)
        total += float((np.log(W[u0, others]) - np.log(aux.theta_row)).sum())
    total += math.log(4.0) + 3.0 * math.log(W[u0, u0])
    total += math.log(aux.rho_diag) + math.log(1.0 - aux.rho_diag)
    total -= math.log(aux.theta_diag[0]) + math.log(aux.theta_diag[1])
    m = params.measurement
    if isinstance(m, BasicMeasurement):
        col = m.emit_w[:, u0]
        total += float((math.log(2.0) + np.log(col) - np.log(aux.meas)).sum())
    elif isinstance(m, CutpointMeasurement):
        total += math.log(2.0)
    else:
        total += m.support.shape[0] * math.log(2.0)
    return total


def split_aux_logpdf(aux: SplitAux, cfg: SamplerConfig, variant: str) -> float:
    """Log-density of the non-uniform auxiliaries (uniform terms are zero)."""
    def gam(x, a, b):
        x = np.asarray(x, dtype=float)
        return a * math.log(b) + (a - 1.0) * np.log(x) - b * x - math.lgamma(a)

    total = float(gam(aux.theta_row, cfg.a_row, cfg.b_row).sum())
    total += float(gam(np.array(aux.theta_diag), cfg.a_diag, cfg.b_diag).sum())
    if variant == "basic":
        total += float(gam(aux.meas, cfg.a_emit, cfg.b_emit).sum())
    elif variant == "cutpoint":
        total += float(normal_logpdf(aux.meas, cfg.split_step_tendency ** 2).sum())
    else:
        total += float(normal_logpdf(aux.meas, cfg.split_step_support ** 2).sum())
    return total


def draw_split_aux(params: ModelParams, u0: int, cfg: SamplerConfig,
                   structure: ModelStructure, rng: np.random.Generator) -> SplitAux:
    k = params.k
    rho = rng.uniform()
    rho_col = rng.uniform(size=k - 1)
    theta_row = rng.gamma(cfg.a_row, size=k - 1) / cfg.b_row
    rho_diag = rng.uniform()
    theta_diag = (rng.gamma(cfg.a_diag) / cfg.b_diag, rng.gamma(cfg.a_diag) / cfg.b_diag)
    if structure.variant == "basic":
        shape = params.measurement.emit_w[:, u0].shape
        meas = rng.gamma(cfg.a_emit, size=shape) / cfg.b_emit
    elif structure.variant == "cutpoint":
        meas = rng.normal(0.0, cfg.split_step_tendency, size=1)
    else:
        meas = rng.normal(0.0, cfg.split_step_support, size=structure.n_support)
    return SplitAux(rho=float(rho), rho_col=rho_col, rho_diag=float(rho_diag),
                    theta_row=theta_row, theta_diag=theta_diag, meas=meas)


def insert_state_block(params: ModelParams, block: StateBlock, s: int) -> ModelParams:
    """Grow to k+1 states by inserting the block at slot s."""
    k = params.k
    init_new = np.insert(params.init_w, s, block.init_val)
    tmp = np.insert(params.trans_w, s, block.col, axis=1)
    row = np.empty(k + 1)
    keep = np.arange(k)
    row[keep + (keep >= s)] = block.row_off
    row[s] = block.row_diag
    trans_new = np.insert(tmp, s, row, axis=0)
    m = params.measurement
    if isinstance(m, BasicMeasurement):
        meas_new = BasicMeasurement(np.insert(m.emit_w, s, block.meas, axis=1))
    elif isinstance(m, CutpointMeasurement):
        meas_new = CutpointMeasurement(np.insert(m.tendency, s, block.meas[0]),
                                       m.cutpoints.copy())
    else:
        meas_new = CovariateMeasurement(np.insert(m.support, s, block.meas, axis=1),
                                        m.slopes.copy(), m.log_odds.copy())
    return ModelParams(init_new, trans_new, meas_new)


def remove_state_block(params: ModelParams, s: int):
    """Inverse of insert_state_block: returns (smaller params, extracted block)."""
    k = params.k
    others = _others(k, s)
    block = StateBlock(
        init_val=float(params.init_w[s]),
        row_off=params.trans_w[s, others].copy(),
        row_diag=float(params.trans_w[s, s]),
        col=params.trans_w[others, s].copy(),
        meas=_meas_column(params.measurement, s).copy(),
    )
    init_new = np.delete(params.init_w, s)
    trans_new = np.delete(np.delete(params.trans_w, s, axis=0), s, axis=1)
    meas_new, _ = _delete_meas_column(params.measurement, s)
    return ModelParams(init_new, trans_new, meas_new), block


class RJSampler:
    """One chain's move kernels; all randomness flows through the given rng."""

    def __init__(self, evaluator, prior: PriorSpec, cfg: SamplerConfig,
                 structure: ModelStructure, rng: np.random.Generator):
        self.evaluator = evaluator
        self.prior = prior
        self.cfg = cfg
        self.structure = structure
        self.rng = rng
        self.blocks = mh_block_names(structure)

    # -- within-model updates ------------------------------------------------

    def _propose_block(self, params: ModelParams, name: str):
        """Returns (proposal params, log Jacobian of the transform)."""
        cfg, rng = self.cfg, self.rng
        m = params.measurement
        if name == "init":
            eps = rng.normal(0.0, cfg.step_init, size=params.k)
            return ModelParams(params.init_w * np.exp(eps), params.trans_w, m), float(eps.sum())
        if name == "trans":
            eps = rng.normal(0.0, cfg.step_trans, size=(params.k, params.k))
            return ModelParams(params.init_w, params.trans_w * np.exp(eps), m), float(eps.sum())
        if name == "emit":
            eps = rng.normal(0.0, cfg.step_emit, size=m.emit_w.shape)
            return params.replace_measurement(BasicMeasurement(m.emit_w * np.exp(eps))), float(eps.sum())
        if name == "tendency":
            eps = rng.normal(0.0, cfg.step_tendency, size=params.k)
            return params.replace_measurement(
                CutpointMeasurement(m.tendency + eps, m.cutpoints)), 0.0
        if name == "cutpoints":
            eps = rng.normal(0.0, cfg.step_cutpoints, size=m.cutpoints.shape)
            return params.replace_measurement(
                CutpointMeasurement(m.tendency, m.cutpoints + eps)), 0.0
        if name == "support":
            eps = rng.normal(0.0, cfg.step_support, size=m.support.shape)
            return params.replace_measurement(
                CovariateMeasurement(m.support + eps, m.slopes, m.log_odds)), 0.0
        if name == "coef":
            eps_b = rng.normal(0.0, cfg.step_slopes, size=m.slopes.shape)
            eps_g = rng.normal(0.0, cfg.step_log_odds, size=m.log_odds.shape)
            return params.replace_measurement(
                CovariateMeasurement(m.support, m.slopes + eps_b, m.log_odds + eps_g)), 0.0
        raise ModelError(f"unknown MH block {name!r}")

    def _accept(self, log_a: float) -> bool:
        # NaN compares false, so poisoned ratios are rejected
        return math.log(self.rng.uniform()) < log_a

    def mh_sweep(self, state: ChainState) -> np.ndarray:
        """One accept/reject pass over every block; mutates state in place."""
        bits = np.zeros(len(self.blocks), dtype=bool)
        for i, name in enumerate(self.blocks):
            proposal, log_jac = self._propose_block(state.params, name)
            ll = self.evaluator.loglik(proposal)
            lp = log_prior(proposal, self.prior)
            log_a = (ll - state.loglik) + (lp - state.logprior) + log_jac
            ok = self._accept(log_a) and math.isfinite(ll) and math.isfinite(lp)
            if ok:
                state.params, state.loglik, state.logprior = proposal, ll, lp
            bits[i] = ok
            if state.counters is not None:
                state.counters.bump(name, ok)
        return bits

    # -- trans-dimensional moves ----------------------------------------------

    def split_move(self, state: ChainState):
        k = state.k
        rng = self.rng
        u0 = int(rng.integers(k))
        s = int(rng.integers(k + 1))
        aux = draw_split_aux(state.params, u0, self.cfg, self.structure, rng)
        proposal = apply_split(state.params, u0, aux, s)
        ll = self.evaluator.loglik(proposal)
        lp = log_prior(proposal, self.prior)
        log_a = ((ll - state.loglik) + (lp - state.logprior)
                 + math.log(combine_prob(k + 1, self.prior.k_max))
                 - math.log(split_prob(k, self.prior.k_max))
                 + split_log_jacobian(state.params, u0, aux)
                 - split_aux_logpdf(aux, self.cfg, self.structure.variant))
        return proposal, ll, lp, log_a

    def combine_move(self, state: ChainState):
        k1 = state.k
        rng = self.rng
        pos1 = int(rng.integers(k1))
        pos2 = int(rng.integers(k1 - 1))
        if pos2 >= pos1:
            pos2 += 1
        proposal, u0, aux = apply_combine(state.params, pos1, pos2)
        ll = self.evaluator.loglik(proposal)
        lp = log_prior(proposal, self.prior)
        # negate the log ratio of the reverse split (parent -> current)
        log_rev = ((state.loglik - ll) + (state.logprior - lp)
                   + math.log(combine_prob(k1, self.prior.k_max))
                   - math.log(split_prob(k1 - 1, self.prior.k_max))
                   + split_log_jacobian(proposal, u0, aux)
                   - split_aux_logpdf(aux, self.cfg, self.structure.variant))
        return proposal, ll, lp, -log_rev

    def birth_move(self, state: ChainState):
        k = state.k
        rng = self.rng
        s = int(rng.integers(k + 1))
        block, log_q = draw_state_block(self.prior, k + 1, self.structure, rng)
        proposal = insert_state_block(state.params, block, s)
        ll = self.evaluator.loglik(proposal)
        lp = log_prior(proposal, self.prior)
        log_a = ((ll - state.loglik) + (lp - state.logprior)
                 + math.log(combine_prob(k + 1, self.prior.k_max))
                 - math.log(split_prob(k, self.prior.k_max))
                 - log_q)
        return proposal, ll, lp, log_a

    def death_move(self, state: ChainState):
        k1 = state.k
        s = int(self.rng.integers(k1))
        proposal, block = remove_state_block(state.params, s)
        log_q = state_block_logpdf(block, self.prior, k1, self.structure)
        ll = self.evaluator.loglik(proposal)
        lp = log_prior(proposal, self.prior)
        log_rev = ((state.loglik - ll) + (state.logprior - lp)
                   + math.log(combine_prob(k1, self.prior.k_max))
                   - math.log(split_prob(k1 - 1, self.prior.k_max))
                   - log_q)
        return proposal, ll, lp, -log_rev

    def trans_step(self, state: ChainState):
        """One trans-dimensional attempt; returns (move code, accepted)."""
        k_max = self.prior.k_max
        if k_max == 1:
            return MOVE_NONE, False
        rng = self.rng
        k = state.k
        grow_family = rng.uniform() < 0.5  # split/combine vs birth/death
        p_up = split_prob(k, k_max)
        if p_up == 1.0:
            up = True
        elif p_up == 0.0:
            up = False
        else:
            up = rng.uniform() < 0.5
        if grow_family:
            move, code = (self.split_move, MOVE_SPLIT) if up else (self.combine_move, MOVE_COMBINE)
            name = "split" if up else "combine"
        else:
            move, code = (self.birth_move, MOVE_BIRTH) if up else (self.death_move, MOVE_DEATH)
            name = "birth" if up else "death"
        proposal, ll, lp, log_a = move(state)
        ok = self._accept(log_a) and math.isfinite(ll) and math.isfinite(lp)
        if ok:
            state.params, state.loglik, state.logprior = proposal, ll, lp
        if state.counters is not None:
            state.counters.bump(name, ok)
        return code, ok

    def check_cache(self, state: ChainState) -> None:
        ll = self.evaluator.loglik(state.params)
        lp = log_prior(state.params, self.prior)
        if abs(ll - state.loglik) > 1e-8 or abs(lp - state.logprior) > 1e-8:
            raise ModelError(
                f"cached posterior drifted: loglik {state.loglik} vs {ll}, "
                f"logprior {state.logprior} vs {lp}")


def _structure_from_params(params: ModelParams) -> ModelStructure:
    m = params.measurement
    if isinstance(m, BasicMeasurement):
        T = m.emit_w.shape[2] if m.time_varying else 1
        return ModelStructure("basic", T=T, levels=(m.emit_w.shape[0],),
                              time_varying=m.time_varying)
    if isinstance(m, CutpointMeasurement):
        return ModelStructure("cutpoint", T=1, levels=(m.cutpoints.shape[0] + 1,))
    return ModelStructure("covariate", T=1, levels=(2, 2),
                          n_covariates=m.slopes.shape[0] // 2)


def run_chain(data, prior: PriorSpec, cfg: SamplerConfig, init: ModelParams,
              structure: ModelStructure | None = None, sink=None):
    """Run one chain. ``data`` may be a PanelDataset, a prebuilt evaluator, or
    None for a prior-only (constant likelihood) run.

    Returns the collected ChainTrace when no sink is supplied, else whatever
    the sink's ``result()`` returns (None for pure writers).
    """
    if hasattr(data, "loglik"):
        evaluator = data
        structure = structure or getattr(data, "structure", None)
    elif data is None:
        structure = structure or _structure_from_params(init)
        evaluator = build_likelihood(None, structure)
    else:
        structure = structure or infer_structure(init, data)
        evaluator = build_likelihood(data, structure)
    if structure is None:
        raise ModelError("model structure could not be inferred; pass it explicitly")
    init.validate(structure)
    if init.k > prior.k_max:
        raise ModelError(f"initial k={init.k} exceeds k_max={prior.k_max}")

    rng = np.random.default_rng(cfg.seed)
    sampler = RJSampler(evaluator, prior, cfg, structure, rng)
    counters = MoveCounters(list(sampler.blocks) + ["split", "combine", "birth", "death"])
    state = ChainState(init.copy(), evaluator.loglik(init), log_prior(init, prior), counters)
    if not math.isfinite(state.loglik):
        raise ModelError("initial parameters have zero likelihood")
    if not math.isfinite(state.logprior):
        raise ModelError("initial parameters have zero prior density")

    own_sink = sink is None
    if own_sink:
        sink = TraceCollector()
    meta = TraceMeta(structure=structure, k_max=prior.k_max, seed=cfg.seed,
                     sweeps=cfg.sweeps, mh_blocks=sampler.blocks,
                     prior=prior.to_dict(), sampler=cfg.to_dict())
    sink.start(meta)

    for sweep in range(cfg.sweeps):
        bits = sampler.mh_sweep(state)
        move, accepted = sampler.trans_step(state)
        if not (math.isfinite(state.loglik) and math.isfinite(state.logprior)):
            raise ModelError(f"non-finite chain state at sweep {sweep}")
        if (sweep + 1) % cfg.check_every == 0:
            sampler.check_cache(state)
        sink.record(sweep, state.k, state.loglik, state.logprior, move, accepted,
                    bits, state.params.flatten())
    sink.finish(counters)
    return sink.result() if hasattr(sink, "result") else None


def frequency_start(data, structure: ModelStructure) -> ModelParams:
    """Single-state starting point from marginal response frequencies."""
    if structure.variant == "basic":
        freqs = []
        for j, l in enumerate(structure.levels):
            counts = np.bincount(data.responses[:, :, j].ravel(), minlength=l).astype(float)
            freqs.append((counts + 0.5) / (counts + 0.5).sum())
        col = np.concatenate(freqs)
        w = col[:, None] if not structure.time_varying \
            else np.repeat(col[:, None, None], structure.T, axis=2)
        meas = BasicMeasurement(w)
    elif structure.variant == "cutpoint":
        l = structure.levels[0]
        counts = np.bincount(data.responses[:, :, 0].ravel(), minlength=l) + 0.5
        f = counts / counts.sum()
        # with a single state the tendency is absorbed by the cutpoints
        meas = CutpointMeasurement(np.zeros(1), np.log(f[1:] / f[:-1]))
    else:
        y = data.responses
        n_tot = y.shape[0] * y.shape[1]
        sup = np.empty((2, 1))
        for h in range(2):
            p = (y[:, :, h].sum() + 0.5) / (n_tot + 1.0)
            sup[h, 0] = math.log(p / (1.0 - p))
        cells = np.zeros((2, 2)) + 0.5
        for a in range(2):
            for b in range(2):
                cells[a, b] += ((y[:, :, 0] == a) & (y[:, :, 1] == b)).sum()
        lor = math.log(cells[1, 1] * cells[0, 0] / (cells[1, 0] * cells[0, 1]))
        meas = CovariateMeasurement(sup, np.zeros(structure.n_slopes), np.array([lor]))
    return ModelParams(np.ones(1), np.ones((1, 1)), meas)
