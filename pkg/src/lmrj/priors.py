"""Prior system: Gamma(delta, 1) weights, Normal regression blocks, uniform k.

Unnormalized initial, transition, and emission weights get independent
Gamma(delta, 1) priors, so the normalized vectors are Dirichlet. The
transition shape matrix follows one of two rules:

* ``persistence``: delta_uv = k on the diagonal and 0.6 off it, favoring
  self-transitions more strongly as k grows (re-evaluated at each state
  count when dimension changes);
* ``flat``: all ones.

Real-valued measurement parameters (tendency, cutpoints, support points,
slopes, log-odds ratio) get independent N(0, sigma^2) priors, and the state
count k is uniform on {1..k_max}.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .errors import ModelError
from .params import (
    BasicMeasurement,
    CovariateMeasurement,
    CutpointMeasurement,
    ModelParams,
    ModelStructure,
)

TRANS_RULES = ("persistence", "flat")
PERSISTENCE_OFFDIAG = 0.6

LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True)
class PriorSpec:
    delta_init: float = 1.0
    trans_rule: str = "persistence"
    delta_emit: float = 1.0
    sigma2_tendency: float = 5.0
    sigma2_cutpoints: float = 5.0
    sigma2_support: float = 5.0
    sigma2_slopes: float = 5.0
    sigma2_log_odds: float = 5.0
    k_max: int = 10

    def __post_init__(self):
        if self.trans_rule not in TRANS_RULES:
            raise ModelError(f"unknown transition prior rule {self.trans_rule!r}")
        for name in ("delta_init", "delta_emit", "sigma2_tendency", "sigma2_cutpoints",
                     "sigma2_support", "sigma2_slopes", "sigma2_log_odds"):
            if getattr(self, name) <= 0:
                raise ModelError(f"{name} must be positive")
        if self.k_max < 1:
            raise ModelError("k_max must be >= 1")

    def init_shapes(self, k: int) -> np.ndarray:
        return np.full(k, self.delta_init)

    def trans_shapes(self, k: int) -> np.ndarray:
        if self.trans_rule == "flat":
            return np.ones((k, k))
        return np.full((k, k), PERSISTENCE_OFFDIAG) + (k - PERSISTENCE_OFFDIAG) * np.eye(k)

    def to_dict(self) -> dict:
        return {
            "delta_init": self.delta_init,
            "trans_rule": self.trans_rule,
            "delta_emit": self.delta_emit,
            "sigma2_tendency": self.sigma2_tendency,
            "sigma2_cutpoints": self.sigma2_cutpoints,
            "sigma2_support": self.sigma2_support,
            "sigma2_slopes": self.sigma2_slopes,
            "sigma2_log_odds": self.sigma2_log_odds,
            "k_max": self.k_max,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PriorSpec":
        return cls(**d)


def gamma_logpdf(x, shape) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    shape = np.asarray(shape, dtype=float)
    return (shape - 1.0) * np.log(x) - x - gammaln(shape)


def normal_logpdf(x, sigma2: float) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return -0.5 * (LOG_2PI + math.log(sigma2)) - 0.5 * x * x / sigma2


def log_prior(params: ModelParams, spec: PriorSpec) -> float:
    """Joint log-density of (theta, k); -inf outside the support."""
    k = params.k
    if k < 1 or k > spec.k_max:
        return -math.inf
    if np.any(params.init_w <= 0) or np.any(params.trans_w <= 0):
        return -math.inf
    total = -math.log(spec.k_max)
    total += float(gamma_logpdf(params.init_w, spec.init_shapes(k)).sum())
    total += float(gamma_logpdf(params.trans_w, spec.trans_shapes(k)).sum())
    m = params.measurement
    if isinstance(m, BasicMeasurement):
        if np.any(m.emit_w <= 0):
            return -math.inf
        total += float(gamma_logpdf(m.emit_w, spec.delta_emit).sum())
    elif isinstance(m, CutpointMeasurement):
        total += float(normal_logpdf(m.tendency, spec.sigma2_tendency).sum())
        total += float(normal_logpdf(m.cutpoints, spec.sigma2_cutpoints).sum())
    elif isinstance(m, CovariateMeasurement):
        total += float(normal_logpdf(m.support, spec.sigma2_support).sum())
        total += float(normal_logpdf(m.slopes, spec.sigma2_slopes).sum())
        total += float(normal_logpdf(m.log_odds, spec.sigma2_log_odds).sum())
    else:
        raise ModelError("unknown measurement block")
    return total


def sample_prior(spec: PriorSpec, k: int, structure: ModelStructure,
                 rng: np.random.Generator) -> ModelParams:
    if not 1 <= k <= spec.k_max:
        raise ModelError(f"k={k} outside 1..{spec.k_max}")
    init_w = rng.gamma(spec.init_shapes(k))
    trans_w = rng.gamma(spec.trans_shapes(k))
    if structure.variant == "basic":
        shape = (structure.total_levels, k, structure.T) if structure.time_varying \
            else (structure.total_levels, k)
        meas = BasicMeasurement(rng.gamma(spec.delta_emit, size=shape))
    elif structure.variant == "cutpoint":
        meas = CutpointMeasurement(
            rng.normal(0.0, math.sqrt(spec.sigma2_tendency), size=k),
            rng.normal(0.0, math.sqrt(spec.sigma2_cutpoints), size=structure.levels[0] - 1),
        )
    else:
        meas = CovariateMeasurement(
            rng.normal(0.0, math.sqrt(spec.sigma2_support), size=(structure.n_support, k)),
            rng.normal(0.0, math.sqrt(spec.sigma2_slopes), size=structure.n_slopes),
            rng.normal(0.0, math.sqrt(spec.sigma2_log_odds), size=1),
        )
    return ModelParams(init_w, trans_w, meas)


@dataclass
class StateBlock:
    """Every parameter owned by a single state, at dimension k.

    ``row_off`` and ``col`` hold the transition entries to and from the other
    k-1 states in ascending order of their index after the state itself is
    removed. ``meas`` is the state's measurement column.
    """

    init_val: float
    row_off: np.ndarray
    row_diag: float
    col: np.ndarray
    meas: np.ndarray


def draw_state_block(spec: PriorSpec, k: int, structure: ModelStructure,
                     rng: np.random.Generator) -> tuple[StateBlock, float]:
    """Sample a new state's block from the prior at dimension k; returns the
    log proposal density (equal to the prior density of the drawn values)."""
    offdiag = spec.trans_shapes(k)[0, 1] if k > 1 else None
    diag = spec.trans_shapes(k)[0, 0]
    init_val = float(rng.gamma(spec.delta_init))
    row_off = rng.gamma(offdiag, size=k - 1) if k > 1 else np.empty(0)
    row_diag = float(rng.gamma(diag))
    col = rng.gamma(offdiag, size=k - 1) if k > 1 else np.empty(0)
    if structure.variant == "basic":
        shape = (structure.total_levels, structure.T) if structure.time_varying \
            else (structure.total_levels,)
        meas = rng.gamma(spec.delta_emit, size=shape)
    elif structure.variant == "cutpoint":
        meas = rng.normal(0.0, math.sqrt(spec.sigma2_tendency), size=1)
    else:
        meas = rng.normal(0.0, math.sqrt(spec.sigma2_support), size=structure.n_support)
    block = StateBlock(init_val, row_off, row_diag, col, meas)
    return block, state_block_logpdf(block, spec, k, structure)


def state_block_logpdf(block: StateBlock, spec: PriorSpec, k: int,
                       structure: ModelStructure) -> float:
    """Prior log-density of a state block evaluated at dimension k."""
    shapes = spec.trans_shapes(k)
    total = float(gamma_logpdf(block.init_val, spec.delta_init))
    total += float(gamma_logpdf(block.row_diag, shapes[0, 0]))
    if k > 1:
        total += float(gamma_logpdf(block.row_off, shapes[0, 1]).sum())
        total += float(gamma_logpdf(block.col, shapes[0, 1]).sum())
    if structure.variant == "basic":
        total += float(gamma_logpdf(block.meas, spec.delta_emit).sum())
    elif structure.variant == "cutpoint":
        total += float(normal_logpdf(block.meas, spec.sigma2_tendency).sum())
    else:
        total += float(normal_logpdf(block.meas, spec.sigma2_support).sum())
    return total


@dataclass
class MomentReport:
    delta: np.ndarray
    mean_emp: np.ndarray
    mean_true: np.ndarray
    var_emp: np.ndarray
    var_true: np.ndarray
    z_mean: np.ndarray
    z_var: np.ndarray

    @property
    def max_abs_z(self) -> float:
        return float(max(np.abs(self.z_mean).max(), np.abs(self.z_var).max()))


def dirichlet_moment_report(delta, samples: int, rng: np.random.Generator) -> MomentReport:
    """Compare normalized Gamma(delta, 1) draws against analytic Dirichlet moments.

    Analytic moments: mean_u = delta_u / S and var_u = delta_u (S - delta_u) /
    (S^2 (S + 1)) with S the shape total.
    """
    delta = np.asarray(delta, dtype=float)
    if samples < 10_000:
        raise ModelError("moment check needs at least 1e4 samples")
    g = rng.gamma(delta, size=(samples, delta.size))
    pi = g / g.sum(axis=1, keepdims=True)
    S = delta.sum()
    mean_true = delta / S
    var_true = delta * (S - delta) / (S * S * (S + 1.0))
    mean_emp = pi.mean(axis=0)
    centered = pi - mean_emp
    var_emp = (centered ** 2).mean(axis=0)
    se_mean = np.sqrt(var_true / samples)
    m4 = (centered ** 4).mean(axis=0)
    se_var = np.sqrt(np.maximum(m4 - var_emp ** 2, 1e-300) / samples)
    return MomentReport(
        delta=delta,
        mean_emp=mean_emp, mean_true=mean_true,
        var_emp=var_emp, var_true=var_true,
        z_mean=(mean_emp - mean_true) / se_mean,
        z_var=(var_emp - var_true) / se_var,
    )


def dirichlet_equivalence_check(spec: PriorSpec, k: int, samples: int,
                                rng: np.random.Generator) -> dict[str, MomentReport]:
    """Moment reports for the initial-weight vector and a transition row."""
    out = {"init": dirichlet_moment_report(spec.init_shapes(k), samples, rng)}
    if k > 1:
        out["trans_row"] = dirichlet_moment_report(spec.trans_shapes(k)[0], samples, rng)
    return out
