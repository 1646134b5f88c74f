"""Independent verification oracles.

Everything here recomputes quantities from first principles so the fast
implementations can be cross-checked: the likelihood by summing over every
latent path, the split Jacobians by finite differences of the actual split
map, and the trans-dimensional machinery by running the sampler against a
constant likelihood, where the invariant distribution is the prior itself.

The only code deliberately shared with the main path is the split map: the
numeric Jacobian differentiates the map as implemented, which is exactly what
the analytic determinant claims to describe. Emission probabilities, the
bivariate inversion and the path sum are all reimplemented here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ModelError
from .params import (
    BasicMeasurement,
    CovariateMeasurement,
    CutpointMeasurement,
    ModelParams,
    ModelStructure,
)
from .priors import PriorSpec, sample_prior
from .sampler import SamplerConfig, SplitAux, apply_split, run_chain, split_log_jacobian

TOLERANCES = {
    "loglik": 1e-10,     # brute-force vs forward recursion, absolute on log f
    "jacobian": 1e-4,    # relative error on |J|
    "roundtrip": 1e-12,  # split/combine and birth/death reconstruction
    "z": 3.0,            # Monte Carlo z-scores against exact prior targets
}


@dataclass
class OracleReport:
    case: str
    main_value: float
    oracle_value: float
    tol: float
    z: float | None = None

    @property
    def abs_err(self) -> float:
        return abs(self.main_value - self.oracle_value)

    @property
    def rel_err(self) -> float:
        scale = max(abs(self.main_value), abs(self.oracle_value), 1e-300)
        return self.abs_err / scale

    @property
    def passed(self) -> bool:
        if self.z is not None:
            return abs(self.z) <= self.tol
        return self.abs_err <= self.tol

    def describe(self) -> str:
        flag = "ok" if self.passed else "FAIL"
        if self.z is not None:
            return (f"[{flag}] {self.case}: {self.main_value:.6g} vs "
                    f"{self.oracle_value:.6g} (z = {self.z:.2f}, tol {self.tol:g})")
        return (f"[{flag}] {self.case}: {self.main_value:.10g} vs "
                f"{self.oracle_value:.10g} (|err| = {self.abs_err:.3g}, tol {self.tol:g})")


# -- brute-force likelihood ----------------------------------------------------


def _emission_logprob_table(params: ModelParams, data, structure: ModelStructure) -> np.ndarray:
    """[n, T, k] log P(y_it | state), written without touching the fast path."""
    n, T, _ = data.responses.shape
    k = params.k
    out = np.zeros((n, T, k))
    m = params.measurement
    if isinstance(m, BasicMeasurement):
        offsets = np.concatenate(([0], np.cumsum(structure.levels)))
        for i in range(n):
            for t in range(T):
                for u in range(k):
                    logp = 0.0
                    for j, l in enumerate(structure.levels):
                        if m.time_varying:
                            col = m.emit_w[offsets[j]:offsets[j] + l, u, t]
                        else:
                            col = m.emit_w[offsets[j]:offsets[j] + l, u]
                        y = data.responses[i, t, j]
                        logp += math.log(col[y]) - math.log(col.sum())
                    out[i, t, u] = logp
    elif isinstance(m, CutpointMeasurement):
        l = structure.levels[0]
        for u in range(k):
            logits = [0.0]
            acc = 0.0
            for y in range(1, l):
                acc += m.tendency[u] + m.cutpoints[y - 1]
                logits.append(acc)
            top = max(logits)
            weights = [math.exp(g - top) for g in logits]
            total = sum(weights)
            logp = [math.log(w) - math.log(total) for w in weights]
            for i in range(n):
                for t in range(T):
                    out[i, t, u] = logp[data.responses[i, t, 0]]
    else:
        T_panel = data.responses.shape[1]
        p = m.slopes.shape[0] // 2
        b1 = m.slopes[:p]
        b2 = m.slopes[p:]
        gamma = float(m.log_odds[0])
        named = data.covariates.shape[2] if data.covariates is not None else 0
        for i in range(n):
            for t in range(T):
                row = []
                for c in range(named):
                    row.append(float(data.covariates[i, t, c]))
                for s in range(1, T_panel):
                    row.append(1.0 if t == s else 0.0)
                row = row[:p]
                for u in range(k):
                    e1 = m.support[0, u] + sum(bi * xi for bi, xi in zip(b1, row))
                    e2 = m.support[1, u] + sum(bi * xi for bi, xi in zip(b2, row))
                    p1 = 1.0 / (1.0 + math.exp(-e1))
                    p2 = 1.0 / (1.0 + math.exp(-e2))
                    p11 = _bisect_joint(p1, p2, gamma)
                    cells = [1.0 - p1 - p2 + p11, p2 - p11, p1 - p11, p11]
                    y1, y2 = data.responses[i, t, 0], data.responses[i, t, 1]
                    prob = cells[2 * y1 + y2]
                    out[i, t, u] = math.log(prob) if prob > 0 else -math.inf
    return out


def _bisect_joint(p1: float, p2: float, gamma: float) -> float:
    """Success-success cell probability by bisection on the odds-ratio identity."""
    lo = max(0.0, p1 + p2 - 1.0)
    hi = min(p1, p2)
    psi = math.exp(gamma)

    def f(q):
        return q * (1.0 - p1 - p2 + q) - psi * (p1 - q) * (p2 - q)

    a, b = lo, hi
    for _ in range(200):
        mid = 0.5 * (a + b)
        if f(mid) <= 0.0:
            a = mid
        else:
            b = mid
    return 0.5 * (a + b)


def brute_force_loglik(params: ModelParams, data, structure: ModelStructure | None = None) -> float:
    """Total log-likelihood by explicit enumeration of every latent path."""
    if structure is None:
        from .likelihood import infer_structure
        structure = infer_structure(params, data)
    k = params.k
    n, T, _ = data.responses.shape
    if k ** T > 1_000_000:
        raise ModelError(f"path enumeration refused: k^T = {k}^{T} exceeds 1e6")

    loge = _emission_logprob_table(params, data, structure)
    pi = params.init_probs()
    P = params.trans_probs()
    with np.errstate(divide="ignore"):
        logpi = np.log(pi)
        logP = np.log(P)

    grids = np.meshgrid(*([np.arange(k)] * T), indexing="ij")
    paths = np.stack([g.ravel() for g in grids], axis=1)  # [k^T, T]
    path_logp = logpi[paths[:, 0]]
    for t in range(1, T):
        path_logp = path_logp + logP[paths[:, t - 1], paths[:, t]]

    total = 0.0
    for i in range(n):
        terms = path_logp.copy()
        for t in range(T):
            terms += loge[i, t, paths[:, t]]
        top = terms.max()
        if not np.isfinite(top):
            return -math.inf
        total += top + math.log(np.exp(terms - top).sum())
    return float(total)


def loglik_report(params: ModelParams, data, structure: ModelStructure | None = None,
                  case: str = "loglik") -> OracleReport:
    from .likelihood import forward_loglik
    main = forward_loglik(params, data)
    oracle = brute_force_loglik(params, data, structure)
    return OracleReport(case, main, oracle, TOLERANCES["loglik"])


# -- numeric Jacobian of the split map -----------------------------------------


@dataclass
class NumericJacobian:
    matrix: np.ndarray
    sign: float
    log_abs_det: float
    cond: float

    @property
    def ill_conditioned(self) -> bool:
        return not np.isfinite(self.cond) or self.cond > 1e10


def numeric_jacobian(fn, x0: np.ndarray, h: float = 1e-6) -> NumericJacobian:
    """Central differences with one Richardson extrapolation step."""
    x0 = np.asarray(x0, dtype=float)

    def estimate(step):
        cols = []
        for j in range(x0.size):
            xp = x0.copy()
            xm = x0.copy()
            xp[j] += step
            xm[j] -= step
            cols.append((fn(xp) - fn(xm)) / (2.0 * step))
        return np.stack(cols, axis=1)

    J = (4.0 * estimate(h / 2.0) - estimate(h)) / 3.0
    sign, logdet = np.linalg.slogdet(J)
    return NumericJacobian(J, float(sign), float(logdet), float(np.linalg.cond(J)))


def _split_coordinates(params: ModelParams, u0: int, aux: SplitAux,
                       structure: ModelStructure):
    """Mixed log/linear coordinate chart for the split map restricted to the
    coordinates the split actually touches.

    Positive quantities enter and leave in logs, real-valued ones linearly;
    the determinant in natural coordinates is then
    log|J| = log|J_log| + sum(log positive outputs) - sum(log positive inputs).
    """
    k = params.k
    others = np.array([i for i in range(k) if i != u0], dtype=int)
    m = params.measurement
    variant = structure.variant

    def pack():
        pos = [math.log(params.init_w[u0])]
        pos += list(np.log(params.trans_w[others, u0]))
        pos += list(np.log(params.trans_w[u0, others]))
        pos.append(math.log(params.trans_w[u0, u0]))
        lin = []
        if variant == "basic":
            pos += list(np.log(m.emit_w[:, u0].ravel()))
        elif variant == "cutpoint":
            lin.append(m.tendency[u0])
        else:
            lin += list(m.support[:, u0])
        pos.append(math.log(aux.rho))
        pos += list(np.log(aux.rho_col))
        pos += list(np.log(aux.theta_row))
        pos.append(math.log(aux.rho_diag))
        pos += [math.log(aux.theta_diag[0]), math.log(aux.theta_diag[1])]
        if variant == "basic":
            pos += list(np.log(np.asarray(aux.meas).ravel()))
        else:
            lin += list(np.asarray(aux.meas).ravel())
        return np.array(pos + lin), len(pos)

    x0, n_pos_in = pack()
    meas_shape = m.emit_w[:, u0].shape if variant == "basic" else None

    def fn(x):
        i = 0

        def take(cnt):
            nonlocal i
            out = x[i:i + cnt]
            i += cnt
            return out

        lam0 = math.exp(take(1)[0])
        col0 = np.exp(take(k - 1))
        row0 = np.exp(take(k - 1))
        d0 = math.exp(take(1)[0])
        base = params.copy()
        base.init_w[u0] = lam0
        base.trans_w[others, u0] = col0
        base.trans_w[u0, others] = row0
        base.trans_w[u0, u0] = d0
        if variant == "basic":
            flat = np.exp(take(int(np.prod(meas_shape))))
            base.measurement.emit_w[:, u0] = flat.reshape(meas_shape)
        rho = math.exp(take(1)[0])
        rho_col = np.exp(take(k - 1))
        theta_row = np.exp(take(k - 1))
        rho_diag = math.exp(take(1)[0])
        td = np.exp(take(2))
        if variant == "basic":
            meas_aux = np.exp(take(int(np.prod(meas_shape)))).reshape(meas_shape)
        elif variant == "cutpoint":
            base.measurement.tendency[u0] = take(1)[0]
            meas_aux = take(1)
        else:
            base.measurement.support[:, u0] = take(structure.n_support)
            meas_aux = take(structure.n_support)
        a = SplitAux(rho=rho, rho_col=rho_col, rho_diag=rho_diag,
                     theta_row=theta_row, theta_diag=(td[0], td[1]), meas=meas_aux)
        child = apply_split(base, u0, a, k)  # second child appended last
        pos = [math.log(child.init_w[u0]), math.log(child.init_w[k])]
        pos += list(np.log(child.trans_w[others, u0]))
        pos += list(np.log(child.trans_w[others, k]))
        pos += list(np.log(child.trans_w[u0, others]))
        pos += list(np.log(child.trans_w[k, others]))
        pos += [math.log(child.trans_w[u0, u0]), math.log(child.trans_w[u0, k]),
                math.log(child.trans_w[k, u0]), math.log(child.trans_w[k, k])]
        lin = []
        cm = child.measurement
        if variant == "basic":
            pos += list(np.log(cm.emit_w[:, u0].ravel()))
            pos += list(np.log(cm.emit_w[:, k].ravel()))
        elif variant == "cutpoint":
            lin += [cm.tendency[u0], cm.tendency[k]]
        else:
            lin += list(cm.support[:, u0]) + list(cm.support[:, k])
        return np.array(pos + lin), len(pos)

    def fn_vec(x):
        return fn(x)[0]

    _, n_pos_out = fn(x0)
    return fn_vec, x0, n_pos_in, n_pos_out


def numeric_split_log_jacobian(params: ModelParams, u0: int, aux: SplitAux,
                               structure: ModelStructure, h: float = 1e-6):
    """(log|J| estimate, NumericJacobian) for the split at (params, u0, aux)."""
    fn, x0, n_pos_in, n_pos_out = _split_coordinates(params, u0, aux, structure)
    est = numeric_jacobian(fn, x0, h)
    y0 = fn(x0)
    log_det = est.log_abs_det + float(y0[:n_pos_out].sum()) - float(x0[:n_pos_in].sum())
    return log_det, est


def split_jacobian_report(params: ModelParams, u0: int, aux: SplitAux,
                          structure: ModelStructure, case: str = "split |J|",
                          h: float = 1e-6) -> OracleReport:
    numeric, _ = numeric_split_log_jacobian(params, u0, aux, structure, h)
    analytic = split_log_jacobian(params, u0, aux)
    # absolute error between log-determinants is the relative error between
    # the determinants themselves, to first order
    return OracleReport(case, analytic, numeric, TOLERANCES["jacobian"])


# -- sampling the prior through the full kernel --------------------------------


class PriorCheckAccumulator:
    """Trace sink that keeps only what the prior check needs."""

    def __init__(self, k_target: int):
        self.k_target = k_target
        self.ks: list[int] = []
        self.hits: list[tuple[int, np.ndarray]] = []
        self.counters = None
        self.meta = None

    def start(self, meta):
        self.meta = meta

    def record(self, sweep, k, loglik, logprior, move, accepted, mh_bits, theta):
        self.ks.append(k)
        if k == self.k_target:
            self.hits.append((sweep, theta[:k].copy()))

    def finish(self, counters):
        self.counters = counters

    def result(self):
        return self


@dataclass
class PriorCheckReport:
    sweeps: int
    burn_in: int
    k_max: int
    k_freq: dict
    reports: list = field(default_factory=list)
    counters: object = None

    @property
    def max_abs_z(self) -> float:
        zs = [abs(r.z) for r in self.reports if r.z is not None]
        return max(zs) if zs else 0.0

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.reports)

    def describe(self) -> str:
        lines = [f"prior check: {self.sweeps} sweeps, burn-in {self.burn_in}, "
                 f"k_max {self.k_max}"]
        lines += ["  " + r.describe() for r in self.reports]
        return "\n".join(lines)


def _batch_se(values: np.ndarray, n_batches: int) -> float:
    """Standard error of the mean from contiguous batch means."""
    n = values.size
    n_batches = max(2, min(n_batches, n))
    width = n // n_batches
    trimmed = values[:width * n_batches].reshape(n_batches, width)
    means = trimmed.mean(axis=1)
    return float(means.std(ddof=1) / math.sqrt(n_batches))


def _conditional_batch_z(sweeps: np.ndarray, values: np.ndarray, target: float,
                         lo: int, hi: int, n_batches: int) -> tuple[float, float]:
    """(estimate, z) for the mean of values recorded at irregular sweeps."""
    width = max(1, (hi - lo) // n_batches)
    bins = (sweeps - lo) // width
    means = []
    for b in np.unique(bins):
        means.append(values[bins == b].mean())
    means = np.asarray(means)
    est = float(values.mean())
    se = float(means.std(ddof=1) / math.sqrt(means.size))
    z = (est - target) / se if se > 0 else math.inf if est != target else 0.0
    return est, z


def prior_chain_check(prior: PriorSpec, cfg: SamplerConfig,
                      structure: ModelStructure | None = None,
                      k_target: int | None = None,
                      n_batches: int = 200) -> PriorCheckReport:
    """Run the full RJ kernel against a constant likelihood and compare the
    visited distribution with the exact prior: k-marginal uniform, raw initial
    weights Gamma, normalized initial probabilities Dirichlet."""
    if structure is None:
        structure = ModelStructure("basic", T=2, levels=(2,))
    if k_target is None:
        k_target = min(2, prior.k_max)
    rng = np.random.default_rng(cfg.seed + 1)
    init = sample_prior(prior, 1, structure, rng)
    sink = PriorCheckAccumulator(k_target)
    run_chain(None, prior, cfg, init, structure=structure, sink=sink)

    ks = np.asarray(sink.ks[cfg.burn_in:])
    n_kept = ks.size
    report = PriorCheckReport(cfg.sweeps, cfg.burn_in, prior.k_max,
                              k_freq={}, counters=sink.counters)
    z_tol = TOLERANCES["z"]
    for kv in range(1, prior.k_max + 1):
        ind = (ks == kv).astype(float)
        freq = float(ind.mean())
        report.k_freq[kv] = freq
        se = _batch_se(ind, n_batches)
        target = 1.0 / prior.k_max
        z = (freq - target) / se if se > 0 else (0.0 if freq == target else math.inf)
        report.reports.append(OracleReport(f"P(k={kv})", freq, target, z_tol, z=z))

    hits = [(s, th) for s, th in sink.hits if s >= cfg.burn_in]
    if hits and k_target >= 1:
        sweeps_at = np.array([s for s, _ in hits])
        lam = np.stack([th for _, th in hits])  # [m, k_target]
        pi = lam / lam.sum(axis=1, keepdims=True)
        delta = prior.init_shapes(k_target)
        S = float(delta.sum())
        lo, hi = cfg.burn_in, cfg.sweeps
        for u in (0, k_target - 1):
            d = float(delta[u])
            est, z = _conditional_batch_z(sweeps_at, lam[:, u], d, lo, hi, n_batches)
            report.reports.append(OracleReport(
                f"E[lambda_{u + 1}] | k={k_target}", est, d, z_tol, z=z))
            est, z = _conditional_batch_z(sweeps_at, (lam[:, u] - d) ** 2, d,
                                          lo, hi, n_batches)
            report.reports.append(OracleReport(
                f"Var[lambda_{u + 1}] | k={k_target}", est, d, z_tol, z=z))
            mu = d / S
            var = d * (S - d) / (S * S * (S + 1.0))
            est, z = _conditional_batch_z(sweeps_at, pi[:, u], mu, lo, hi, n_batches)
            report.reports.append(OracleReport(
                f"E[pi_{u + 1}] | k={k_target}", est, mu, z_tol, z=z))
            est, z = _conditional_batch_z(sweeps_at, (pi[:, u] - mu) ** 2, var,
                                          lo, hi, n_batches)
            report.reports.append(OracleReport(
                f"Var[pi_{u + 1}] | k={k_target}", est, var, z_tol, z=z))
    return report
