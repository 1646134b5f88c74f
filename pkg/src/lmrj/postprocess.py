"""Posterior summaries: mode selection, label-switching cleanup, HPD
intervals, occupancy diagnostics and the acceptance-rate table.

Relabeling follows the post-hoc recipe: fix the highest-posterior draw at the
modal k as the reference, then give every other draw at that k the state
permutation closest to the reference in Euclidean distance. Distances are
computed over normalized probabilities (initial, transition rows, and
response probabilities for the unnormalized-weight variant) plus the raw
state-indexed measurement parameters; the unnormalized weights themselves are
left out because their common scale is not identified.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, ModelError
from .params import ModelParams, ModelStructure, flat_dim, flat_names, unflatten
from .trace import ChainTrace, MoveCounters, mh_block_names, BLOCK_LABELS

HPD_LEVELS = (0.90, 0.95, 0.99)
ORDERINGS = ("none", "by-last-category", "by-support-point")


def posterior_of_k(trace: ChainTrace, burn_in: int = 0) -> dict[int, float]:
    """Normalized visit frequencies of k after burn-in."""
    ks = trace.k[burn_in:]
    if ks.size == 0:
        raise DataError("no draws left after burn-in")
    values, counts = np.unique(ks, return_counts=True)
    return {int(v): float(c) / ks.size for v, c in zip(values, counts)}


def modal_k(trace: ChainTrace, burn_in: int = 0) -> int:
    """Most visited k; the smaller one wins a tie."""
    mass = posterior_of_k(trace, burn_in)
    best = max(sorted(mass), key=lambda kv: mass[kv])
    return best


def posterior_mode(trace: ChainTrace, k_star: int | None = None,
                   burn_in: int = 0) -> tuple[ModelParams, int]:
    """Highest log-likelihood + log-prior draw at k_star (earliest on ties).

    Returns (parameters, index into the trace).
    """
    if k_star is None:
        k_star = modal_k(trace, burn_in)
    idx = trace.indices_at_k(k_star, burn_in)
    if idx.size == 0:
        raise DataError(f"no draws at k={k_star} after burn-in")
    score = trace.loglik[idx] + trace.logprior[idx]
    best = idx[int(np.argmax(score))]  # argmax returns the first maximizer
    return trace.params_at(int(best)), int(best)


# -- relabeling ----------------------------------------------------------------


def _permutation_index_maps(k: int, structure: ModelStructure) -> tuple[list, np.ndarray]:
    """All k! state permutations with their flat-coordinate gather maps.

    Map rows satisfy theta[perm_map] == flatten(unflatten(theta).permute(perm)).
    """
    d = flat_dim(k, structure)
    probe = unflatten(np.arange(d, dtype=float), k, structure)
    perms = list(itertools.permutations(range(k)))
    maps = np.empty((len(perms), d), dtype=np.intp)
    for i, perm in enumerate(perms):
        maps[i] = probe.permute(perm).flatten().astype(np.intp)
    return perms, maps


def _distance_features(theta: np.ndarray, k: int, structure: ModelStructure) -> np.ndarray:
    """[m, q] feature rows used for relabeling distances."""
    theta = np.atleast_2d(theta)
    m = theta.shape[0]
    init = theta[:, :k]
    pi = init / init.sum(axis=1, keepdims=True)
    W = theta[:, k:k + k * k].reshape(m, k, k)
    P = W / W.sum(axis=2, keepdims=True)
    rest = theta[:, k + k * k:]
    feats = [pi, P.reshape(m, k * k)]
    if structure.variant == "basic":
        per_occ = structure.T if structure.time_varying else 1
        w = rest.reshape(m, structure.total_levels, k, per_occ)
        off = 0
        for l in structure.levels:
            block = w[:, off:off + l]
            feats.append((block / block.sum(axis=1, keepdims=True)).reshape(m, -1))
            off += l
    elif structure.variant == "cutpoint":
        feats.append(rest[:, :k])
    else:
        feats.append(rest[:, :structure.n_support * k])
    return np.concatenate(feats, axis=1)


@dataclass
class RelabeledTrace:
    """Draws at a single k with label switching resolved."""

    k: int
    structure: ModelStructure
    theta: np.ndarray          # [m, d] flat draws, relabeled
    sweeps: np.ndarray         # [m] original sweep indices
    loglik: np.ndarray
    logprior: np.ndarray
    perm_applied: np.ndarray   # [m, k] the permutation each draw received

    def __len__(self) -> int:
        return self.theta.shape[0]

    def params_at(self, i: int) -> ModelParams:
        return unflatten(self.theta[i], self.k, self.structure)


def relabel(trace: ChainTrace, reference: ModelParams, burn_in: int = 0) -> RelabeledTrace:
    """Align every draw at the reference's k to the reference."""
    k = reference.k
    if k > 8:
        raise ModelError(f"exhaustive relabeling over {k}! permutations refused (k > 8)")
    structure = trace.meta.structure
    idx = trace.indices_at_k(k, burn_in)
    if idx.size == 0:
        raise DataError(f"no draws at k={k} after burn-in")
    theta = trace.theta_matrix(idx)
    perms, maps = _permutation_index_maps(k, structure)
    ref_feat = _distance_features(reference.flatten(), k, structure)[0]

    best_d2 = np.full(theta.shape[0], np.inf)
    best_p = np.zeros(theta.shape[0], dtype=np.intp)
    for p, gather in enumerate(maps):
        feat = _distance_features(theta[:, gather], k, structure)
        d2 = ((feat - ref_feat) ** 2).sum(axis=1)
        better = d2 < best_d2
        best_d2[better] = d2[better]
        best_p[better] = p

    out = np.empty_like(theta)
    applied = np.empty((theta.shape[0], k), dtype=np.intp)
    for p in np.unique(best_p):
        rows = best_p == p
        out[rows] = theta[np.ix_(rows, maps[p])]
        applied[rows] = perms[p]
    return RelabeledTrace(k, structure, out, trace.sweep[idx],
                          trace.loglik[idx], trace.logprior[idx], applied)


def ordering_permutation(params: ModelParams, structure: ModelStructure,
                         ordering: str) -> tuple[int, ...]:
    """State order that makes the chosen summary key increasing."""
    if ordering not in ORDERINGS:
        raise ModelError(f"unknown ordering {ordering!r}; pick one of {ORDERINGS}")
    if ordering == "none":
        return tuple(range(params.k))
    m = params.measurement
    if ordering == "by-last-category":
        if structure.variant == "basic":
            w = m.emit_w[..., -1] if structure.time_varying else m.emit_w
            l_last = structure.levels[-1]
            block = w[-l_last:]
            key = block[-1] / block.sum(axis=0)
        elif structure.variant == "cutpoint":
            key = m.tendency
        else:
            raise ModelError("by-last-category ordering needs a categorical response")
    else:
        if structure.variant == "covariate":
            key = m.support.mean(axis=0)
        elif structure.variant == "cutpoint":
            key = m.tendency
        else:
            raise ModelError("by-support-point ordering needs support points")
    return tuple(int(i) for i in np.argsort(key, kind="stable"))


def apply_ordering(rel: RelabeledTrace, reference: ModelParams,
                   ordering: str) -> tuple[RelabeledTrace, ModelParams]:
    """Reorder the reference and every relabeled draw by the same permutation."""
    perm = ordering_permutation(reference, rel.structure, ordering)
    if perm == tuple(range(rel.k)):
        return rel, reference
    probe = unflatten(np.arange(rel.theta.shape[1], dtype=float), rel.k, rel.structure)
    gather = probe.permute(perm).flatten().astype(np.intp)
    theta = rel.theta[:, gather]
    applied = rel.perm_applied[:, list(perm)]
    return (RelabeledTrace(rel.k, rel.structure, theta, rel.sweeps, rel.loglik,
                           rel.logprior, applied),
            reference.permute(perm))


# -- interval summaries ----------------------------------------------------------


def hpd_interval(draws: np.ndarray, level: float) -> tuple[float, float]:
    """Shortest contiguous window of the sorted sample holding the level mass."""
    x = np.sort(np.asarray(draws, dtype=float))
    n = x.size
    if n == 0:
        raise DataError("empty sample")
    m = min(n, max(1, math.ceil(level * n)))
    widths = x[m - 1:] - x[:n - m + 1]
    i = int(np.argmin(widths))  # leftmost on ties
    return float(x[i]), float(x[i + m - 1])


def nested_hpd(draws: np.ndarray, levels=HPD_LEVELS) -> dict[float, tuple[float, float]]:
    """HPD intervals at increasing levels, each containing the previous one.

    The first level uses the plain shortest window; every later one takes the
    shortest window that covers the interval found at the level below, which
    keeps the family nested even when the sample is multimodal.
    """
    x = np.sort(np.asarray(draws, dtype=float))
    n = x.size
    if n == 0:
        raise DataError("empty sample")
    out: dict[float, tuple[float, float]] = {}
    lo_i = hi_i = None
    for level in sorted(levels):
        m = min(n, max(1, math.ceil(level * n)))
        if lo_i is None:
            widths = x[m - 1:] - x[:n - m + 1]
            i = int(np.argmin(widths))
            lo_i, hi_i = i, i + m - 1
        else:
            starts = np.arange(0, lo_i + 1)
            ends = np.maximum(hi_i, starts + m - 1)
            ok = ends <= n - 1
            starts, ends = starts[ok], ends[ok]
            if starts.size == 0:
                starts, ends = np.array([0]), np.array([n - 1])
            widths = x[ends] - x[starts]
            j = int(np.argmin(widths))
            lo_i, hi_i = int(starts[j]), int(ends[j])
        out[level] = (float(x[lo_i]), float(x[hi_i]))
    return out


def zero_exclusion_stars(hpds: dict[float, tuple[float, float]]) -> int:
    """How many of the nested levels keep zero outside the interval."""
    return sum(1 for lo, hi in hpds.values() if lo > 0.0 or hi < 0.0)


@dataclass
class ParamSummary:
    name: str
    mean: float
    sd: float
    hpd: dict[float, tuple[float, float]]
    stars: int

    @classmethod
    def from_draws(cls, name: str, draws: np.ndarray) -> "ParamSummary":
        hpds = nested_hpd(draws)
        return cls(name, float(np.mean(draws)), float(np.std(draws, ddof=0)),
                   hpds, zero_exclusion_stars(hpds))


# -- report-scale transforms ------------------------------------------------------


def report_features(theta: np.ndarray, k: int,
                    structure: ModelStructure) -> tuple[list[str], np.ndarray]:
    """Interpretable per-draw columns: probabilities for the weight blocks,
    raw values for measurement parameters."""
    theta = np.atleast_2d(theta)
    m = theta.shape[0]
    init = theta[:, :k]
    pi = init / init.sum(axis=1, keepdims=True)
    W = theta[:, k:k + k * k].reshape(m, k, k)
    P = W / W.sum(axis=2, keepdims=True)
    rest = theta[:, k + k * k:]
    names = [f"pi[{u}]" for u in range(1, k + 1)]
    names += [f"P[{u},{v}]" for u in range(1, k + 1) for v in range(1, k + 1)]
    cols = [pi, P.reshape(m, k * k)]
    if structure.variant == "basic":
        per_occ = structure.T if structure.time_varying else 1
        w = rest.reshape(m, structure.total_levels, k, per_occ)
        off = 0
        for j, l in enumerate(structure.levels):
            block = w[:, off:off + l]
            phi = block / block.sum(axis=1, keepdims=True)
            if structure.time_varying:
                names += [f"phi[v{j + 1}:y={y}|u={u},t={t}]"
                          for y in range(l) for u in range(1, k + 1)
                          for t in range(1, structure.T + 1)]
            else:
                names += [f"phi[v{j + 1}:y={y}|u={u}]"
                          for y in range(l) for u in range(1, k + 1)]
            cols.append(phi.reshape(m, -1))
            off += l
    elif structure.variant == "cutpoint":
        names += [f"tendency[{u}]" for u in range(1, k + 1)]
        names += [f"cutpoint[{y}]" for y in range(1, structure.levels[0])]
        cols.append(rest)
    else:
        ns = structure.n_support
        names += [f"support[{h},{u}]" for h in range(1, ns + 1) for u in range(1, k + 1)]
        names += [f"slope[{j}]" for j in range(1, structure.n_slopes + 1)]
        names += ["log_odds"]
        cols.append(rest)
    return names, np.concatenate(cols, axis=1)


def invariant_names(structure: ModelStructure) -> list[str]:
    """Parameters whose meaning does not depend on k (shared across states)."""
    if structure.variant == "cutpoint":
        return [f"cutpoint[{y}]" for y in range(1, structure.levels[0])]
    if structure.variant == "covariate":
        return [f"slope[{j}]" for j in range(1, structure.n_slopes + 1)] + ["log_odds"]
    return []


def _invariant_matrix(trace: ChainTrace, burn_in: int) -> np.ndarray:
    st = trace.meta.structure
    if st.variant == "cutpoint":
        width = st.levels[0] - 1
    elif st.variant == "covariate":
        width = st.n_slopes + 1
    else:
        return np.empty((0, 0))
    rows = [trace.thetas[i][-width:] for i in range(burn_in, len(trace))]
    return np.stack(rows) if rows else np.empty((0, width))


# -- top-level summary -------------------------------------------------------------


@dataclass
class PosteriorSummary:
    k_mass: dict[int, float]
    k_star: int
    mode_index: int
    mode_params: ModelParams
    burn_in: int
    n_draws: int
    ordering: str
    per_state: list[ParamSummary] = field(default_factory=list)
    invariant: list[ParamSummary] = field(default_factory=list)

    def row(self, name: str) -> ParamSummary:
        for s in self.per_state + self.invariant:
            if s.name == name:
                return s
        raise KeyError(name)


def summarize(trace: ChainTrace, burn_in: int | None = None,
              ordering: str = "none", k_star: int | None = None) -> PosteriorSummary:
    """Full posterior summary of one run."""
    if burn_in is None:
        burn_in = trace.meta.sampler.get("burn_in", 0) if trace.meta else 0
    mass = posterior_of_k(trace, burn_in)
    if k_star is None:
        k_star = modal_k(trace, burn_in)
    reference, mode_idx = posterior_mode(trace, k_star, burn_in)
    rel = relabel(trace, reference, burn_in)
    rel, reference = apply_ordering(rel, reference, ordering)

    names, values = report_features(rel.theta, k_star, rel.structure)
    per_state = [ParamSummary.from_draws(nm, values[:, j]) for j, nm in enumerate(names)]

    inv_names = invariant_names(rel.structure)
    inv = []
    if inv_names:
        allmat = _invariant_matrix(trace, burn_in)
        inv = [ParamSummary.from_draws(nm, allmat[:, j]) for j, nm in enumerate(inv_names)]

    return PosteriorSummary(k_mass=mass, k_star=k_star, mode_index=mode_idx,
                            mode_params=reference, burn_in=burn_in,
                            n_draws=len(rel), ordering=ordering,
                            per_state=per_state, invariant=inv)


# -- diagnostics -------------------------------------------------------------------


@dataclass
class OccupancyCurves:
    sweeps: np.ndarray     # [s]
    ks: list[int]
    fractions: np.ndarray  # [s, len(ks)] cumulative visit fractions

    def tidy(self):
        """Rows (sweep, k, fraction) in long format."""
        for i, s in enumerate(self.sweeps):
            for j, kv in enumerate(self.ks):
                yield int(s), int(kv), float(self.fractions[i, j])


def occupancy_fractions(trace: ChainTrace, thin: int = 1) -> OccupancyCurves:
    """Cumulative fraction of sweeps spent at each k, over the whole run."""
    ks_seen = sorted(int(v) for v in np.unique(trace.k))
    if not ks_seen:
        raise DataError("empty trace")
    denom = np.arange(1, len(trace) + 1, dtype=float)
    fractions = np.stack([np.cumsum(trace.k == kv) / denom for kv in ks_seen], axis=1)
    keep = np.arange(0, len(trace), thin)
    return OccupancyCurves(trace.sweep[keep], ks_seen, fractions[keep])


def acceptance_table(counters: MoveCounters, sweeps: int,
                     structure: ModelStructure) -> list[tuple]:
    """Rows (label, performed, accepted, pct); None marks a blank cell.

    Layout: one header row for the fixed-k MH move with the sweep total, an
    indented row per parameter block, then one row per trans-dimensional move.
    """
    rows: list[tuple] = [("MH with fixed k", sweeps, None, None)]
    for name in mh_block_names(structure):
        performed, accepted = counters.data[name]
        pct = 100.0 * accepted / performed if performed else 0.0
        rows.append(("  " + BLOCK_LABELS[name], None, accepted, pct))
    for name in ("birth", "death", "split", "combine"):
        performed, accepted = counters.data.get(name, (0, 0))
        pct = 100.0 * accepted / performed if performed else 0.0
        rows.append((name.capitalize(), performed, accepted, pct))
    return rows


def format_acceptance_table(rows: list[tuple]) -> str:
    header = ("", "Performed", "Accepted", "% Accepted")
    body = [header]
    for label, performed, accepted, pct in rows:
        body.append((label,
                     f"{performed:,}" if performed is not None else "",
                     f"{accepted:,}" if accepted is not None else "",
                     f"{pct:.2f}" if pct is not None else ""))
    widths = [max(len(r[c]) for r in body) for c in range(4)]
    lines = []
    for r in body:
        lines.append(r[0].ljust(widths[0]) + "  " +
                     "  ".join(r[c].rjust(widths[c]) for c in range(1, 4)))
    return "\n".join(line.rstrip() for line in lines)
