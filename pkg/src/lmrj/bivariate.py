"""Bivariate binary tables from marginal logits and a log-odds ratio.

Given success margins p1, p2 and cross-product ratio psi = exp(gamma), the
joint cell p11 solves

    (psi - 1) p11^2 - [1 + (psi - 1)(p1 + p2)] p11 + psi p1 p2 = 0

on the feasible interval [max(0, p1 + p2 - 1), min(p1, p2)]. Writing
S = 1 + (psi - 1)(p1 + p2) and D = S^2 - 4 psi (psi - 1) p1 p2, the feasible
root admits two algebraically equal forms; each is evaluated where it is
cancellation-free:

    p11 = 2 psi p1 p2 / (S + sqrt(D))        for S >= 0
    p11 = (sqrt(D) - S) / (2 (1 - psi))      for S < 0   (only occurs if psi < 1)

At gamma = 0 the quadratic degenerates and p11 = p1 p2 exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ModelError

# below this cross-ratio distance from independence the closed form is
# bypassed (scalar path: bisection; array path: exact product limit)
INDEP_EPS = 1e-8


@dataclass(frozen=True)
class JointCellTable:
    """2x2 joint distribution of two binary responses. Cell p_ab = P(Y1=a, Y2=b)."""

    p00: float
    p01: float
    p10: float
    p11: float

    def as_array(self) -> np.ndarray:
        # lexicographic (y1, y2) order: 00, 01, 10, 11
        return np.array([self.p00, self.p01, self.p10, self.p11])

    def marginals(self) -> tuple[float, float]:
        return self.p11 + self.p10, self.p11 + self.p01

    def log_odds_ratio(self) -> float:
        return math.log(self.p11) + math.log(self.p00) - math.log(self.p10) - math.log(self.p01)

    def validate(self, tol: float = 1e-10) -> None:
        cells = self.as_array()
        if np.any(cells <= 0) or np.any(cells >= 1):
            raise ModelError(f"joint cells outside (0,1): {cells}")
        if abs(cells.sum() - 1.0) > tol:
            raise ModelError("joint cells do not sum to 1")


def _p11_root(p1: float, p2: float, psi: float) -> float:
    S = 1.0 + (psi - 1.0) * (p1 + p2)
    D = S * S - 4.0 * psi * (psi - 1.0) * p1 * p2
    D = max(D, 0.0)  # guards float dust; analytically D >= 0 on the feasible set
    if S >= 0.0:
        return 2.0 * psi * p1 * p2 / (S + math.sqrt(D))
    return (math.sqrt(D) - S) / (2.0 * (1.0 - psi))


def _p11_bisect(p1: float, p2: float, gamma: float) -> float:
    lo = max(0.0, p1 + p2 - 1.0)
    hi = min(p1, p2)
    # log cross ratio is increasing in p11 on the open feasible interval
    def g(p11: float) -> float:
        return (math.log(p11) + math.log(1.0 - p1 - p2 + p11)
                - math.log(p1 - p11) - math.log(p2 - p11) - gamma)
    a, b = lo + 1e-15, hi - 1e-15
    if a >= b:
        return 0.5 * (lo + hi)
    for _ in range(200):
        mid = 0.5 * (a + b)
        if g(mid) < 0.0:
            a = mid
        else:
            b = mid
    return 0.5 * (a + b)


def invert_bivariate_margins(logit1: float, logit2: float, log_odds_ratio: float) -> JointCellTable:
    """Unique 2x2 table with the given marginal logits and log-odds ratio."""
    for v in (logit1, logit2, log_odds_ratio):
        if not math.isfinite(v):
            raise ModelError("marginal logits and log-odds ratio must be finite")
    p1 = _expit(logit1)
    p2 = _expit(logit2)
    if abs(math.expm1(log_odds_ratio)) < INDEP_EPS:
        # near-degenerate quadratic; bisection on the feasible interval
        p11 = p1 * p2 if log_odds_ratio == 0.0 else _p11_bisect(p1, p2, log_odds_ratio)
    else:
        p11 = _p11_root(p1, p2, math.exp(log_odds_ratio))
    table = JointCellTable(
        p00=1.0 - p1 - p2 + p11,
        p01=p2 - p11,
        p10=p1 - p11,
        p11=p11,
    )
    table.validate(tol=1e-9)
    return table


def _expit(x: float) -> float:
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


def joint_cells(p1: np.ndarray, p2: np.ndarray, gamma: float) -> np.ndarray:
    """Vectorized cell table, stacked on a trailing axis in 00,01,10,11 order.

    Accepts broadcastable probability arrays. Used on the likelihood hot path,
    so no per-element validation; margins are assumed inside (0, 1).
    """
    p1 = np.asarray(p1, dtype=float)
    p2 = np.asarray(p2, dtype=float)
    if abs(math.expm1(gamma)) < INDEP_EPS:
        p11 = p1 * p2
    else:
        psi = math.exp(gamma)
        S = 1.0 + (psi - 1.0) * (p1 + p2)
        D = np.maximum(S * S - 4.0 * psi * (psi - 1.0) * p1 * p2, 0.0)
        sqD = np.sqrt(D)
        pos = 2.0 * psi * p1 * p2 / np.maximum(S + sqD, 1e-300)
        if psi < 1.0:
            neg = (sqD - S) / (2.0 * (1.0 - psi))
            p11 = np.where(S >= 0.0, pos, neg)
        else:
            p11 = pos
    cells = np.stack([
        1.0 - p1 - p2 + p11,
        p2 - p11,
        p1 - p11,
        p11,
    ], axis=-1)
    return np.clip(cells, 0.0, 1.0)
