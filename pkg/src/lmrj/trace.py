"""Chain trace containers and streaming sinks.

A sink receives one record per sweep and may store it (``TraceCollector``),
write it out (the file sink in ``io``), or fold it into running statistics
(the accumulator used by the prior-recovery oracle). The record carries the
flattened parameter vector; its layout per k is

    init weights (k), transition weights (k*k, row-major), measurement block
    (emission weights in C order | tendency then cutpoints | support points
    in C order, slopes, log-odds ratio)

which matches ``ModelParams.flatten`` / ``params.unflatten``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import TraceError
from .params import ModelParams, ModelStructure, unflatten

MOVE_NONE, MOVE_SPLIT, MOVE_COMBINE, MOVE_BIRTH, MOVE_DEATH = range(5)
MOVE_NAMES = ("none", "split", "combine", "birth", "death")
TRANS_MOVES = ("split", "combine", "birth", "death")

BLOCK_LABELS = {
    "init": "Initial probabilities",
    "trans": "Transition probabilities",
    "emit": "Conditional probabilities",
    "tendency": "Tendency",
    "cutpoints": "Cutpoints",
    "support": "Support points",
    "coef": "Regression coefficients",
}


def mh_block_names(structure: ModelStructure) -> tuple[str, ...]:
    if structure.variant == "basic":
        return ("init", "trans", "emit")
    if structure.variant == "cutpoint":
        return ("init", "trans", "tendency", "cutpoints")
    return ("init", "trans", "support", "coef")


class MoveCounters:
    """Performed/accepted tallies per MH block and per trans-dimensional move."""

    def __init__(self, names):
        self.data: dict[str, list[int]] = {n: [0, 0] for n in names}

    def bump(self, name: str, accepted: bool) -> None:
        cell = self.data[name]
        cell[0] += 1
        cell[1] += int(accepted)

    def performed(self, name: str) -> int:
        return self.data[name][0]

    def accepted(self, name: str) -> int:
        return self.data[name][1]

    def rate(self, name: str) -> float:
        p, a = self.data[name]
        return a / p if p else 0.0

    def as_dict(self) -> dict:
        return {n: list(v) for n, v in self.data.items()}

    @classmethod
    def from_dict(cls, d: dict) -> "MoveCounters":
        c = cls(d.keys())
        for n, (p, a) in d.items():
            c.data[n] = [int(p), int(a)]
        return c


@dataclass
class TraceMeta:
    structure: ModelStructure
    k_max: int
    seed: int
    sweeps: int
    mh_blocks: tuple[str, ...]
    prior: dict = field(default_factory=dict)
    sampler: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "structure": self.structure.to_meta(),
            "k_max": self.k_max,
            "seed": self.seed,
            "sweeps": self.sweeps,
            "mh_blocks": list(self.mh_blocks),
            "prior": self.prior,
            "sampler": self.sampler,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TraceMeta":
        return cls(
            structure=ModelStructure.from_meta(d["structure"]),
            k_max=int(d["k_max"]),
            seed=int(d["seed"]),
            sweeps=int(d["sweeps"]),
            mh_blocks=tuple(d["mh_blocks"]),
            prior=dict(d.get("prior", {})),
            sampler=dict(d.get("sampler", {})),
        )


@dataclass
class ChainTrace:
    meta: TraceMeta
    sweep: np.ndarray
    k: np.ndarray
    loglik: np.ndarray
    logprior: np.ndarray
    move: np.ndarray
    accepted: np.ndarray
    mh_accepts: np.ndarray          # [N, n_blocks] bool
    thetas: list[np.ndarray]
    counters: MoveCounters

    def __len__(self) -> int:
        return self.sweep.shape[0]

    def params_at(self, i: int) -> ModelParams:
        return unflatten(self.thetas[i], int(self.k[i]), self.meta.structure)

    def indices_at_k(self, k_star: int, burn_in: int = 0) -> np.ndarray:
        if burn_in >= len(self) and len(self) > 0:
            raise TraceError(f"burn-in {burn_in} leaves no draws (trace length {len(self)})")
        idx = np.nonzero(self.k[burn_in:] == k_star)[0] + burn_in
        return idx

    def theta_matrix(self, indices: np.ndarray) -> np.ndarray:
        if indices.size == 0:
            raise TraceError("no draws selected")
        return np.stack([self.thetas[i] for i in indices])


class TraceCollector:
    """In-memory sink building a ChainTrace."""

    def __init__(self):
        self.meta: TraceMeta | None = None
        self._rows = []
        self._thetas: list[np.ndarray] = []
        self._counters: MoveCounters | None = None

    def start(self, meta: TraceMeta) -> None:
        self.meta = meta

    def record(self, sweep: int, k: int, loglik: float, logprior: float,
               move: int, accepted: bool, mh_bits: np.ndarray, theta: np.ndarray) -> None:
        self._rows.append((sweep, k, loglik, logprior, move, accepted, mh_bits))
        self._thetas.append(theta)

    def finish(self, counters: MoveCounters) -> None:
        self._counters = counters

    def result(self) -> ChainTrace:
        if self.meta is None or self._counters is None:
            raise TraceError("collector not run to completion")
        n = len(self._rows)
        n_blocks = len(self.meta.mh_blocks)
        sweep = np.empty(n, dtype=int)
        k = np.empty(n, dtype=int)
        loglik = np.empty(n)
        logprior = np.empty(n)
        move = np.empty(n, dtype=int)
        accepted = np.empty(n, dtype=bool)
        mh = np.empty((n, n_blocks), dtype=bool)
        for i, (s, kk, ll, lp, mv, acc, bits) in enumerate(self._rows):
            sweep[i], k[i], loglik[i], logprior[i], move[i], accepted[i] = s, kk, ll, lp, mv, acc
            mh[i] = bits
        return ChainTrace(self.meta, sweep, k, loglik, logprior, move, accepted,
                          mh, self._thetas, self._counters)
