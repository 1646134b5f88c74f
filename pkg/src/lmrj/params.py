"""Variable-dimension model parameters and the three measurement variants.

A parameter state consists of unnormalized initial weights (length k),
unnormalized transition weights (k x k) and one measurement block:

* ``BasicMeasurement``: a positive weight tensor over response categories,
  [L, k] time-homogeneous or [L, k, T] time-varying, where L is the total
  category count across response variables. Columns normalize to the
  conditional response probabilities.
* ``CutpointMeasurement``: adjacent-category logits eta_{y|u} = zeta_u +
  omega_y for one ordinal variable; zeta is the per-state tendency, omega
  the shared cutpoints (length l-1).
* ``CovariateMeasurement``: state support points xi [2, k] acting as
  intercepts of two marginal logits, regression coefficients beta, and a
  constant log-odds ratio gamma for a bivariate binary response.

Only positivity and shape are enforced here; probability semantics live in
the likelihood module.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import ModelError

VARIANTS = ("basic", "cutpoint", "covariate")


@dataclass(frozen=True)
class ModelStructure:
    """Fixed (non-sampled) description of a model family instance."""

    variant: str
    T: int
    levels: tuple[int, ...]
    time_varying: bool = False      # basic variant only
    n_covariates: int = 0           # design width p, covariate variant only

    def __post_init__(self):
        object.__setattr__(self, "levels", tuple(int(l) for l in self.levels))
        if self.variant not in VARIANTS:
            raise ModelError(f"unknown variant {self.variant!r}")
        if self.T < 1:
            raise ModelError("T must be >= 1")
        if any(l < 2 for l in self.levels):
            raise ModelError("every response variable needs >= 2 categories")
        if self.variant == "cutpoint" and len(self.levels) != 1:
            raise ModelError("cutpoint variant is univariate")
        if self.variant == "covariate":
            if tuple(self.levels) != (2, 2):
                raise ModelError("covariate variant requires two binary responses")
            if self.n_covariates < 1:
                raise ModelError("covariate variant requires a design of width >= 1")
        if self.time_varying and self.variant != "basic":
            raise ModelError("time-varying weights only apply to the basic variant")

    @property
    def r(self) -> int:
        return len(self.levels)

    @property
    def total_levels(self) -> int:
        return int(sum(self.levels))

    @property
    def n_support(self) -> int:
        # one marginal logit per response variable
        return self.r

    @property
    def n_slopes(self) -> int:
        return self.r * self.n_covariates

    @property
    def n_log_odds(self) -> int:
        # bivariate case: a single cross ratio
        return 1

    def level_slices(self) -> list[slice]:
        """Row slices of the stacked emission tensor, one per variable."""
        out, base = [], 0
        for l in self.levels:
            out.append(slice(base, base + l))
            base += l
        return out

    def measurement_dim(self) -> int:
        """Flattened measurement size per state column (basic/cutpoint/covariate)."""
        if self.variant == "basic":
            return self.total_levels * (self.T if self.time_varying else 1)
        if self.variant == "cutpoint":
            return 1
        return self.n_support

    def to_meta(self) -> dict:
        return {
            "variant": self.variant,
            "T": self.T,
            "levels": list(self.levels),
            "time_varying": self.time_varying,
            "n_covariates": self.n_covariates,
        }

    @classmethod
    def from_meta(cls, meta: dict) -> "ModelStructure":
        return cls(
            variant=meta["variant"],
            T=int(meta["T"]),
            levels=tuple(meta["levels"]),
            time_varying=bool(meta.get("time_varying", False)),
            n_covariates=int(meta.get("n_covariates", 0)),
        )


@dataclass
class BasicMeasurement:
    emit_w: np.ndarray  # [L, k] or [L, k, T], positive

    @property
    def k(self) -> int:
        return self.emit_w.shape[1]

    @property
    def time_varying(self) -> bool:
        return self.emit_w.ndim == 3

    def permute(self, perm) -> "BasicMeasurement":
        return BasicMeasurement(self.emit_w[:, perm].copy())

    def flat(self) -> np.ndarray:
        return self.emit_w.ravel()

    def column(self, u: int) -> np.ndarray:
        return self.emit_w[:, u]


@dataclass
class CutpointMeasurement:
    tendency: np.ndarray   # [k]
    cutpoints: np.ndarray  # [l-1], shared across states

    @property
    def k(self) -> int:
        return self.tendency.shape[0]

    def permute(self, perm) -> "CutpointMeasurement":
        return CutpointMeasurement(self.tendency[perm].copy(), self.cutpoints.copy())

    def flat(self) -> np.ndarray:
        return np.concatenate([self.tendency, self.cutpoints])


@dataclass
class CovariateMeasurement:
    support: np.ndarray   # [n_support, k]
    slopes: np.ndarray    # [n_slopes]
    log_odds: np.ndarray  # [1]

    @property
    def k(self) -> int:
        return self.support.shape[1]

    def permute(self, perm) -> "CovariateMeasurement":
        return CovariateMeasurement(self.support[:, perm].copy(), self.slopes.copy(), self.log_odds.copy())

    def flat(self) -> np.ndarray:
        return np.concatenate([self.support.ravel(), self.slopes, self.log_odds])


Measurement = BasicMeasurement | CutpointMeasurement | CovariateMeasurement


@dataclass
class ModelParams:
    init_w: np.ndarray    # [k], positive
    trans_w: np.ndarray   # [k, k], positive, rows normalize to transition probs
    measurement: Measurement

    def __post_init__(self):
        self.init_w = np.asarray(self.init_w, dtype=float)
        self.trans_w = np.asarray(self.trans_w, dtype=float)

    @property
    def k(self) -> int:
        return self.init_w.shape[0]

    def init_probs(self) -> np.ndarray:
        return self.init_w / self.init_w.sum()

    def trans_probs(self) -> np.ndarray:
        return self.trans_w / self.trans_w.sum(axis=1, keepdims=True)

    def validate(self, structure: ModelStructure | None = None) -> None:
        k = self.k
        if self.trans_w.shape != (k, k):
            raise ModelError("transition weights must be k x k")
        if self.measurement.k != k:
            raise ModelError("measurement block does not match k")
        if not np.all(np.isfinite(self.init_w)) or np.any(self.init_w <= 0):
            raise ModelError("initial weights must be positive and finite")
        if not np.all(np.isfinite(self.trans_w)) or np.any(self.trans_w <= 0):
            raise ModelError("transition weights must be positive and finite")
        m = self.measurement
        if isinstance(m, BasicMeasurement):
            if not np.all(np.isfinite(m.emit_w)) or np.any(m.emit_w <= 0):
                raise ModelError("emission weights must be positive and finite")
        else:
            for arr in (m.flat(),):
                if not np.all(np.isfinite(arr)):
                    raise ModelError("measurement parameters must be finite")
        if structure is not None:
            self._check_structure(structure)

    def _check_structure(self, s: ModelStructure) -> None:
        m = self.measurement
        if s.variant == "basic":
            if not isinstance(m, BasicMeasurement):
                raise ModelError("structure expects a basic measurement block")
            want = (s.total_levels, self.k, s.T) if s.time_varying else (s.total_levels, self.k)
            if m.emit_w.shape != want:
                raise ModelError(f"emission weights shaped {m.emit_w.shape}, expected {want}")
        elif s.variant == "cutpoint":
            if not isinstance(m, CutpointMeasurement):
                raise ModelError("structure expects a cutpoint measurement block")
            if m.cutpoints.shape != (s.levels[0] - 1,):
                raise ModelError("cutpoint vector must have length l-1")
        else:
            if not isinstance(m, CovariateMeasurement):
                raise ModelError("structure expects a covariate measurement block")
            if m.support.shape != (s.n_support, self.k):
                raise ModelError("support points must be [2, k]")
            if m.slopes.shape != (s.n_slopes,):
                raise ModelError(f"slopes must have length {s.n_slopes}")
            if m.log_odds.shape != (1,):
                raise ModelError("log-odds ratio must have length 1")

    def permute(self, perm) -> "ModelParams":
        """Relabel states: position j of the result takes old state perm[j]."""
        perm = np.asarray(perm)
        return ModelParams(
            self.init_w[perm].copy(),
            self.trans_w[np.ix_(perm, perm)].copy(),
            self.measurement.permute(perm),
        )

    def copy(self) -> "ModelParams":
        return self.permute(np.arange(self.k))

    def flatten(self) -> np.ndarray:
        return np.concatenate([self.init_w, self.trans_w.ravel(), self.measurement.flat()])

    def replace_measurement(self, m: Measurement) -> "ModelParams":
        return replace(self, measurement=m)


def flat_dim(k: int, structure: ModelStructure) -> int:
    if structure.variant == "cutpoint":
        meas = k + structure.levels[0] - 1
    elif structure.variant == "covariate":
        meas = structure.n_support * k + structure.n_slopes + 1
    else:
        meas = structure.measurement_dim() * k
    return k + k * k + meas


def unflatten(theta: np.ndarray, k: int, structure: ModelStructure) -> ModelParams:
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (flat_dim(k, structure),):
        raise ModelError(f"flat vector length {theta.size} does not match k={k}")
    init_w = theta[:k].copy()
    trans_w = theta[k:k + k * k].reshape(k, k).copy()
    rest = theta[k + k * k:]
    if structure.variant == "basic":
        shape = (structure.total_levels, k, structure.T) if structure.time_varying \
            else (structure.total_levels, k)
        meas: Measurement = BasicMeasurement(rest.reshape(shape).copy())
    elif structure.variant == "cutpoint":
        meas = CutpointMeasurement(rest[:k].copy(), rest[k:].copy())
    else:
        ns = structure.n_support
        meas = CovariateMeasurement(
            rest[:ns * k].reshape(ns, k).copy(),
            rest[ns * k:ns * k + structure.n_slopes].copy(),
            rest[ns * k + structure.n_slopes:].copy(),
        )
    return ModelParams(init_w, trans_w, meas)


def flat_names(k: int, structure: ModelStructure) -> list[str]:
    """Column names matching ``ModelParams.flatten`` order. States are 1-based."""
    names = [f"init_w[{u}]" for u in range(1, k + 1)]
    names += [f"trans_w[{u},{v}]" for u in range(1, k + 1) for v in range(1, k + 1)]
    if structure.variant == "basic":
        rows = []
        for j, l in enumerate(structure.levels):
            rows += [f"v{j + 1}:y={y}" for y in range(l)]
        # C-order of the [L, k(, T)] tensor: row, then state, then occasion
        if structure.time_varying:
            names += [f"emit_w[{row},u={u},t={t}]" for row in rows
                      for u in range(1, k + 1) for t in range(1, structure.T + 1)]
        else:
            names += [f"emit_w[{row},u={u}]" for row in rows for u in range(1, k + 1)]
    elif structure.variant == "cutpoint":
        names += [f"tendency[{u}]" for u in range(1, k + 1)]
        names += [f"cutpoint[{y}]" for y in range(1, structure.levels[0])]
    else:
        names += [f"support[{h},{u}]" for h in range(1, structure.n_support + 1)
                  for u in range(1, k + 1)]
        names += [f"slope[{j}]" for j in range(1, structure.n_slopes + 1)]
        names += ["log_odds"]
    return names
