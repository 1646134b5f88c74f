"""Panel data containers: categorical response panels plus optional covariates.

Responses are stored dense as an integer tensor [n, T, r] with categories
coded 0..l_j-1 per variable. Covariates live in a float tensor [n, T, c]
addressed by column name; the design matrix used by the covariate
measurement model is derived on demand (selected columns plus T-1 occasion
dummies).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import DataError


@dataclass(frozen=True)
class CovariateDesign:
    """Recipe for the per-occasion design vector x_i^(t)."""

    columns: tuple[str, ...]
    occasion_dummies: bool = True

    def width(self, T: int) -> int:
        return len(self.columns) + (T - 1 if self.occasion_dummies else 0)

    def names(self, T: int) -> tuple[str, ...]:
        dummies = tuple(f"occ{t}" for t in range(2, T + 1)) if self.occasion_dummies else ()
        return self.columns + dummies


@dataclass
class PanelDataset:
    responses: np.ndarray                    # [n, T, r] int
    levels: tuple[int, ...]                  # categories per response variable
    var_names: tuple[str, ...] = ()
    covariates: np.ndarray | None = None     # [n, T, c] float
    covariate_names: tuple[str, ...] = ()
    standardized: tuple[str, ...] = ()       # column names that were z-scored
    design: CovariateDesign | None = None
    subjects: tuple[str, ...] = ()           # original labels, kept for export

    def __post_init__(self):
        self.responses = np.asarray(self.responses)
        if self.responses.ndim == 2:
            self.responses = self.responses[:, :, None]
        if self.responses.ndim != 3:
            raise DataError("responses must be an [n, T, r] tensor")
        if not self.var_names:
            self.var_names = tuple(f"y{j + 1}" for j in range(self.r))
        if not self.subjects:
            self.subjects = tuple(str(i + 1) for i in range(self.n))
        if self.covariates is not None:
            self.covariates = np.asarray(self.covariates, dtype=float)
        self.levels = tuple(int(l) for l in self.levels)
        self.validate()

    @property
    def n(self) -> int:
        return self.responses.shape[0]

    @property
    def T(self) -> int:
        return self.responses.shape[1]

    @property
    def r(self) -> int:
        return self.responses.shape[2]

    def validate(self) -> None:
        if len(self.levels) != self.r:
            raise DataError(f"{len(self.levels)} level counts for {self.r} response variables")
        if len(self.var_names) != self.r:
            raise DataError("var_names length does not match response count")
        if len(self.subjects) != self.n:
            raise DataError("subject label count does not match panel size")
        if any(l < 2 for l in self.levels):
            raise DataError("each response variable needs at least 2 categories")
        if not np.issubdtype(self.responses.dtype, np.integer):
            raise DataError("responses must be integer coded")
        for j, l in enumerate(self.levels):
            col = self.responses[:, :, j]
            if col.min() < 0 or col.max() >= l:
                bad = np.argwhere((col < 0) | (col >= l))[0]
                raise DataError(
                    f"response {self.var_names[j]} out of range 0..{l - 1} "
                    f"at subject {self.subjects[bad[0]]}, occasion {bad[1] + 1}"
                )
        if self.covariates is not None:
            if self.covariates.shape[:2] != (self.n, self.T):
                raise DataError("covariates must align with responses on [n, T]")
            if len(self.covariate_names) != self.covariates.shape[2]:
                raise DataError("covariate_names length does not match covariate columns")
            if not np.all(np.isfinite(self.covariates)):
                raise DataError("covariates contain non-finite values")

    def covariate_column(self, name: str) -> np.ndarray:
        if self.covariates is None:
            raise DataError("dataset has no covariates")
        try:
            j = self.covariate_names.index(name)
        except ValueError:
            raise DataError(f"unknown covariate column {name!r}") from None
        return self.covariates[:, :, j]

    def standardize(self, columns: tuple[str, ...] | list[str]) -> "PanelDataset":
        """Z-score the named covariate columns (population sd). Idempotent on
        columns that already have mean 0 and variance 1. Binary dummy columns
        should not be listed here."""
        if not columns:
            return self
        cov = np.array(self.covariates, copy=True)
        for name in columns:
            x = self.covariate_column(name)
            j = self.covariate_names.index(name)
            mu = x.mean()
            sd = x.std()
            if sd <= 0:
                raise DataError(f"cannot standardize constant column {name!r}")
            cov[:, :, j] = (x - mu) / sd
        done = tuple(dict.fromkeys(self.standardized + tuple(columns)))
        return replace(self, covariates=cov, standardized=done)

    def design_matrix(self) -> np.ndarray:
        """Assemble the [n, T, p] design tensor from the design recipe.

        Occasion dummies code t = 2..T against a t = 1 baseline and are never
        standardized.
        """
        if self.design is None:
            raise DataError("dataset has no covariate design")
        cols = [self.covariate_column(c) for c in self.design.columns]
        parts = [np.stack(cols, axis=2)] if cols else []
        if self.design.occasion_dummies:
            dummies = np.zeros((self.n, self.T, self.T - 1))
            for t in range(1, self.T):
                dummies[:, t, t - 1] = 1.0
            parts.append(dummies)
        if not parts:
            raise DataError("empty covariate design")
        return np.concatenate(parts, axis=2)

    def equals(self, other: "PanelDataset") -> bool:
        if not isinstance(other, PanelDataset):
            return False
        same = (
            np.array_equal(self.responses, other.responses)
            and self.levels == other.levels
            and self.var_names == other.var_names
            and self.subjects == other.subjects
            and self.covariate_names == other.covariate_names
        )
        if not same:
            return False
        if (self.covariates is None) != (other.covariates is None):
            return False
        if self.covariates is not None:
            return np.array_equal(self.covariates, other.covariates)
        return True
