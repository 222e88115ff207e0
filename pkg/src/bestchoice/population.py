"""Finite populations, covariate moments, standardization and trimming."""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np
from scipy import linalg

from .errors import DataFormatError, InvalidArm, SingularCovariates

COND_LIMIT = 1e12


def _frozen(a, dtype=float) -> np.ndarray:
    arr = np.array(a, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class FinitePopulation:
    """Covariates (and optionally both potential outcomes) of ``n`` fixed units.

    Everything random in the package is conditional on one of these.
    Arrays are copied and marked read-only on construction.
    """

    covariates: np.ndarray
    y1: Optional[np.ndarray] = None
    y0: Optional[np.ndarray] = None
    unit_ids: Optional[Sequence[str]] = None
    covariate_names: Optional[Sequence[str]] = None

    def __post_init__(self):
        x = np.asarray(self.covariates, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        if x.ndim != 2:
            raise DataFormatError("covariates must be an n x K matrix")
        n, k = x.shape
        if n < 4:
            raise DataFormatError(f"need at least 4 units, got {n}")
        if k < 1:
            raise DataFormatError("need at least one covariate")
        if not np.all(np.isfinite(x)):
            raise DataFormatError("covariates contain non-finite entries")
        object.__setattr__(self, "covariates", _frozen(x))

        if (self.y1 is None) != (self.y0 is None):
            raise DataFormatError("y1 and y0 must be both present or both absent")
        for name in ("y1", "y0"):
            y = getattr(self, name)
            if y is None:
                continue
            y = np.asarray(y, dtype=float).ravel()
            if y.shape != (n,):
                raise DataFormatError(f"{name} has length {y.size}, expected {n}")
            if not np.all(np.isfinite(y)):
                raise DataFormatError(f"{name} contains non-finite entries")
            object.__setattr__(self, name, _frozen(y))

        ids = self.unit_ids
        if ids is None:
            ids = [str(i + 1) for i in range(n)]
        ids = tuple(str(u) for u in ids)
        if len(ids) != n:
            raise DataFormatError(f"{len(ids)} unit ids for {n} units")
        if len(set(ids)) != n:
            raise DataFormatError("unit ids are not unique")
        object.__setattr__(self, "unit_ids", ids)

        names = self.covariate_names
        if names is None:
            names = [f"x{j + 1}" for j in range(k)]
        names = tuple(str(c) for c in names)
        if len(names) != k:
            raise DataFormatError(f"{len(names)} covariate names for {k} columns")
        object.__setattr__(self, "covariate_names", names)

    @property
    def n(self) -> int:
        return self.covariates.shape[0]

    @property
    def K(self) -> int:
        return self.covariates.shape[1]

    @property
    def has_outcomes(self) -> bool:
        return self.y1 is not None

    @property
    def tau(self) -> float:
        """True average treatment effect (simulation mode only)."""
        if not self.has_outcomes:
            raise ValueError("population has no potential outcomes")
        return float(np.mean(self.y1 - self.y0))

    def first_covariates(self, k: int) -> "FinitePopulation":
        """Population restricted to its first ``k`` covariate columns."""
        if not 1 <= k <= self.K:
            raise ValueError(f"K_used={k} must lie in [1, {self.K}]")
        return replace(
            self,
            covariates=self.covariates[:, :k],
            covariate_names=self.covariate_names[:k],
        )

    def with_outcomes(self, y1, y0) -> "FinitePopulation":
        return replace(self, y1=y1, y0=y0)


@dataclass(frozen=True, eq=False)
class MomentSummary:
    n: int
    n1: int
    xbar: np.ndarray
    S2x: np.ndarray
    Vxx: np.ndarray
    chol: np.ndarray
    cond_estimate: float
    ridge: float = 0.0

    @property
    def n0(self) -> int:
        return self.n - self.n1

    @property
    def K(self) -> int:
        return self.xbar.shape[0]

    def solve(self, b: np.ndarray) -> np.ndarray:
        """``S2x^{-1} b`` through the stored Cholesky factor."""
        return linalg.cho_solve((self.chol, True), b)

    def whiten(self, d: np.ndarray) -> np.ndarray:
        """``L^{-1} d`` for vectors stacked along the last axis of ``d``."""
        d = np.asarray(d, dtype=float)
        return linalg.solve_triangular(self.chol, d.T, lower=True).T


@dataclass(frozen=True)
class TrimSpec:
    lo_q: float = 0.025
    hi_q: float = 0.975

    def __post_init__(self):
        if not 0.0 < self.lo_q < self.hi_q < 1.0:
            raise ValueError(
                f"trim quantiles must satisfy 0 < lo_q < hi_q < 1, got ({self.lo_q}, {self.hi_q})"
            )


def check_arm(n: int, n1: int, lo: int = 2):
    if not lo <= n1 <= n - lo:
        raise InvalidArm(f"n1={n1} must lie in [{lo}, {n - lo}] for n={n}")


def covariance_factor(S2: np.ndarray, names: Sequence[str] = ()):
    """Cholesky factor and a scale-free condition estimate of a covariance matrix.

    Raises SingularCovariates for zero-variance columns, failed factorizations
    and condition estimates above ``COND_LIMIT``.
    """
    diag = np.diag(S2)
    bad = np.flatnonzero(~(diag > 0))
    if bad.size:
        which = ", ".join(names[j] if j < len(names) else f"column {j}" for j in bad)
        raise SingularCovariates(f"zero-variance covariate(s): {which}")
    d = 1.0 / np.sqrt(diag)
    corr = S2 * d[:, None] * d[None, :]
    eig = np.linalg.eigvalsh(corr)
    cond = np.inf if eig[0] <= 0 else float(eig[-1] / eig[0])
    if cond > COND_LIMIT:
        raise SingularCovariates(
            f"covariate covariance is (near) singular, condition estimate {cond:.3g}; "
            "remove collinear columns"
        )
    try:
        chol = np.linalg.cholesky(S2)
    except np.linalg.LinAlgError as exc:
        raise SingularCovariates("Cholesky factorization of covariate covariance failed") from exc
    return chol, cond


def compute_moments(pop: FinitePopulation, n1: int, ridge: bool = False) -> MomentSummary:
    """Covariate mean, covariance (divisor n-1) and ``Vxx = n/(n1 n0) S2x``.

    With ``ridge=True`` the covariance is inflated by ``1e-8 * trace/K`` on
    the diagonal before factorizing; the amount is recorded on the result.
    """
    n = pop.n
    check_arm(n, n1)
    x = pop.covariates
    xbar = x.mean(axis=0)
    xc = x - xbar
    S2x = xc.T @ xc / (n - 1)
    S2x = (S2x + S2x.T) / 2
    eps = 0.0
    if ridge:
        eps = 1e-8 * np.trace(S2x) / pop.K
        S2x = S2x + eps * np.eye(pop.K)
    chol, cond = covariance_factor(S2x, pop.covariate_names)
    Vxx = (n / (n1 * (n - n1))) * S2x
    return MomentSummary(
        n=n,
        n1=n1,
        xbar=_frozen(xbar),
        S2x=_frozen(S2x),
        Vxx=_frozen(Vxx),
        chol=_frozen(chol),
        cond_estimate=cond,
        ridge=eps,
    )


def standardize(pop: FinitePopulation, moments: MomentSummary) -> np.ndarray:
    """Rows ``w_i = L^{-1}(x_i - xbar)`` with ``S2x = L L^T``.

    The output has zero column means and identity covariance (divisor n-1).
    """
    return moments.whiten(pop.covariates - moments.xbar)


def trim(pop: FinitePopulation, spec: TrimSpec = TrimSpec()) -> FinitePopulation:
    """Winsorize every covariate column at its empirical ``lo_q``/``hi_q`` quantiles.

    Quantiles use linear interpolation between order statistics
    (numpy's default ``"linear"`` method).
    """
    x = pop.covariates
    lo = np.quantile(x, spec.lo_q, axis=0)
    hi = np.quantile(x, spec.hi_q, axis=0)
    return replace(pop, covariates=np.clip(x, lo, hi))
