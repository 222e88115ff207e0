"""Point estimate, variance/R^2 estimators and confidence intervals.

Three intervals are offered, all symmetric about the difference in means:

* ``constrained`` -- half-width ``sqrt(Vhat) * nu_{1-alpha/2,K,T}(R2hat)``,
  valid under best-choice rerandomization for any T;
* ``wald`` -- half-width ``sqrt(Vhat (1 - R2hat)) * z_{1-alpha/2}``, for
  designs where T is large relative to exp(K);
* ``neyman`` -- the covariate-free interval for complete randomization.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import special

from .asymptotics import AsymParams, McConfig, quantile_nu
from .design import Assignment
from .errors import ArmTooSmall, DataFormatError, DomainError
from .population import MomentSummary

HC_VARIANTS = ("HC0", "HC1", "HC2", "HC3")
METHODS = ("constrained", "wald", "neyman")


@dataclass(frozen=True, eq=False)
class ObservedData:
    z: Assignment
    y_obs: np.ndarray
    covariates: np.ndarray

    def __post_init__(self):
        y = np.asarray(self.y_obs, dtype=float).ravel()
        x = np.asarray(self.covariates, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        if y.shape != (self.z.n,) or x.shape[0] != self.z.n:
            raise DataFormatError("assignment, outcomes and covariates disagree on n")
        if not np.all(np.isfinite(y)):
            raise DataFormatError("observed outcomes contain non-finite values")
        object.__setattr__(self, "y_obs", y)
        object.__setattr__(self, "covariates", x)

    @property
    def n(self) -> int:
        return self.z.n

    @property
    def n1(self) -> int:
        return self.z.n1


@dataclass(frozen=True)
class VarianceEstimate:
    Vtt_hat: float
    R2_hat: float
    hc: str
    components: dict


@dataclass(frozen=True)
class InferenceResult:
    tau_hat: float
    ci_lo: float
    ci_hi: float
    method: str
    alpha: float
    variance: Optional[VarianceEstimate] = None
    mc_meta: dict = field(default_factory=dict)

    @property
    def half_width(self) -> float:
        return (self.ci_hi - self.ci_lo) / 2

    @property
    def length(self) -> float:
        return self.ci_hi - self.ci_lo


def normalize_hc(hc: str) -> str:
    tag = str(hc).upper()
    if tag not in HC_VARIANTS:
        raise ValueError(f"unknown HC variant {hc!r}; expected one of {HC_VARIANTS}")
    return tag


def _z(alpha: float) -> float:
    if not 0.0 < alpha < 1.0:
        raise DomainError(f"alpha must lie in (0, 1), got {alpha}")
    return float(special.ndtri(1 - alpha / 2))


def diff_in_means(data: ObservedData) -> float:
    t = data.z.treated
    return float(data.y_obs[t].mean() - data.y_obs[~t].mean())


def _arm_pieces(y, x, hc, S2x_solve):
    n_z, K = x.shape
    yc = y - y.mean()
    xc = x - x.mean(axis=0)
    s2 = float(yc @ yc) / (n_z - 1)
    s_zx = xc.T @ yc / (n_z - 1)
    s2_given = float(s_zx @ S2x_solve(s_zx))
    if hc == "HC0":
        resid = s2 - s2_given
    else:
        design = np.column_stack([np.ones(n_z), x])
        q, _ = np.linalg.qr(design)
        e = y - q @ (q.T @ y)
        if hc == "HC1":
            scale = np.full(n_z, n_z / (n_z - K - 1))
        else:
            h = np.einsum("ij,ij->i", q, q)
            scale = 1.0 / (1.0 - h) if hc == "HC2" else 1.0 / (1.0 - h) ** 2
        resid = float(scale @ (e * e)) / (n_z - 1)
    return s2, s_zx, s2_given, resid


def estimate_variance(data: ObservedData, moments: MomentSummary, hc: str = "HC0") -> VarianceEstimate:
    """Sample-analogue estimates of V_tautau and R^2 under a chosen residual rescaling.

    ``s2_{z|x}`` projects the within-arm outcome/covariate covariance on the
    full-population covariate covariance.  HC0 uses ``s2_z - s2_{z|x}`` as the
    unexplained variance; HC1-HC3 instead use the variance of residuals from
    the within-arm regression of outcome on (1, x), rescaled by
    ``n_z/(n_z-K-1)``, ``1/(1-h_ii)`` or ``1/(1-h_ii)^2``.  The cross term
    ``s2_{tau|x}`` is never rescaled.
    """
    hc = normalize_hc(hc)
    x = data.covariates
    n, K = x.shape
    if moments.K != K or moments.n != n:
        raise ValueError("moments do not match the covariates")
    t = data.z.treated
    n1, n0 = int(t.sum()), int((~t).sum())
    for arm, size in (("treated", n1), ("control", n0)):
        if size < K + 2:
            raise ArmTooSmall(f"{arm} arm has {size} units; need at least K + 2 = {K + 2}")

    s2_1, s_1x, s2_1x, r1 = _arm_pieces(data.y_obs[t], x[t], hc, moments.solve)
    s2_0, s_0x, s2_0x, r0 = _arm_pieces(data.y_obs[~t], x[~t], hc, moments.solve)
    d = s_1x - s_0x
    s2_tau_x = float(d @ moments.solve(d))

    floor = 1e-12 * (s2_1 + s2_0)
    vtt = max(s2_1 / n1 + s2_0 / n0 - s2_tau_x / n, floor)
    r1f, r0f = max(r1, 0.0), max(r0, 0.0)
    if vtt > 0:
        r2 = 1.0 - (r1f / n1 + r0f / n0) / vtt
        r2 = min(max(r2, 0.0), 1.0)
    else:
        r2 = 0.0
    comps = {
        "s2_1": s2_1,
        "s2_0": s2_0,
        "s2_1_given_x": s2_1x,
        "s2_0_given_x": s2_0x,
        "s2_tau_given_x": s2_tau_x,
        "s2_1_resid": r1f,
        "s2_0_resid": r0f,
        "s2_1_resid_raw": r1,
        "s2_0_resid_raw": r0,
        "n1": n1,
        "n0": n0,
    }
    return VarianceEstimate(Vtt_hat=vtt, R2_hat=r2, hc=hc, components=comps)


def ci_constrained(
    tau_hat: float,
    variance: VarianceEstimate,
    K: int,
    T: int,
    alpha: float = 0.05,
    mc: McConfig = McConfig(),
    nu: Optional[Callable[[float], float]] = None,
) -> InferenceResult:
    """``tau_hat -/+ sqrt(Vhat) * nu_{1-alpha/2,K,T}(R2hat)``.

    ``nu`` may supply a precomputed quantile function of R2 (a ``NuTable``)
    to avoid rerunning the Monte Carlo for every call.
    """
    _z(alpha)
    if nu is None:
        q = quantile_nu(1 - alpha / 2, AsymParams(K, T, variance.R2_hat), mc)
    else:
        q = nu(variance.R2_hat)
    hw = math.sqrt(variance.Vtt_hat) * q
    meta = {"seed": mc.seed, "draws": mc.draws, "antithetic": mc.antithetic, "K": K, "T": T, "nu": q}
    return InferenceResult(tau_hat, tau_hat - hw, tau_hat + hw, "constrained", alpha, variance, meta)


def ci_wald(tau_hat: float, variance: VarianceEstimate, alpha: float = 0.05) -> InferenceResult:
    hw = math.sqrt(variance.Vtt_hat * (1.0 - variance.R2_hat)) * _z(alpha)
    return InferenceResult(tau_hat, tau_hat - hw, tau_hat + hw, "wald", alpha, variance)


def ci_neyman(data: ObservedData, alpha: float = 0.05) -> InferenceResult:
    t = data.z.treated
    y1, y0 = data.y_obs[t], data.y_obs[~t]
    if y1.size < 2 or y0.size < 2:
        raise ArmTooSmall("each arm needs at least 2 units")
    tau = float(y1.mean() - y0.mean())
    se2 = y1.var(ddof=1) / y1.size + y0.var(ddof=1) / y0.size
    hw = math.sqrt(se2) * _z(alpha)
    return InferenceResult(tau, tau - hw, tau + hw, "neyman", alpha, None, {"se": math.sqrt(se2)})


def analyze(
    data: ObservedData,
    moments: MomentSummary,
    method: str = "constrained",
    hc: str = "HC0",
    T: int = 1,
    alpha: float = 0.05,
    mc: McConfig = McConfig(),
) -> InferenceResult:
    """Run the full estimate-and-interval pipeline for one method."""
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")
    if method == "neyman":
        return ci_neyman(data, alpha)
    tau = diff_in_means(data)
    var = estimate_variance(data, moments, hc)
    if method == "wald":
        return ci_wald(tau, var, alpha)
    return ci_constrained(tau, var, data.covariates.shape[1], T, alpha, mc)
