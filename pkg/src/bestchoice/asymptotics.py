"""The constrained Gaussian L_{K,T} and the quantities built from it.

``L_{K,T}`` is the first coordinate of the shortest of ``T`` iid standard
K-variate normal vectors.  It factorizes as ``chi_{K,T} * S * sqrt(beta_K)``
where ``chi_{K,T}^2`` is the minimum of ``T`` iid chi-squared(K) variables,
``S`` a random sign and ``beta_K ~ Beta(1/2, (K-1)/2)``.  The minimum is drawn
through the chi-squared quantile function applied to a Beta(1, T) variate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import special

from .errors import DomainError


@dataclass(frozen=True)
class AsymParams:
    K: int
    T: int
    R2: float
    Vtt: Optional[float] = None

    def __post_init__(self):
        _check_KT(self.K, self.T)
        if not 0.0 <= self.R2 <= 1.0:
            raise DomainError(f"R2 must lie in [0, 1], got {self.R2}")
        if self.Vtt is not None and not self.Vtt > 0:
            raise DomainError(f"Vtt must be positive, got {self.Vtt}")


@dataclass(frozen=True)
class McConfig:
    draws: int = 200_000
    seed: int = 0
    antithetic: bool = True

    def __post_init__(self):
        if self.draws < 10_000:
            raise ValueError(f"draws must be >= 10000, got {self.draws}")


def _check_KT(K, T):
    if int(K) != K or K < 1:
        raise DomainError(f"K must be a positive integer, got {K}")
    if int(T) != T or T < 1:
        raise DomainError(f"T must be a positive integer, got {T}")


def chi2_quantile(K: int, p):
    """Quantile function of chi-squared(K), via the inverse regularized lower incomplete gamma."""
    if K < 1:
        raise DomainError(f"K must be >= 1, got {K}")
    p_arr = np.asarray(p, dtype=float)
    if np.any(~(p_arr >= 0)) or np.any(p_arr >= 1):
        raise DomainError("p must lie in [0, 1)")
    x = 2.0 * special.gammaincinv(K / 2.0, p_arr)
    return float(x) if np.ndim(x) == 0 else x


def beta_1T_from_uniform(u, T: int):
    """Inverse CDF of Beta(1, T): ``1 - (1 - u)^(1/T)``, computed without cancellation."""
    return -np.expm1(np.log1p(-np.asarray(u, dtype=float)) / T)


def chi2_KT_from_uniform(K: int, T: int, u):
    """Minimum of T chi-squared(K) variables as a function of one uniform."""
    return chi2_quantile(K, beta_1T_from_uniform(u, T))


def sample_chi2_KT(K: int, T: int, rng: np.random.Generator, size=None):
    _check_KT(K, T)
    return chi2_KT_from_uniform(K, T, rng.random(size))


def _beta_half(K: int, rng: np.random.Generator, size):
    if K == 1:
        return np.ones(size) if size is not None else 1.0
    g1 = rng.standard_gamma(0.5, size)
    g2 = rng.standard_gamma((K - 1) / 2.0, size)
    return g1 / (g1 + g2)


def sample_LKT(K: int, T: int, rng: np.random.Generator, size=None):
    """Draws of L_{K,T} by the product representation."""
    _check_KT(K, T)
    chi = np.sqrt(sample_chi2_KT(K, T, rng, size))
    sign = np.where(rng.random(size) < 0.5, -1.0, 1.0)
    beta = _beta_half(K, rng, size)
    out = chi * sign * np.sqrt(beta)
    return float(out) if size is None else out


def sample_LKT_definitional(K: int, T: int, rng: np.random.Generator, size: int) -> np.ndarray:
    """Draws of L_{K,T} straight from its definition (T normal vectors, keep the shortest).

    Costs ``size * T * K`` normals; used as a reference sampler.
    """
    out = np.empty(size)
    per = max(1, (1 << 22) // (T * K))
    done = 0
    while done < size:
        r = min(per, size - done)
        d = rng.standard_normal((r, T, K))
        j = np.einsum("rtk,rtk->rt", d, d).argmin(axis=1)
        out[done : done + r] = d[np.arange(r), j, 0]
        done += r
    return out


@dataclass(frozen=True)
class McEstimate:
    value: float
    se: float
    draws: int


def variance_vKT(K: int, T: int, mc: McConfig = McConfig()) -> McEstimate:
    """Var(L_{K,T}) = E[min of T chi-squared(K)] / K, by Monte Carlo.

    ``T = 1`` is returned exactly (value 1, zero standard error).
    """
    _check_KT(K, T)
    if T == 1:
        return McEstimate(1.0, 0.0, 0)
    rng = np.random.default_rng(np.random.SeedSequence(mc.seed, spawn_key=(K, T)))
    x = sample_chi2_KT(K, T, rng, mc.draws) / K
    return McEstimate(float(x.mean()), float(x.std(ddof=1) / math.sqrt(mc.draws)), mc.draws)


def _mixture_components(K: int, T: int, mc: McConfig):
    rng = np.random.default_rng(mc.seed)
    if mc.antithetic:
        half = mc.draws // 2
        eps = rng.standard_normal(half)
        L = sample_LKT(K, T, rng, half)
        return np.concatenate([eps, -eps]), np.concatenate([L, -L])
    return rng.standard_normal(mc.draws), sample_LKT(K, T, rng, mc.draws)


def quantile_nu(alpha: float, params: AsymParams, mc: McConfig = McConfig()) -> float:
    """alpha-quantile of ``sqrt(1-R2) eps0 + sqrt(R2) L_{K,T}`` by Monte Carlo.

    Deterministic given ``mc.seed``; the empirical quantile interpolates
    linearly between order statistics.
    """
    if not 0.0 < alpha < 1.0:
        raise DomainError(f"alpha must lie in (0, 1), got {alpha}")
    eps, L = _mixture_components(params.K, params.T, mc)
    mix = math.sqrt(1.0 - params.R2) * eps + math.sqrt(params.R2) * L
    return float(np.quantile(mix, alpha))


class NuTable:
    """ν_{alpha,K,T}(R2) tabulated on a grid for repeated evaluation.

    The grid is uniform in ``theta = arcsin(sqrt(R2))`` so that the mixture
    weights ``cos(theta), sin(theta)`` are smooth; the Monte Carlo draws are
    shared across grid points and values in between are interpolated
    linearly.
    """

    def __init__(self, alpha: float, K: int, T: int, mc: McConfig = McConfig(), points: int = 257):
        if not 0.0 < alpha < 1.0:
            raise DomainError(f"alpha must lie in (0, 1), got {alpha}")
        self.alpha, self.K, self.T, self.mc = alpha, K, T, mc
        eps, L = _mixture_components(K, T, mc)
        self.theta = np.linspace(0.0, math.pi / 2, points)
        self.values = np.array(
            [np.quantile(math.cos(t) * eps + math.sin(t) * L, alpha) for t in self.theta]
        )

    def __call__(self, R2: float) -> float:
        if not 0.0 <= R2 <= 1.0:
            raise DomainError(f"R2 must lie in [0, 1], got {R2}")
        return float(np.interp(math.asin(math.sqrt(R2)), self.theta, self.values))


def percent_variance_reduction(R2: float, K: int, T: int, mc: McConfig = McConfig()) -> float:
    """Asymptotic variance reduction of best-choice over complete randomization, ``(1 - v) R2``."""
    if not 0.0 <= R2 <= 1.0:
        raise DomainError(f"R2 must lie in [0, 1], got {R2}")
    return (1.0 - variance_vKT(K, T, mc).value) * R2


def percent_qr_reduction(alpha: float, R2: float, K: int, T: int, mc: McConfig = McConfig()) -> float:
    """Relative shortening of the symmetric 1-alpha quantile range, ``1 - ν/z``."""
    if not 0.0 < alpha < 1.0:
        raise DomainError(f"alpha must lie in (0, 1), got {alpha}")
    z = special.ndtri(1 - alpha / 2)
    nu = quantile_nu(1 - alpha / 2, AsymParams(K, T, R2), mc)
    return 1.0 - nu / z


NEAR_OPTIMAL_V = 0.1
NEGLIGIBLE_GAIN_V = 0.9


def regime_classify(K: int, T: int, mc: McConfig = McConfig()) -> dict:
    """log(T)/K together with v_{K,T} and an advisory label.

    v bounds the gap (in fraction of variance) to the best achievable
    precision, so it drives the label: below 0.1 is "near-optimal",
    above 0.9 "negligible-gain", anything else "intermediate".
    """
    est = variance_vKT(K, T, mc)
    v = est.value
    if v < NEAR_OPTIMAL_V:
        label = "near-optimal"
    elif v > NEGLIGIBLE_GAIN_V or T == 1:
        label = "negligible-gain"
    else:
        label = "intermediate"
    return {
        "K": int(K),
        "T": int(T),
        "ratio": math.log(T) / K,
        "regime": label,
        "v_estimate": v,
        "v_se": est.se,
        "mc_draws": est.draws,
        "mc_seed": mc.seed,
    }
