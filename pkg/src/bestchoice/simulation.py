"""Repeated-sampling evaluation of best-choice designs and their intervals.

Everything here conditions on a fixed finite population carrying both
potential outcomes.  Replicate ``r`` of design ``d`` draws from the substream
``(master_seed, d, r)``, so reports do not depend on execution order or on
the number of worker processes.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import special, stats

from .asymptotics import McConfig, NuTable
from .design import Assignment, best_choice_batch, make_rng
from .errors import DomainError, SingularCovariates
from .inference import (
    HC_VARIANTS,
    METHODS,
    ObservedData,
    ci_constrained,
    ci_neyman,
    ci_wald,
    diff_in_means,
    estimate_variance,
    normalize_hc,
)
from .population import FinitePopulation, check_arm, compute_moments, standardize


@dataclass(frozen=True)
class TruthSummary:
    tau: float
    Vtt: float
    R2: float
    S2_tau: float
    S2_tau_res: float
    gamma_n: float
    delta_bound: float
    S2_1: float
    S2_0: float


def impute_constant_effect(data: ObservedData, unit_ids=None) -> FinitePopulation:
    """Fill in missing potential outcomes assuming every unit's effect equals tau_hat."""
    tau = diff_in_means(data)
    t = data.z.treated
    y1 = np.where(t, data.y_obs, data.y_obs + tau)
    y0 = np.where(t, data.y_obs - tau, data.y_obs)
    return FinitePopulation(data.covariates, y1=y1, y0=y0, unit_ids=unit_ids)


def _cov(a, b):
    n = a.shape[0]
    return (a - a.mean(axis=0)).T @ (b - b.mean(axis=0)) / (n - 1)


def gamma_n(pop: FinitePopulation, n1: int, K_used: Optional[int] = None) -> float:
    """Berry-Esseen-type quantity for the joint Gaussian approximation.

    ``(K+1)^{1/4} / sqrt(n r1 r0) * mean_i ||S_u^{-1}(u_i - ubar)||^3`` with
    ``u_i = (Y_i(1)/r1 + Y_i(0)/r0, x_i)`` and ``S_u^{-1}`` the inverse
    symmetric square root of the covariance of the ``u_i``.
    """
    if not pop.has_outcomes:
        raise ValueError("gamma_n needs both potential outcomes")
    K = pop.K if K_used is None else K_used
    x = pop.covariates[:, :K]
    n = pop.n
    check_arm(n, n1)
    r1 = n1 / n
    r0 = 1 - r1
    u = np.column_stack([pop.y1 / r1 + pop.y0 / r0, x])
    S2u = _cov(u, u)
    lam, vec = np.linalg.eigh((S2u + S2u.T) / 2)
    if lam[0] <= 1e-12 * lam[-1]:
        raise SingularCovariates("covariance of (outcome summary, covariates) is singular")
    inv_root = (vec / np.sqrt(lam)) @ vec.T
    xi = (u - u.mean(axis=0)) @ inv_root
    norms = np.sqrt(np.einsum("ij,ij->i", xi, xi))
    return float((K + 1) ** 0.25 / math.sqrt(n * r1 * r0) * np.mean(norms**3))


def delta_bound(g: float) -> float:
    """Upper bound ``174 g + 7 g^{1/3}`` on the Gaussian approximation error."""
    return 174.0 * g + 7.0 * g ** (1.0 / 3.0)


def compute_truth(pop: FinitePopulation, n1: int, K_used: Optional[int] = None) -> TruthSummary:
    """Exact finite-population V_tautau, R^2 and diagnostics.

    If the outcome summary lies exactly in the covariate span the joint
    covariance is singular; ``gamma_n`` and the bound are then reported as
    ``inf`` (no usable approximation guarantee) rather than raising.
    """
    if not pop.has_outcomes:
        raise ValueError("compute_truth needs both potential outcomes")
    K = pop.K if K_used is None else K_used
    sub = pop.first_covariates(K)
    mom = compute_moments(sub, n1)
    n, n0 = pop.n, pop.n - n1
    x = sub.covariates
    y1, y0 = pop.y1, pop.y0
    tau_i = y1 - y0
    S2_1 = float(np.var(y1, ddof=1))
    S2_0 = float(np.var(y0, ddof=1))
    S2_tau = float(np.var(tau_i, ddof=1))
    S1x = _cov(x, y1[:, None]).ravel()
    S0x = _cov(x, y0[:, None]).ravel()
    Stx = S1x - S0x
    S2_1x = float(S1x @ mom.solve(S1x))
    S2_0x = float(S0x @ mom.solve(S0x))
    S2_tx = float(Stx @ mom.solve(Stx))
    Vtt = S2_1 / n1 + S2_0 / n0 - S2_tau / n
    if not Vtt > 0:
        raise ValueError("V_tautau is zero: outcomes carry no variation")
    R2 = (S2_1x / n1 + S2_0x / n0 - S2_tx / n) / Vtt
    R2 = min(max(R2, 0.0), 1.0)
    try:
        g = gamma_n(pop, n1, K)
        bound = delta_bound(g)
    except SingularCovariates:
        g = bound = math.inf
    return TruthSummary(
        tau=pop.tau,
        Vtt=Vtt,
        R2=R2,
        S2_tau=S2_tau,
        S2_tau_res=max(S2_tau - S2_tx, 0.0),
        gamma_n=g,
        delta_bound=bound,
        S2_1=S2_1,
        S2_0=S2_0,
    )


def percent_effective_sample_size(length_reduction: float) -> float:
    """Relative gain in effective sample size implied by shorter intervals: ``1/(1-r)^2 - 1``."""
    if not 0.0 <= length_reduction < 1.0:
        raise DomainError(f"length reduction must lie in [0, 1), got {length_reduction}")
    return 1.0 / (1.0 - length_reduction) ** 2 - 1.0


# --------------------------------------------------------------------------
# replications


@dataclass(frozen=True, eq=False)
class SimConfig:
    pop: FinitePopulation
    n1: int
    K_used: int
    T: int
    reps: int = 1000
    alpha: float = 0.05
    methods: Sequence[str] = METHODS
    hc_variants: Sequence[str] = HC_VARIANTS
    master_seed: int = 0
    cre_baseline: bool = True
    mc: McConfig = McConfig()
    n_jobs: int = 1

    def __post_init__(self):
        if not self.pop.has_outcomes:
            raise ValueError("simulation needs a population with y1 and y0")
        if self.reps < 100:
            raise ValueError(f"reps must be >= 100, got {self.reps}")
        if not 1 <= self.K_used <= self.pop.K:
            raise ValueError(f"K_used={self.K_used} must lie in [1, {self.pop.K}]")
        if self.T < 1:
            raise ValueError(f"T must be >= 1, got {self.T}")
        if not 0 < self.alpha < 1:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha}")
        bad = [m for m in self.methods if m not in METHODS]
        if bad:
            raise ValueError(f"unknown methods {bad}")
        object.__setattr__(self, "methods", tuple(self.methods))
        object.__setattr__(self, "hc_variants", tuple(normalize_hc(h) for h in self.hc_variants))
        check_arm(self.pop.n, self.n1)

    @property
    def designs(self) -> list[tuple[str, int]]:
        out = [("best-choice", self.T)]
        if self.cre_baseline and self.T != 1:
            out.append(("cre", 1))
        return out

    def cells(self) -> list[tuple[str, int, str, str]]:
        out = []
        for design, T in self.designs:
            for method in self.methods:
                for hc in (("none",) if method == "neyman" else self.hc_variants):
                    out.append((design, T, method, hc))
        return out


@dataclass
class SimulationReport:
    cells: list
    reps: int
    truth: TruthSummary
    config: dict = field(default_factory=dict)
    tau_hat: dict = field(default_factory=dict, repr=False)  # design -> per-replicate estimates

    def cell(self, design: str, method: str, hc: str = "none") -> dict:
        for c in self.cells:
            if c["design"] == design and c["method"] == method and c["hc"] == hc:
                return c
        raise KeyError((design, method, hc))

    def to_dict(self) -> dict:
        return {"reps": self.reps, "config": self.config, "truth": asdict(self.truth), "cells": self.cells}


CSV_COLUMNS = (
    "design", "K", "T", "method", "hc", "bias", "bias_se", "rmse", "rmse_se",
    "coverage", "coverage_se", "mean_length", "mean_length_se", "length_reduction_vs_neyman",
)


def _replicate_block(args):
    cfg, design_idx, T, r_lo, r_hi, tables = args
    pop = cfg.pop
    sub = pop.first_covariates(cfg.K_used)
    mom = compute_moments(sub, cfg.n1)
    w = standardize(sub, mom)
    x = sub.covariates
    cells = [c for c in cfg.cells() if c[1] == T and c[0] == cfg.designs[design_idx][0]]
    m = r_hi - r_lo
    tau_hat = np.empty(m)
    covered = {c: np.empty(m, dtype=bool) for c in cells}
    length = {c: np.empty(m) for c in cells}
    tau = pop.tau
    for j, r in enumerate(range(r_lo, r_hi)):
        rng = make_rng(cfg.master_seed, design_idx, r)
        mask, _ = best_choice_batch(w, cfg.n1, T, 1, rng)
        z = mask[0]
        data = ObservedData(Assignment(z, cfg.n1), np.where(z, pop.y1, pop.y0), x)
        est = diff_in_means(data)
        tau_hat[j] = est
        variances = {}
        for c in cells:
            _, _, method, hc = c
            if method == "neyman":
                res = ci_neyman(data, cfg.alpha)
            else:
                if hc not in variances:
                    variances[hc] = estimate_variance(data, mom, hc)
                if method == "wald":
                    res = ci_wald(est, variances[hc], cfg.alpha)
                else:
                    res = ci_constrained(est, variances[hc], cfg.K_used, T, cfg.alpha, cfg.mc, nu=tables[T])
            covered[c][j] = res.ci_lo <= tau <= res.ci_hi
            length[c][j] = res.length
    return design_idx, r_lo, tau_hat, covered, length


def _mean_se(a):
    a = np.asarray(a, dtype=float)
    mean = math.fsum(a) / a.size
    var = math.fsum((a - mean) ** 2) / (a.size - 1)
    return mean, math.sqrt(var / a.size)


def run_replications(cfg: SimConfig) -> SimulationReport:
    """Replay design + inference ``cfg.reps`` times and summarize per cell."""
    truth = compute_truth(cfg.pop, cfg.n1, cfg.K_used)
    tables = {}
    if "constrained" in cfg.methods:
        for _, T in cfg.designs:
            tables[T] = NuTable(1 - cfg.alpha / 2, cfg.K_used, T, cfg.mc)

    block = max(1, math.ceil(cfg.reps / max(cfg.n_jobs, 1)))
    jobs = [
        (cfg, d, T, lo, min(lo + block, cfg.reps), tables)
        for d, (_, T) in enumerate(cfg.designs)
        for lo in range(0, cfg.reps, block)
    ]
    if cfg.n_jobs > 1:
        with ProcessPoolExecutor(cfg.n_jobs) as ex:
            results = list(ex.map(_replicate_block, jobs))
    else:
        results = [_replicate_block(j) for j in jobs]

    tau_hat = {d: np.empty(cfg.reps) for d in range(len(cfg.designs))}
    covered = {c: np.empty(cfg.reps, dtype=bool) for c in cfg.cells()}
    length = {c: np.empty(cfg.reps) for c in cfg.cells()}
    for d, lo, th, cov, ln in results:
        hi = lo + th.size
        tau_hat[d][lo:hi] = th
        for c in cov:
            covered[c][lo:hi] = cov[c]
            length[c][lo:hi] = ln[c]

    design_names = [name for name, _ in cfg.designs]
    baseline = None
    ref = ("cre", 1, "neyman", "none") if "cre" in design_names else ("best-choice", cfg.T, "neyman", "none")
    if ref in length:
        baseline = math.fsum(length[ref]) / cfg.reps

    cells = []
    for c in cfg.cells():
        design, T, method, hc = c
        err = tau_hat[design_names.index(design)] - truth.tau
        bias, bias_se = _mean_se(err)
        mse, mse_se = _mean_se(err**2)
        rmse = math.sqrt(mse)
        cov = covered[c].astype(float)
        p = math.fsum(cov) / cfg.reps
        mlen, mlen_se = _mean_se(length[c])
        cells.append(
            {
                "design": design,
                "K": cfg.K_used,
                "T": T,
                "method": method,
                "hc": hc,
                "bias": bias,
                "bias_se": bias_se,
                "rmse": rmse,
                "rmse_se": mse_se / (2 * rmse) if rmse > 0 else 0.0,
                "coverage": p,
                "coverage_se": math.sqrt(p * (1 - p) / cfg.reps),
                "mean_length": mlen,
                "mean_length_se": mlen_se,
                "length_reduction_vs_neyman": (1 - mlen / baseline) if baseline else None,
            }
        )
    config = {
        "n": cfg.pop.n,
        "n1": cfg.n1,
        "K_used": cfg.K_used,
        "T": cfg.T,
        "reps": cfg.reps,
        "alpha": cfg.alpha,
        "methods": list(cfg.methods),
        "hc_variants": list(cfg.hc_variants),
        "master_seed": cfg.master_seed,
        "cre_baseline": cfg.cre_baseline,
        "mc": {"draws": cfg.mc.draws, "seed": cfg.mc.seed, "antithetic": cfg.mc.antithetic},
    }
    estimates = {name: tau_hat[d] for d, name in enumerate(design_names)}
    return SimulationReport(cells=cells, reps=cfg.reps, truth=truth, config=config, tau_hat=estimates)


def report_rows(report: SimulationReport) -> list[list]:
    return [[c[k] for k in CSV_COLUMNS] for c in report.cells]


# --------------------------------------------------------------------------
# design diagnostics


def worst_case_mse(
    covariates: np.ndarray, n1: int, T: int, reps: int, rng: np.random.Generator
) -> dict:
    """Monte Carlo worst-case bias and RMSE of the difference in means.

    With unit effects held constant, ``tau_hat - tau = a(Z) . y`` for the
    centered outcome vector ``y`` and weights ``a_i = Z_i/n1 - (1-Z_i)/n0``.
    Over unit-norm ``y`` the worst MSE is the top eigenvalue of ``E[a a^T]``
    and the worst bias is ``||E a||``.  Both are reported relative to
    complete randomization, whose worst MSE is ``n / (n1 n0 (n-1))``, so the
    baseline values are 0 and 1.  The eigenvalue of an estimated second
    moment matrix is biased upward by roughly ``sqrt(n/reps)`` in RMSE.
    """
    if reps < 10_000:
        raise ValueError(f"reps must be >= 10000, got {reps}")
    pop = FinitePopulation(covariates)
    n = pop.n
    n0 = n - n1
    w = standardize(pop, compute_moments(pop, n1))
    G = np.zeros((n, n))
    s = np.zeros(n)
    chunk = max(1, (1 << 20) // n)
    done = 0
    while done < reps:
        r = min(chunk, reps - done)
        z, _ = best_choice_batch(w, n1, T, r, rng)
        a = np.where(z, 1.0 / n1, -1.0 / n0)
        G += a.T @ a
        s += a.sum(axis=0)
        done += r
    G /= reps
    mean = s / reps
    base = n / (n1 * n0 * (n - 1))
    lam = float(np.linalg.eigvalsh(G)[-1])
    return {
        "worst_bias": float(np.linalg.norm(mean) / math.sqrt(base)),
        "worst_rmse": math.sqrt(lam / base),
        "reps": reps,
        "T": T,
        "n": n,
        "n1": n1,
        "K": pop.K,
    }


# --------------------------------------------------------------------------
# synthetic populations


def heavy_tailed_covariates(n: int, K: int, rng: np.random.Generator, df: float = 2.0) -> np.ndarray:
    """``n x K`` iid Student-t covariates (df=2 gives infinite variance in the superpopulation)."""
    return rng.standard_t(df, size=(n, K))


def linear_population(
    n: int, K: int, r2: float, rng: np.random.Generator, tau: float = 1.0, covariates=None
) -> FinitePopulation:
    """Constant-effect population whose control outcomes have finite-population R^2 exactly ``r2``.

    ``y0 = x b + e`` where ``e`` is made exactly orthogonal to (1, x) and
    scaled so the linear fit explains the share ``r2`` of the variance.
    """
    if not 0.0 <= r2 < 1.0:
        raise ValueError(f"r2 must lie in [0, 1), got {r2}")
    x = rng.standard_normal((n, K)) if covariates is None else np.asarray(covariates, dtype=float)
    design = np.column_stack([np.ones(n), x])
    q, _ = np.linalg.qr(design)
    signal = x @ rng.standard_normal(x.shape[1])
    signal = signal - signal.mean()
    noise = rng.standard_normal(n)
    noise = noise - q @ (q.T @ noise)
    if r2 == 0.0:
        y0 = noise / noise.std()
    else:
        scale = math.sqrt((1 - r2) / r2 * (signal @ signal) / (noise @ noise))
        y0 = signal + scale * noise
    return FinitePopulation(x, y1=y0 + tau, y0=y0)


def propensity_outcomes(
    covariates: np.ndarray,
    n1: int,
    designs: Sequence[tuple[int, int]],
    reps: int,
    rng: np.random.Generator,
) -> tuple[np.ndarray, np.ndarray]:
    """Adversarial outcomes from design propensities.

    Propensities are estimated for each ``(K, T)`` design (first K columns)
    and averaged; outcomes are standard normal scores of their ranks,
    ``Phi^{-1}((rank - 1/2) / n)``, shared by both arms.  Returns
    ``(outcome, average_propensity)``.
    """
    x = np.asarray(covariates, dtype=float)
    n = x.shape[0]
    acc = np.zeros(n)
    for K, T in designs:
        pop = FinitePopulation(x[:, :K])
        w = standardize(pop, compute_moments(pop, n1))
        z, _ = best_choice_batch(w, n1, T, reps, rng)
        acc += z.mean(axis=0)
    p = acc / len(designs)
    ranks = stats.rankdata(p)
    return special.ndtri((ranks - 0.5) / n), p
