"""Complete randomization, Mahalanobis imbalance and best-choice selection.

Assignments are drawn with random keys: each candidate gets ``n`` iid
uniforms and its ``n1`` smallest keys are treated.  Candidates are generated
row by row from a single ``numpy.random.Generator``, so drawing ``T``
candidates in one block or in several chunks consumes the stream
identically, and ``best_choice(T=1)`` replays ``draw_cre`` exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import InvalidArm
from .population import FinitePopulation, MomentSummary, check_arm, compute_moments, standardize

# keys generated per chunk (rows * n); bounds peak memory to a few hundred MB
CHUNK_ELEMENTS = 1 << 22
M_ALL_RETENTION_LIMIT = 10**6


def make_rng(seed: int, *stream: int) -> np.random.Generator:
    """Generator for substream ``stream`` of ``seed`` (a pure function of both)."""
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=tuple(int(s) for s in stream)))


def seed_info(rng: np.random.Generator) -> dict:
    seq = getattr(rng.bit_generator, "seed_seq", None)
    if isinstance(seq, np.random.SeedSequence):
        return {"master_seed": int(seq.entropy), "stream": [int(s) for s in seq.spawn_key]}
    return {"master_seed": None, "stream": []}


@dataclass(frozen=True, eq=False)
class Assignment:
    z: np.ndarray
    n1: int

    def __post_init__(self):
        z = np.array(self.z, dtype=np.int8).ravel()
        if not np.isin(z, (0, 1)).all():
            raise ValueError("assignment must be binary")
        if int(z.sum()) != self.n1:
            raise ValueError(f"assignment has {int(z.sum())} treated units, expected {self.n1}")
        z.setflags(write=False)
        object.__setattr__(self, "z", z)

    @property
    def n(self) -> int:
        return self.z.size

    @property
    def treated(self) -> np.ndarray:
        return self.z.astype(bool)


@dataclass(frozen=True, eq=False)
class BestChoiceResult:
    chosen: Assignment
    m_min: float
    m_all: Optional[np.ndarray]
    chosen_index: int  # 0-based position among the T candidates
    tie_count: int
    T: int
    seed_info: dict = field(default_factory=dict)
    m_summary: dict = field(default_factory=dict)


def _draw_masks(rng: np.random.Generator, rows: int, n: int, n1: int) -> np.ndarray:
    keys = rng.random((rows, n))
    kth = np.partition(keys, n1 - 1, axis=1)[:, n1 - 1 : n1]
    return keys <= kth


def draw_cre(n: int, n1: int, rng: np.random.Generator) -> Assignment:
    """One completely randomized assignment with ``n1`` treated units."""
    if not 1 <= n1 <= n - 1:
        raise InvalidArm(f"n1={n1} must lie in [1, {n - 1}] for n={n}")
    return Assignment(_draw_masks(rng, 1, n, n1)[0], n1)


def mahalanobis(a: Assignment, pop: FinitePopulation, moments: MomentSummary) -> float:
    """``(n1 n0 / n) d^T S2x^{-1} d`` with ``d`` the treated-minus-control covariate means."""
    if a.n != pop.n or moments.n1 != a.n1:
        raise ValueError("assignment, population and moments disagree on n or n1")
    x = pop.covariates
    t = a.treated
    d = x[t].mean(axis=0) - x[~t].mean(axis=0)
    m = (a.n1 * (pop.n - a.n1) / pop.n) * float(d @ moments.solve(d))
    return max(m, 0.0)


def imbalance(masks: np.ndarray, w: np.ndarray, n1: int) -> np.ndarray:
    """Mahalanobis distances for stacked boolean assignments.

    ``w`` are standardized covariates (zero mean, identity covariance); then
    ``M = n/(n1 n0) * ||sum_{treated} w_i||^2``.
    """
    n = w.shape[0]
    s = masks.astype(w.dtype) @ w
    return (n / (n1 * (n - n1))) * np.einsum("ij,ij->i", s, s)


def _pick_ties(m: np.ndarray, rng: np.random.Generator):
    """Row-wise argmin of ``m`` (reps x T) with uniform tie-breaking.

    Returns (index, minimum, tie_count).  Random draws are consumed only for
    rows that actually contain ties, in row order.
    """
    mins = m.min(axis=1)
    is_min = m == mins[:, None]
    counts = is_min.sum(axis=1)
    idx = is_min.argmax(axis=1)
    tied = np.flatnonzero(counts > 1)
    if tied.size:
        picks = rng.integers(counts[tied])
        for row, k in zip(tied, picks):
            idx[row] = np.flatnonzero(is_min[row])[k]
    return idx, mins, counts


def best_choice(
    pop: FinitePopulation,
    n1: int,
    T: int,
    rng: np.random.Generator,
    moments: Optional[MomentSummary] = None,
    keep_m_all: bool = True,
) -> BestChoiceResult:
    """Draw ``T`` complete randomizations and keep the least imbalanced one.

    Exact ties in M (bitwise equality) are broken uniformly at random with
    the same generator, after all candidates have been drawn.  Set
    ``keep_m_all=False`` to retain only summary statistics of the T
    distances (intended for ``T`` above ``M_ALL_RETENTION_LIMIT``).
    """
    if T < 1:
        raise ValueError(f"T must be >= 1, got {T}")
    if moments is None:
        moments = compute_moments(pop, n1)
    check_arm(pop.n, n1)
    info = seed_info(rng)
    w = standardize(pop, moments)
    n = pop.n
    rows_per_chunk = max(1, CHUNK_ELEMENTS // n)

    m_parts = []
    best = np.inf
    tied = []  # (candidate index, mask) pairs attaining the running minimum
    count = 0
    total = 0.0
    total_sq = 0.0
    m_max = -np.inf
    done = 0
    while done < T:
        rows = min(rows_per_chunk, T - done)
        masks = _draw_masks(rng, rows, n, n1)
        m = imbalance(masks, w, n1)
        if keep_m_all:
            m_parts.append(m)
        count += rows
        total += float(m.sum())
        total_sq += float(m @ m)
        m_max = max(m_max, float(m.max()))
        cmin = float(m.min())
        if cmin < best:
            best = cmin
            tied = []
        if cmin == best:
            tied.extend((done + int(j), masks[j].copy()) for j in np.flatnonzero(m == cmin))
        done += rows

    k = int(rng.integers(len(tied))) if len(tied) > 1 else 0
    index, mask = tied[k]
    m_all = None
    summary = {
        "count": count,
        "min": best,
        "max": m_max,
        "mean": total / count,
        "sd": float(np.sqrt(max(total_sq / count - (total / count) ** 2, 0.0))),
    }
    if keep_m_all:
        m_all = np.concatenate(m_parts)
        m_all.setflags(write=False)
        qs = (0.01, 0.05, 0.25, 0.5, 0.75, 0.95, 0.99)
        summary["quantiles"] = {str(q): float(v) for q, v in zip(qs, np.quantile(m_all, qs))}
    return BestChoiceResult(
        chosen=Assignment(mask, n1),
        m_min=best,
        m_all=m_all,
        chosen_index=index,
        tie_count=len(tied),
        T=T,
        seed_info=info,
        m_summary=summary,
    )


def best_choice_batch(
    w: np.ndarray, n1: int, T: int, reps: int, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    """Run ``reps`` independent best-choice designs on standardized covariates ``w``.

    Returns the chosen assignments as a (reps x n) boolean array and the
    attained minimum distances.
    """
    n = w.shape[0]
    check_arm(n, n1)
    reps_per_chunk = max(1, CHUNK_ELEMENTS // (n * T))
    chosen = np.empty((reps, n), dtype=bool)
    m_min = np.empty(reps)
    done = 0
    while done < reps:
        r = min(reps_per_chunk, reps - done)
        if r * T * n > CHUNK_ELEMENTS and T > 1:
            # a single design does not fit in one chunk: fall back to the streaming path
            for j in range(r):
                chosen[done + j], m_min[done + j] = _stream_best(w, n1, T, rng)
            done += r
            continue
        masks = _draw_masks(rng, r * T, n, n1)
        m = imbalance(masks, w, n1).reshape(r, T)
        idx, mins, _ = _pick_ties(m, rng)
        chosen[done : done + r] = masks.reshape(r, T, n)[np.arange(r), idx]
        m_min[done : done + r] = mins
        done += r
    return chosen, m_min


def _stream_best(w, n1, T, rng):
    n = w.shape[0]
    rows_per_chunk = max(1, CHUNK_ELEMENTS // n)
    best = np.inf
    tied = []
    done = 0
    while done < T:
        rows = min(rows_per_chunk, T - done)
        masks = _draw_masks(rng, rows, n, n1)
        m = imbalance(masks, w, n1)
        cmin = float(m.min())
        if cmin < best:
            best, tied = cmin, []
        if cmin == best:
            tied.extend(masks[j].copy() for j in np.flatnonzero(m == cmin))
        done += rows
    k = int(rng.integers(len(tied))) if len(tied) > 1 else 0
    return tied[k], best


def estimate_propensities(
    pop: FinitePopulation,
    n1: int,
    T: int,
    reps: int,
    rng: np.random.Generator,
    moments: Optional[MomentSummary] = None,
) -> np.ndarray:
    """Monte Carlo treatment probability of every unit under best-choice with ``T`` tries."""
    if reps < 1000:
        raise ValueError(f"reps must be >= 1000, got {reps}")
    if moments is None:
        moments = compute_moments(pop, n1)
    chosen, _ = best_choice_batch(standardize(pop, moments), n1, T, reps, rng)
    return chosen.sum(axis=0) / reps
