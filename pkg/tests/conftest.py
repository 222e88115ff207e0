import itertools
import sys

import numpy as np
import pytest


def all_assignments(n, n1):
    """Every assignment with n1 treated units, as an (C(n,n1) x n) 0/1 array."""
    rows = []
    for treated in itertools.combinations(range(n), n1):
        z = np.zeros(n, dtype=int)
        z[list(treated)] = 1
        rows.append(z)
    return np.array(rows)


def mahalanobis_by_inverse(z, x):
    """M from the textbook formula with an explicit matrix inverse."""
    x = np.asarray(x, dtype=float).reshape(len(z), -1)
    n = len(z)
    n1 = int(z.sum())
    n0 = n - n1
    S = np.cov(x, rowvar=False, ddof=1).reshape(x.shape[1], x.shape[1])
    d = x[z == 1].mean(axis=0) - x[z == 0].mean(axis=0)
    return n1 * n0 / n * d @ np.linalg.inv(S) @ d


def exact_best_choice_probabilities(x, n1, T):
    """Exact law of the best-choice assignment by enumeration.

    With N equally likely assignments, the minimum of T draws equals value m
    with probability ((N - below)/N)^T - ((N - below - c)/N)^T, where c
    assignments share value m; ties are then split evenly among those c.
    """
    Z = all_assignments(len(x), n1)
    M = np.array([mahalanobis_by_inverse(z, x) for z in Z])
    N = len(Z)
    probs = np.zeros(N)
    # group values that agree to rounding noise: the enumerated M's are not bit-reproducible
    key = np.round(M, 9)
    for m in np.unique(key):
        group = key == m
        below = np.sum(key < m)
        c = group.sum()
        pm = ((N - below) / N) ** T - ((N - below - c) / N) ** T
        probs[group] = pm / c
    return Z, M, probs


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    results = getattr(module, "_RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for k in sorted(results):
            terminalreporter.write_line(results[k])
