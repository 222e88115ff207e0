"""Explicit-sum reference implementations used only by the tests.

Everything here is exact rational arithmetic on the (binary-exact) float
inputs, so the reference carries no rounding error even when leverages
approach one.
"""

from fractions import Fraction

import numpy as np


def _frac_array(a):
    return [Fraction(float(v)) for v in np.ravel(a)]


def _mean(a):
    return sum(a, Fraction(0)) / len(a)


def _cov(a, b):
    ma, mb = _mean(a), _mean(b)
    return sum(((a[i] - ma) * (b[i] - mb) for i in range(len(a))), Fraction(0)) / (len(a) - 1)


def _inverse(M):
    """Gauss-Jordan inverse of a small square matrix of Fractions."""
    k = len(M)
    A = [list(row) + [Fraction(int(i == j)) for j in range(k)] for i, row in enumerate(M)]
    for c in range(k):
        p = next(r for r in range(c, k) if A[r][c] != 0)
        A[c], A[p] = A[p], A[c]
        piv = A[c][c]
        A[c] = [v / piv for v in A[c]]
        for r in range(k):
            if r != c and A[r][c] != 0:
                f = A[r][c]
                A[r] = [a - f * b for a, b in zip(A[r], A[c])]
    return [row[k:] for row in A]


def _quad(v, M):
    return sum((v[i] * M[i][j] * v[j] for i in range(len(v)) for j in range(len(v))), Fraction(0))


def _ols_residuals_and_leverage(y, cols):
    rows = [[Fraction(1)] + [c[i] for c in cols] for i in range(len(y))]
    p = len(rows[0])
    XtX = [[sum((r[a] * r[b] for r in rows), Fraction(0)) for b in range(p)] for a in range(p)]
    inv = _inverse(XtX)
    Xty = [sum((r[a] * y[i] for i, r in enumerate(rows)), Fraction(0)) for a in range(p)]
    beta = [sum((inv[a][b] * Xty[b] for b in range(p)), Fraction(0)) for a in range(p)]
    e = [y[i] - sum((r[a] * beta[a] for a in range(p)), Fraction(0)) for i, r in enumerate(rows)]
    h = [_quad(r, inv) for r in rows]
    return e, h


def variance_components(z, y, x, hc):
    """All pieces of the variance and R^2 estimators, computed by exact loops."""
    z = np.asarray(z).astype(bool)
    x = np.asarray(x, dtype=float).reshape(len(z), -1)
    n, K = x.shape
    xcols = [_frac_array(x[:, k]) for k in range(K)]
    S2x_inv = _inverse([[_cov(xcols[j], xcols[k]) for k in range(K)] for j in range(K)])
    out = {}
    s_zx = {}
    for label, arm in (("1", z), ("0", ~z)):
        idx = np.flatnonzero(arm)
        ya = _frac_array(np.asarray(y)[idx])
        cols = [[c[i] for i in idx] for c in xcols]
        nz = len(ya)
        s2 = _cov(ya, ya)
        sx = [_cov(ya, c) for c in cols]
        given = _quad(sx, S2x_inv)
        if hc == "HC0":
            resid = s2 - given
        else:
            e, h = _ols_residuals_and_leverage(ya, cols)
            if hc == "HC1":
                w = [Fraction(nz, nz - K - 1)] * nz
            elif hc == "HC2":
                w = [1 / (1 - h[i]) for i in range(nz)]
            else:
                w = [1 / (1 - h[i]) ** 2 for i in range(nz)]
            resid = sum((w[i] * e[i] ** 2 for i in range(nz)), Fraction(0)) / (nz - 1)
        out[f"s2_{label}"] = s2
        out[f"s2_{label}_given_x"] = given
        out[f"s2_{label}_resid_raw"] = resid
        s_zx[label] = sx
    d = [a - b for a, b in zip(s_zx["1"], s_zx["0"])]
    out["s2_tau_given_x"] = _quad(d, S2x_inv)
    n1, n0 = int(z.sum()), int((~z).sum())
    vtt = out["s2_1"] / n1 + out["s2_0"] / n0 - out["s2_tau_given_x"] / n
    # variance floor and R^2 clipping rules of the estimator
    vtt = max(vtt, Fraction(1, 10**12) * (out["s2_1"] + out["s2_0"]))
    r2 = 1 - (max(out["s2_1_resid_raw"], 0) / n1 + max(out["s2_0_resid_raw"], 0) / n0) / vtt
    out["Vtt_hat"] = vtt
    out["R2_hat"] = min(max(r2, Fraction(0)), Fraction(1))
    return {k: float(v) for k, v in out.items()}
