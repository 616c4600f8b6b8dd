"""Independent reference computations used only by the tests.

Nothing here calls into the package's formula code. The optimal SSP
coefficient is found by bisection on ``r`` with a feasibility test that
enumerates basic solutions of the order conditions written in
``(delta, beta)`` variables, where ``alpha = delta + r beta``.
"""
from __future__ import annotations

import itertools
import math

import numpy as np


def omegas_from_steps(steps):
    h_n = steps[-1]
    Om = [0.0]
    for h in steps[:-1]:
        Om.append(Om[-1] + h / h_n)
    Om.append(Om[-1] + 1.0)
    return np.array(Om)


def order_matrix(Omegas, r, p=3):
    """Columns for ``delta_0..delta_{k-1}`` then ``beta_0..beta_{k-1}``.

    Row ``m`` asks the formula to integrate ``t^m`` exactly when time is
    measured in units of ``h_n`` from ``t_{n-k}``.
    """
    Om = np.asarray(Omegas[:-1], dtype=float)
    k = Om.size
    A = np.zeros((p + 1, 2 * k))
    for m in range(p + 1):
        powm = Om**m
        dpow = m * Om ** (m - 1) if m > 0 else np.zeros(k)
        A[m, :k] = powm
        A[m, k:] = r * powm + dpow
    b = np.array([Omegas[-1] ** m for m in range(p + 1)], dtype=float)
    return A, b


def feasible_by_enumeration(Omegas, r, p=3, tol=1e-11):
    """True if some basic solution of the order conditions is non-negative.

    A non-empty polyhedron ``{x >= 0 : A x = b}`` with ``rank A = p+1`` has
    a vertex supported on ``p+1`` linearly independent columns, so checking
    every such column subset decides feasibility.
    """
    A, b = order_matrix(Omegas, r, p)
    n = A.shape[1]
    subsets = np.array(list(itertools.combinations(range(n), p + 1)))
    M = A[:, subsets].transpose(1, 0, 2)  # (n_subsets, p+1, p+1)
    det = np.linalg.det(M)
    ok = np.abs(det) > 1e-13
    if not ok.any():
        return False
    x = np.linalg.solve(M[ok], np.broadcast_to(b, (int(ok.sum()), p + 1))[..., None])[..., 0]
    scale = np.maximum(1.0, np.abs(x).max(axis=1))
    return bool(np.any(np.all(x >= -tol * scale[:, None], axis=1)))


def feasible_by_linprog(Omegas, r, p=3):
    from scipy.optimize import linprog

    A, b = order_matrix(Omegas, r, p)
    res = linprog(np.zeros(A.shape[1]), A_eq=A, b_eq=b, bounds=(0, None), method="highs")
    return res.status == 0


def optimal_ssp_by_bisection(Omegas, p=3, tol=1e-11, feasible=feasible_by_enumeration):
    """Largest ``r`` for which a non-negative formula of order ``p`` exists."""
    Ok = Omegas[-1]
    if Ok <= p:
        return 0.0
    lo, hi = 0.0, 1.0
    if not feasible(Omegas, lo, p):
        return 0.0
    while feasible(Omegas, hi, p):
        hi *= 2.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if feasible(Omegas, mid, p):
            lo = mid
        else:
            hi = mid
    return lo


def bisect_root(f, lo, hi, tol=1e-15):
    flo = f(lo)
    for _ in range(400):
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if (fm < 0) == (flo < 0):
            lo, flo = mid, fm
        else:
            hi = mid
        if hi - lo <= tol * max(1.0, abs(mid)):
            break
    return 0.5 * (lo + hi)


def cubic_by_bisection(Dj, Dj1):
    def P(x):
        return Dj * Dj1 * x**3 - (Dj * Dj1 + Dj + Dj1) * x**2 + 2 * (Dj + Dj1 + 1) * x - 6

    hi = 1.0
    while P(hi) <= 0:
        hi *= 2.0
    return bisect_root(P, 0.0, hi)


def greedy_sequence(k, order, mus, start):
    """Greedy step sizes with ``mu_n`` given per step; starts are ``k-1`` values."""
    scale = 1.0 if order == 2 else 2.0
    h = list(start)
    for mu in mus:
        S = sum(h[-(k - 1):])
        h.append(mu * S / (S + scale * mu))
    return h


def advection_exact(x, t):
    shift = 2.0 * t - 3.0 / (4.0 * math.pi) * (math.cos(2.0 * math.pi * t) - 1.0)
    return np.sin(2.0 * np.pi * (np.asarray(x) - shift))
