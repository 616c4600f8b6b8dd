"""Variable step-size SSP multistep formulae.

A formula for step ``n`` is a pair of coefficient vectors ``(alpha, beta)``
applied to the ``k`` previous states::

    u_n = sum_j alpha_j u_{n-k+j} + h_n beta_j f(u_{n-k+j})

The coefficients depend on the step-size ratios
``omega_j = h_{n-k+j} / h_n`` and their partial sums ``Omega_j``.
Everything in this module is a pure function of its inputs.
"""
from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DomainError, InfeasibleOrder, NonPositiveStep, OutsideOptimalWindow, SSPLMMError

__all__ = [
    "UNBOUNDED",
    "RatioHistory",
    "FormulaCoefficients",
    "ThirdOrderCertificate",
    "build_ratio_history",
    "ratio_history_from_Omegas",
    "ssp_coefficient",
    "upper_bound",
    "make_second_order",
    "make_third_order",
    "third_order_window",
    "cubic_root",
    "third_order_certificate",
    "optimal_third_order",
    "verify_order",
]

#: Upper end of the step-ratio window on which the two-term third-order
#: formula is optimal.
THIRD_ORDER_WINDOW = 2.0 * (1.0 + math.sqrt(2.0))

TIE_TOL = 1e-12


class _Unbounded:
    """Sentinel for an SSP coefficient with no finite bound.

    Compares greater than every real number and converts to ``inf`` when
    forced into float arithmetic.
    """

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "UNBOUNDED"

    __str__ = __repr__

    def __float__(self):
        return math.inf

    def __reduce__(self):
        return (_Unbounded, ())

    def __eq__(self, other):
        return other is self

    def __hash__(self):
        return hash("UNBOUNDED")

    def __lt__(self, other):
        return False

    def __le__(self, other):
        return other is self

    def __gt__(self, other):
        return other is not self

    def __ge__(self, other):
        return True


UNBOUNDED = _Unbounded()


@dataclass(frozen=True)
class RatioHistory:
    """Step-size ratios ``omega_1..omega_k`` and partial sums ``Omega_0..Omega_k``."""

    omegas: tuple
    Omegas: tuple

    @property
    def k(self) -> int:
        return len(self.omegas)

    @property
    def Omega_k(self) -> float:
        return self.Omegas[-1]

    def Delta(self, m: int) -> float:
        """``Omega_k - Omega_m``."""
        return self.Omegas[-1] - self.Omegas[m]


def build_ratio_history(recent_steps: Sequence[float]) -> RatioHistory:
    """Ratios for the step whose size is the last entry of ``recent_steps``.

    ``recent_steps`` holds ``h_{n-k+1}, ..., h_{n-1}, h_n``.
    """
    steps = [float(h) for h in recent_steps]
    if not steps:
        raise NonPositiveStep("need at least one step size")
    if any(not h > 0 for h in steps):
        raise NonPositiveStep(f"step sizes must be positive, got {steps}")
    h_n = steps[-1]
    omegas = tuple(h / h_n for h in steps[:-1]) + (1.0,)
    Omegas = [0.0]
    for w in omegas[:-1]:
        Omegas.append(Omegas[-1] + w)
    Omegas.append(Omegas[-1] + 1.0)
    return RatioHistory(omegas, tuple(Omegas))


def ratio_history_from_Omegas(Omegas: Sequence[float]) -> RatioHistory:
    """Rebuild a history from the partial sums ``(0, Omega_1, ..., Omega_k)``."""
    Om = [float(x) for x in Omegas]
    if len(Om) < 2 or Om[0] != 0.0:
        raise DomainError("Omegas must start at 0 and have length k+1 >= 2")
    omegas = tuple(b - a for a, b in zip(Om, Om[1:]))
    if any(not w > 0 for w in omegas):
        raise NonPositiveStep("Omegas must be strictly increasing")
    if abs(omegas[-1] - 1.0) > 1e-12:
        raise DomainError("Omega_k - Omega_{k-1} must equal 1")
    omegas = omegas[:-1] + (1.0,)
    return RatioHistory(omegas, tuple(Om[:-1]) + (Om[-2] + 1.0,))


def ssp_coefficient(alphas, betas):
    """SSP coefficient: largest ``r`` with ``alpha_j - r beta_j >= 0``.

    Returns 0 when any coefficient is negative and :data:`UNBOUNDED` when
    every ``beta_j`` vanishes.
    """
    alphas = [float(a) for a in alphas]
    betas = [float(b) for b in betas]
    if len(alphas) != len(betas):
        raise DomainError("alphas and betas must have equal length")
    if any(a < 0 for a in alphas) or any(b < 0 for b in betas):
        return 0.0
    ratios = [a / b for a, b in zip(alphas, betas) if b > 0]
    if not ratios:
        return UNBOUNDED
    return min(ratios)


def upper_bound(Omega_k: float, p: int) -> float:
    """Largest SSP coefficient any k-step formula of order ``p`` can reach."""
    if not Omega_k > 0:
        raise DomainError("Omega_k must be positive")
    if Omega_k <= p:
        return 0.0
    return (Omega_k - p) / (Omega_k - 1.0)


@dataclass(frozen=True)
class FormulaCoefficients:
    k: int
    order: int
    alphas: tuple
    betas: tuple
    ssp_coeff: object

    @property
    def deltas(self):
        """``alpha_j - C beta_j`` (the alphas themselves when C is unbounded)."""
        if self.ssp_coeff is UNBOUNDED:
            return self.alphas
        return tuple(a - self.ssp_coeff * b for a, b in zip(self.alphas, self.betas))

    def nonzero(self):
        """Indices ``j`` with a non-zero alpha or beta."""
        return [j for j in range(self.k) if self.alphas[j] != 0.0 or self.betas[j] != 0.0]


def _two_term(k, order, a_last, b_last, a_first, b_first, C):
    alphas = [0.0] * k
    betas = [0.0] * k
    alphas[k - 1], betas[k - 1] = a_last, b_last
    alphas[0], betas[0] = a_first, b_first
    return FormulaCoefficients(k, order, tuple(alphas), tuple(betas), C)


def make_second_order(k: int, ratios: RatioHistory) -> FormulaCoefficients:
    """Optimal second-order formula; uses only ``u_{n-1}``, ``f(u_{n-1})`` and ``u_{n-k}``."""
    if k < 2 or ratios.k != k:
        raise DomainError(f"need k >= 2 matching the ratio history (k={k}, history k={ratios.k})")
    if ratios.Omega_k <= 2.0:
        raise InfeasibleOrder(
            f"second order needs Omega_k > 2, got {ratios.Omega_k:.17g}", threshold=2.0
        )
    W = ratios.Omegas[k - 1]
    W2 = W * W
    a_last = (W2 - 1.0) / W2
    b_last = a_last * W / (W - 1.0)
    C = (ratios.Omega_k - 2.0) / (ratios.Omega_k - 1.0)
    return _two_term(k, 2, a_last, b_last, 1.0 / W2, 0.0, C)


def third_order_window(Omega_km1: float) -> bool:
    """True when the two-term third-order formula is optimal for this ``Omega_{k-1}``."""
    return 2.0 < Omega_km1 <= THIRD_ORDER_WINDOW


def make_third_order(k: int, ratios: RatioHistory, warn: bool = True) -> FormulaCoefficients:
    """Third-order formula on ``u_{n-1}`` and ``u_{n-k}`` with both derivative terms.

    Optimal for ``2 < Omega_{k-1} <= 2(1+sqrt 2)``. Above that window the
    coefficients stay valid but the SSP coefficient drops to
    ``(3W+2)/(W(W+1))``; an :class:`OutsideOptimalWindow` warning is issued
    unless ``warn`` is false.
    """
    if k < 2 or ratios.k != k:
        raise DomainError(f"need k >= 2 matching the ratio history (k={k}, history k={ratios.k})")
    W = ratios.Omegas[k - 1]
    if W <= 2.0:
        raise InfeasibleOrder(
            f"third-order two-term formula needs Omega_(k-1) > 2, got {W:.17g}", threshold=2.0
        )
    W2 = W * W
    W3 = W2 * W
    b_last = (W + 1.0) ** 2 / W2
    b_first = (W + 1.0) / W2
    a_last = (W + 1.0) ** 2 * (W - 2.0) / W3
    a_first = (3.0 * W + 2.0) / W3
    if W <= THIRD_ORDER_WINDOW:
        C = (W - 2.0) / W
    else:
        C = (3.0 * W + 2.0) / (W * (W + 1.0))
        if warn:
            warnings.warn(
                f"Omega_(k-1) = {W:.6g} exceeds 2(1+sqrt 2); formula is not optimal",
                OutsideOptimalWindow,
                stacklevel=2,
            )
    return _two_term(k, 3, a_last, b_last, a_first, b_first, C)


def _cubic(x, Dj, Dj1):
    p = Dj * Dj1
    return ((p * x - (p + Dj + Dj1)) * x + 2.0 * (Dj + Dj1 + 1.0)) * x - 6.0


def _cubic_prime(x, Dj, Dj1):
    p = Dj * Dj1
    return (3.0 * p * x - 2.0 * (p + Dj + Dj1)) * x + 2.0 * (Dj + Dj1 + 1.0)


def has_unique_root(Dj: float, Dj1: float) -> bool:
    return Dj1 * Dj1 - (Dj + 1.0) * Dj1 + 3.0 * Dj > 0.0 or Dj < 5.0 + 2.0 * math.sqrt(6.0)


def cubic_root(Dj: float, Dj1: float) -> float:
    """Real root of ``P(x) = DjDj1 x^3 - (DjDj1+Dj+Dj1) x^2 + 2(Dj+Dj1+1) x - 6``.

    Returns ``math.inf`` when the pair ``(Dj, Dj1)`` lies outside the region
    where the root is unique. Solved by bracketed bisection then a Newton
    polish kept inside the bracket.
    """
    if not (1.0 < Dj1 < Dj):
        raise DomainError(f"need 1 < Delta_(j+1) < Delta_j, got ({Dj}, {Dj1})")
    if not has_unique_root(Dj, Dj1):
        return math.inf
    # P(0) = -6 and P -> +inf, and every real root is positive.
    lo = 0.0
    hi = 3.0 / (Dj + Dj1 + 1.0)
    while _cubic(hi, Dj, Dj1) <= 0.0:
        lo = hi
        hi *= 2.0
    while hi - lo > 1e-14 * hi:
        mid = 0.5 * (lo + hi)
        if _cubic(mid, Dj, Dj1) > 0.0:
            hi = mid
        else:
            lo = mid
    x = 0.5 * (lo + hi)
    for _ in range(3):
        d = _cubic_prime(x, Dj, Dj1)
        if d <= 0.0:
            break
        x_new = x - _cubic(x, Dj, Dj1) / d
        if not (lo <= x_new <= hi):
            break
        x = x_new
    return x


@dataclass(frozen=True)
class ThirdOrderCertificate:
    """Candidate SSP coefficients for an optimal third-order formula.

    ``r_values[j]`` for ``j = 0..2k-3``; ``argmin_indices`` are all indices
    within ``1e-12`` of the minimum and ``support`` is the intersection of
    their candidate sets of non-zero coefficients (names like ``"beta_3"``).
    ``borderline`` lists the ``j`` in ``1..k-2`` whose two competing
    expressions tied within tolerance.
    """

    k: int
    r_values: tuple
    argmin_indices: tuple
    support: frozenset
    optimal_C: float
    candidate_sets: tuple = field(repr=False, default=())
    borderline: tuple = ()

    @property
    def unique(self) -> bool:
        """False when the optimal formula may belong to a one-parameter family."""
        return not any(1 <= i <= self.k - 2 and i in self.borderline for i in self.argmin_indices)


def _d(j):
    return f"delta_{j}"


def _b(j):
    return f"beta_{j}"


def third_order_certificate(k: int, ratios: RatioHistory) -> ThirdOrderCertificate:
    """Optimal third-order SSP coefficient for the given step ratios, with the
    candidate support of an optimal formula."""
    if k < 2 or ratios.k != k:
        raise DomainError(f"need k >= 2 matching the ratio history (k={k}, history k={ratios.k})")
    Om = ratios.Omegas
    w = ratios.omegas
    Ok = ratios.Omega_k
    if Ok <= 3.0:
        raise InfeasibleOrder(f"third order needs Omega_k > 3, got {Ok:.17g}", threshold=3.0)

    r = [(Ok - 3.0) / (Ok - 1.0)]
    sets = [frozenset({_d(0), _b(0), _b(k - 1)})]
    borderline = []
    for j in range(1, k - 1):
        D = Ok - Om[j]
        first = (D - 3.0) / (D - 1.0)
        second = 2.0 / w[j - 1] + 1.0 / (Ok - Om[j - 1])
        r.append(max(first, second))
        if abs(first - second) <= TIE_TOL:
            borderline.append(j)
            sets.append(frozenset({_d(j), _b(j - 1), _b(j), _b(k - 1)}))
        elif first > second:
            sets.append(frozenset({_d(j), _b(j), _b(k - 1)}))
        else:
            sets.append(frozenset({_d(j), _b(j - 1), _b(j)}))
    r.append(2.0 / w[k - 2] + 1.0 / (Ok - Om[k - 2]))
    sets.append(frozenset({_d(k - 1), _b(k - 2), _b(k - 1)}))
    for j in range(0, k - 2):
        r.append(cubic_root(Ok - Om[j], Ok - Om[j + 1]))
        sets.append(frozenset({_b(j), _b(j + 1), _b(k - 1)}))

    C = min(r)
    argmin = tuple(i for i, v in enumerate(r) if v - C <= TIE_TOL)
    support = frozenset.intersection(*(sets[i] for i in argmin))
    return ThirdOrderCertificate(
        k=k,
        r_values=tuple(r),
        argmin_indices=argmin,
        support=support,
        optimal_C=C,
        candidate_sets=tuple(sets),
        borderline=tuple(borderline),
    )


def _order_columns(name, r, Omegas, p):
    kind, j = name.split("_")
    W = Omegas[int(j)]
    col = np.empty(p + 1)
    if kind == "delta":
        for m in range(p + 1):
            col[m] = W**m
    else:
        col[0] = r
        for m in range(1, p + 1):
            col[m] = r * W**m + m * W ** (m - 1)
    return col


def _solve_support(names, r, ratios, p=3, tol=1e-10):
    A = np.column_stack([_order_columns(n, r, ratios.Omegas, p) for n in names])
    rhs = np.array([ratios.Omega_k**m for m in range(p + 1)])
    x, *_ = np.linalg.lstsq(A, rhs, rcond=None)
    resid = np.max(np.abs(A @ x - rhs))
    scale = max(1.0, float(np.max(np.abs(rhs))))
    if resid > tol * scale or np.any(x < -tol):
        return None
    return np.maximum(x, 0.0)


def optimal_third_order(k: int, ratios: RatioHistory) -> FormulaCoefficients:
    """Optimal third-order formula built from :func:`third_order_certificate`.

    Only supports of at most three coefficients are solved for; when the
    certificate reports a larger support (a one-parameter family of optimal
    formulae) the first three-element subset giving a non-negative solution
    is returned.
    """
    cert = third_order_certificate(k, ratios)
    r = cert.optimal_C
    names = sorted(cert.support)
    candidates = [names] if len(names) <= 3 else [list(c) for c in itertools.combinations(names, 3)]
    for sub in candidates:
        x = _solve_support(sub, r, ratios)
        if x is None:
            continue
        deltas = [0.0] * k
        betas = [0.0] * k
        for name, value in zip(sub, x):
            kind, j = name.split("_")
            (deltas if kind == "delta" else betas)[int(j)] = float(value)
        alphas = tuple(d + r * b for d, b in zip(deltas, betas))
        return FormulaCoefficients(k, 3, alphas, tuple(betas), r)
    raise SSPLMMError(f"no non-negative formula on support {names} (C={r:.17g})")


def verify_order(formula: FormulaCoefficients, ratios: RatioHistory, p: int) -> np.ndarray:
    """Residuals of the consistency condition and the order conditions ``m = 1..p``."""
    Om = np.asarray(ratios.Omegas[:-1], dtype=float)
    a = np.asarray(formula.alphas, dtype=float)
    b = np.asarray(formula.betas, dtype=float)
    if len(a) != len(Om):
        raise DomainError("formula and ratio history disagree on k")
    res = np.empty(p + 1)
    res[0] = a.sum() - 1.0
    for m in range(1, p + 1):
        res[m] = np.sum(Om**m * a + m * Om ** (m - 1) * b) - ratios.Omega_k**m
    return res
