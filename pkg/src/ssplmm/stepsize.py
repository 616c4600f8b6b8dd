"""Greedy SSP step-size selection and the admissibility checks on ``h_FE``."""
from __future__ import annotations

import math
from dataclasses import dataclass
from decimal import Decimal, localcontext
from fractions import Fraction
from typing import Sequence

from .errors import DomainError, EmptyHistory, InvalidFe
from .formulas import UNBOUNDED

__all__ = [
    "ControllerParams",
    "FeHistory",
    "mu_n",
    "greedy_step_second",
    "greedy_step_third",
    "greedy_step",
    "check_fe_ratio",
    "check_h_bound",
    "asymptotic_step",
    "TauRecursion",
    "tau_recursion",
    "nonincreasing_run_lengths",
]

# (rho, rho_FE) pairs under which the third-order step sizes provably stay
# inside the optimality window.
THIRD_ORDER_RHO = {4: (0.6, 0.9), 5: (0.57, 0.962)}


@dataclass(frozen=True)
class ControllerParams:
    k: int
    order: int
    rho: float = 1.0
    rho_fe: float = 1.0
    cfl_fe: float = 0.5
    gamma: float = 0.9

    def __post_init__(self):
        if self.order not in (2, 3):
            raise DomainError(f"order must be 2 or 3, got {self.order}")
        if not (0 < self.rho <= 1 and 0 < self.rho_fe <= 1 and 0 < self.gamma <= 1):
            raise DomainError("rho, rho_fe and gamma must lie in (0, 1]")
        if not self.cfl_fe > 0:
            raise DomainError("cfl_fe must be positive")

    @classmethod
    def for_method(cls, k: int, order: int, **kwargs) -> "ControllerParams":
        """Defaults for a method; third order picks up the proven ``(rho, rho_FE)`` pair."""
        if order == 3 and k in THIRD_ORDER_RHO:
            rho, rho_fe = THIRD_ORDER_RHO[k]
            kwargs.setdefault("rho", rho)
            kwargs.setdefault("rho_fe", rho_fe)
        return cls(k=k, order=order, **kwargs)


@dataclass(frozen=True)
class FeHistory:
    """The last ``h_FE(u_m)`` values, oldest first, with their step indices."""

    values: tuple
    indices: tuple = ()

    def __post_init__(self):
        if any(not (v > 0) for v in self.values):
            raise InvalidFe(f"h_FE values must be positive, got {self.values}")


def mu_n(fe) -> float:
    """Smallest forward-Euler step over the states entering the combination."""
    values = fe.values if isinstance(fe, FeHistory) else tuple(fe)
    if not values:
        raise EmptyHistory("no h_FE values recorded")
    if any(not (v > 0) for v in values):
        raise InvalidFe(f"h_FE values must be positive, got {values}")
    return min(values, key=float)


def _greedy(S, mu, scale):
    if not S > 0:
        raise DomainError(f"history sum must be positive, got {S}")
    if mu is UNBOUNDED or mu == math.inf:
        return S / scale
    if not mu > 0:
        raise DomainError(f"mu must be positive, got {mu}")
    return mu * S / (S + scale * mu)


def greedy_step_second(history_sum: float, mu: float) -> float:
    """Largest ``h_n`` with ``h_n <= C_n mu_n`` for the second-order formula.

    ``history_sum`` is ``h_{n-1} + ... + h_{n-k+1}``.
    """
    return _greedy(history_sum, mu, 1.0)


def greedy_step_third(history_sum: float, mu: float) -> float:
    """Largest ``h_n`` with ``h_n = C_n mu_n`` for the two-term third-order formula."""
    return _greedy(history_sum, mu, 2.0)


def greedy_step(order: int, history_sum: float, mu: float) -> float:
    if order == 2:
        return greedy_step_second(history_sum, mu)
    if order == 3:
        return greedy_step_third(history_sum, mu)
    raise DomainError(f"no greedy rule for order {order}")


def check_fe_ratio(fe_prev: float, fe_curr: float, rho_fe: float) -> bool:
    """``rho_FE <= h_FE(u_n) / h_FE(u_{n+1}) <= 1 / rho_FE``."""
    q = fe_prev / fe_curr
    return rho_fe <= q <= 1.0 / rho_fe


def check_h_bound(h_j: float, fe_j: float, rho: float) -> bool:
    """``h_j <= rho * h_FE(u_j)``."""
    return h_j <= rho * fe_j


def asymptotic_step(k: int, order: int, h_fe: float) -> float:
    """Limit of the greedy step sequence for constant ``h_FE``."""
    return (k - order) / (k - 1) * h_fe


@dataclass(frozen=True)
class TauRecursion:
    values: tuple
    limit: float
    converged_at: int | None

    def floats(self):
        return [float(v) for v in self.values]


def _to_decimal(x):
    if isinstance(x, Decimal):
        return +x
    if isinstance(x, Fraction):
        return Decimal(x.numerator) / Decimal(x.denominator)
    if isinstance(x, float):
        # shortest round-trip decimal keeps literal inputs like 0.95638788642 exact
        return Decimal(repr(x))
    return Decimal(x)


def tau_recursion(
    initial: Sequence,
    A: float,
    n_max: int,
    precision: int = 50,
    tol: float = 1e-10,
    window: int = 50,
) -> TauRecursion:
    """Iterate ``tau_n = S / (A + S)`` with ``S`` the sum of the previous ``k-1`` terms.

    ``k - 1 = len(initial)``. Arithmetic runs in ``precision`` significant
    decimal digits; long non-monotone transients are sensitive to rounding
    and double precision is not enough to resolve them. Returns the first
    ``n_max`` terms (starting values included), the theoretical limit and
    the index from which ``window`` consecutive terms lie within ``tol`` of
    it (``None`` if that never happens).
    """
    km1 = len(initial)
    if km1 < 2:
        raise DomainError("need k >= 3, i.e. at least two starting values")
    if not A > 0:
        raise DomainError(f"A must be positive, got {A}")
    limit = 0.0 if km1 <= A else (km1 - A) / km1
    with localcontext() as ctx:
        ctx.prec = precision
        tau = [_to_decimal(x) for x in initial]
        if any(t < 0 for t in tau) or sum(tau) <= 0:
            raise DomainError("starting values must be non-negative with positive sum")
        dA = _to_decimal(A)
        while len(tau) < n_max:
            S = sum(tau[-km1:])
            tau.append(S / (dA + S))
    converged_at = None
    run = 0
    for i, t in enumerate(tau):
        if abs(float(t) - limit) < tol:
            run += 1
            if run == window:
                converged_at = i - window + 1
                break
        else:
            run = 0
    return TauRecursion(tuple(tau), limit, converged_at)


def nonincreasing_run_lengths(seq: Sequence) -> list:
    """Lengths of the maximal consecutive non-increasing stretches of ``seq``."""
    if not seq:
        return []
    lengths = []
    run = 1
    for a, b in zip(seq, seq[1:]):
        if b <= a:
            run += 1
        else:
            lengths.append(run)
            run = 1
    lengths.append(run)
    return lengths
