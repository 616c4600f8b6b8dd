"""Variable step-size SSP time stepping.

A run starts with ``k - 1`` steps of the two-stage SSP Runge-Kutta method,
then switches to the variable-coefficient multistep formula whose step size
is chosen greedily from the forward-Euler limits ``h_FE`` of the stored
states. Problems expose ``evaluate(t, u) -> (f, h_FE)``, ``initial_state()``
and optionally ``total_variation(u)``.
"""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .config import RunConfig
from .errors import DomainError, NonFiniteState, NonPositiveStep, StartupFailure
from .formulas import (
    FormulaCoefficients,
    build_ratio_history,
    make_second_order,
    make_third_order,
)
from .stepsize import ControllerParams, check_fe_ratio, check_h_bound, greedy_step

__all__ = [
    "HistoryEntry",
    "StepHistory",
    "StepRecord",
    "Trajectory",
    "ODEProblem",
    "ssprk2_step",
    "lmm_step",
    "run_second_order",
    "run_third_order",
    "run_ssprk2",
    "integrate",
]

C0 = 1.0  # SSP coefficient of the starting method


@dataclass
class HistoryEntry:
    u: np.ndarray
    t: float
    h: float | None  # step that produced this state; None for the initial data
    f: np.ndarray
    h_fe: float


class StepHistory:
    """Ring of the last ``k`` states with their stored right-hand sides."""

    def __init__(self, k: int):
        self.k = k
        self._ring: deque = deque(maxlen=k)

    def push(self, entry: HistoryEntry):
        if self._ring:
            last = self._ring[-1]
            if not entry.t > last.t:
                raise DomainError("history times must increase")
        self._ring.append(entry)

    def __len__(self):
        return len(self._ring)

    def __getitem__(self, i) -> HistoryEntry:
        return self._ring[i]

    def __iter__(self):
        return iter(self._ring)

    @property
    def full(self) -> bool:
        return len(self._ring) == self.k

    @property
    def last(self) -> HistoryEntry:
        return self._ring[-1]

    def steps(self) -> list:
        """Steps between consecutive stored states, oldest first."""
        return [e.h for e in list(self._ring)[1:]]

    def fe_values(self) -> list:
        return [e.h_fe for e in self._ring]

    def mu(self) -> float:
        return min(self.fe_values())


@dataclass(frozen=True)
class StepRecord:
    n: int
    t: float
    h: float
    nu: float
    tv: float | None
    rejected: int
    method_tag: str  # "starter" or "lmm"
    ssp_coeff: float | None = None
    mu: float | None = None
    final_clip: bool = False


@dataclass
class Trajectory:
    records: list
    final_state: np.ndarray
    t0: float
    t_final: float
    k: int | None
    order: int
    tv0: float | None = None
    meta: dict = field(default_factory=dict)

    @property
    def steps(self) -> np.ndarray:
        return np.array([r.h for r in self.records])

    @property
    def times(self) -> np.ndarray:
        return np.array([r.t for r in self.records])

    @property
    def cfl(self) -> np.ndarray:
        return np.array([r.nu for r in self.records])

    @property
    def tvs(self) -> np.ndarray:
        return np.array([np.nan if r.tv is None else r.tv for r in self.records])

    @property
    def rejections(self) -> int:
        return sum(r.rejected for r in self.records)

    def lmm_records(self) -> list:
        return [r for r in self.records if r.method_tag == "lmm"]


class ODEProblem:
    """Wrap a plain right-hand side ``f(t, u)`` and a forward-Euler limit.

    ``h_fe`` is either a positive constant or a callable ``h_fe(t, u)``.
    """

    def __init__(self, f: Callable, u0, h_fe=1.0, tv: Callable | None = None, name="ode"):
        self.f = f
        self.u0 = np.atleast_1d(np.asarray(u0, dtype=float))
        self._h_fe = h_fe
        self._tv = tv
        self.name = name

    def initial_state(self):
        return self.u0.copy()

    def evaluate(self, t, u):
        fe = self._h_fe(t, u) if callable(self._h_fe) else self._h_fe
        return np.asarray(self.f(t, u), dtype=float), fe

    def total_variation(self, u):
        return None if self._tv is None else self._tv(u)


def _evaluate(problem, t, u):
    if hasattr(problem, "evaluate"):
        f, fe = problem.evaluate(t, u)
        return f, float(fe)
    return np.asarray(problem(t, u), dtype=float), math.inf


def _stage_rk2(u, t, h, f0, problem):
    u1 = u + h * f0
    f1, fe1 = _evaluate(problem, t + h, u1)
    return 0.5 * u + 0.5 * (u1 + h * f1), fe1


def ssprk2_step(u, t: float, h: float, problem):
    """One step of the two-stage second-order SSP Runge-Kutta method.

    ``problem`` is either an object with ``evaluate(t, u) -> (f, h_FE)`` or a
    callable ``f(t, u)``.
    """
    if not h > 0:
        raise NonPositiveStep(f"step must be positive, got {h}")
    u = np.asarray(u, dtype=float)
    f0, _ = _evaluate(problem, t, u)
    return _stage_rk2(u, t, h, f0, problem)[0]


def lmm_step(formula: FormulaCoefficients, history, h_n: float, problem=None):
    """``sum_j alpha_j u_{n-k+j} + h_n beta_j f_{n-k+j}`` from stored evaluations.

    ``history`` holds the ``k`` most recent states, oldest first, as
    :class:`HistoryEntry` objects or ``(u, f)`` pairs. ``problem`` is not
    needed because every right-hand side is already stored.
    """
    if not h_n > 0:
        raise NonPositiveStep(f"step must be positive, got {h_n}")
    entries = list(history)
    if len(entries) != formula.k:
        raise DomainError(f"formula needs {formula.k} states, history has {len(entries)}")
    pairs = [(e.u, e.f) if isinstance(e, HistoryEntry) else e for e in entries]
    # written about u_{n-1} using sum(alpha) = 1, so constant data stays bit-exact
    base = np.asarray(pairs[-1][0], dtype=float)
    out = base.copy()
    for j, (a, b) in enumerate(zip(formula.alphas, formula.betas)):
        u, f = pairs[j]
        if a != 0.0 and j != len(pairs) - 1:
            out += a * (np.asarray(u, dtype=float) - base)
        if b != 0.0:
            out += (h_n * b) * np.asarray(f, dtype=float)
    return out


class _Run:
    """Shared bookkeeping for one integration run."""

    def __init__(self, problem, config: RunConfig, k, order):
        self.problem = problem
        self.config = config
        self.k = k
        self.order = order
        self.records = []
        self.tv_fn = getattr(problem, "total_variation", None) if config.record_tv else None
        self.T = float(config.t_final)
        self.t0 = float(config.t0)
        self.eps = 1e-12 * max(1.0, abs(self.T))

    def tv(self, u):
        return None if self.tv_fn is None else self.tv_fn(u)

    def clip(self, t, h):
        """Shorten ``h`` so the step lands exactly on the final time."""
        if t + h >= self.T - self.eps:
            return self.T - t, True
        return h, False

    def done(self, t):
        return t >= self.T - self.eps

    def check_finite(self, u, t):
        if not np.all(np.isfinite(u)):
            raise NonFiniteState(f"state became non-finite at t={t}")

    def give_up(self, n, rejected):
        if rejected > self.config.retry_cap:
            raise StartupFailure(f"step {n} rejected {rejected} times")

    def record(self, **kw):
        self.records.append(StepRecord(**kw))

    def trajectory(self, u, tv0):
        return Trajectory(
            self.records,
            u,
            self.t0,
            self.T,
            self.k,
            self.order,
            tv0=tv0,
            meta={"method": self.config.method, "problem": getattr(self.problem, "name", "")},
        )


def _run_multistep(problem, config: RunConfig, order: int) -> Trajectory:
    k = config.k
    if order == 2 and not (k is not None and k >= 3):
        raise DomainError(f"second-order runs need k >= 3, got {k}")
    if order == 3 and k not in (4, 5):
        raise DomainError(f"third-order runs need k in {{4, 5}}, got {k}")
    overrides = {n: getattr(config, n) for n in ("rho", "rho_fe") if getattr(config, n) is not None}
    params = ControllerParams.for_method(k, order, gamma=config.gamma, cfl_fe=config.cfl_fe, **overrides)
    enforce = order == 3 and config.enforce_conditions
    cfl, gamma = params.cfl_fe, params.gamma
    run = _Run(problem, config, k, order)

    u = np.asarray(problem.initial_state(), dtype=float)
    t = run.t0
    f, fe = _evaluate(problem, t, u)
    hist = StepHistory(k)
    hist.push(HistoryEntry(u, t, None, f, fe))
    tv0 = run.tv(u)

    # starting procedure: k - 1 steps of SSP RK2
    h = min(config.h1, gamma * C0 * fe)
    n = 0
    while n < k - 1 and not run.done(t):
        n += 1
        prev = hist.last
        rejected = 0
        while True:
            h_try, clipped = run.clip(t, h)
            u_new, fe_stage = _stage_rk2(prev.u, t, h_try, prev.f, problem)
            run.check_finite(u_new, t + h_try)
            f_new, fe_new = _evaluate(problem, t + h_try, u_new)
            nu = cfl * h_try / min(prev.h_fe, fe_stage)
            if enforce:
                fe_ok = check_fe_ratio(prev.h_fe, fe_new, params.rho_fe)
                if not fe_ok or not check_h_bound(h_try, fe_new, params.rho):
                    rejected += 1
                    run.give_up(n, rejected)
                    h = h_try / 2 if not fe_ok else gamma * C0 * params.rho * fe_new
                    continue
            if nu > C0 * cfl:
                rejected += 1
                run.give_up(n, rejected)
                h = gamma * C0 * fe_new
                continue
            break
        t = t + h_try
        hist.push(HistoryEntry(u_new, t, h_try, f_new, fe_new))
        run.record(n=n, t=t, h=h_try, nu=nu, tv=run.tv(u_new), rejected=rejected,
                   method_tag="starter", final_clip=clipped)
        h = gamma * C0 * fe_new

    if not run.done(t):
        h = greedy_step(order, sum(hist.steps()), hist.mu())

    # multistep phase
    build = make_second_order if order == 2 else (lambda kk, r: make_third_order(kk, r, warn=False))
    while not run.done(t):
        n += 1
        rejected = 0
        prior = hist.steps()
        mu = hist.mu()
        while True:
            h_try, clipped = run.clip(t, h)
            formula = build(k, build_ratio_history(prior + [h_try]))
            u_new = lmm_step(formula, hist, h_try)
            run.check_finite(u_new, t + h_try)
            f_new, fe_new = _evaluate(problem, t + h_try, u_new)
            if enforce and not check_fe_ratio(hist.last.h_fe, fe_new, params.rho_fe):
                rejected += 1
                run.give_up(n, rejected)
                h = h_try / 2
                continue
            break
        t = t + h_try
        hist.push(HistoryEntry(u_new, t, h_try, f_new, fe_new))
        run.record(n=n, t=t, h=h_try, nu=cfl * h_try / mu, tv=run.tv(u_new), rejected=rejected,
                   method_tag="lmm", ssp_coeff=float(formula.ssp_coeff), mu=mu, final_clip=clipped)
        h = greedy_step(order, sum(hist.steps()), hist.mu())

    return run.trajectory(hist.last.u, tv0)


def run_second_order(problem, config: RunConfig) -> Trajectory:
    """SSP RK2 start followed by the optimal second-order ``k``-step formula."""
    return _run_multistep(problem, config, 2)


def run_third_order(problem, config: RunConfig) -> Trajectory:
    """As :func:`run_second_order` with the two-term third-order formula and the
    ``h_FE`` admissibility checks (unless ``enforce_conditions`` is off)."""
    return _run_multistep(problem, config, 3)


def run_ssprk2(problem, config: RunConfig) -> Trajectory:
    """Two-stage SSP RK2 alone with ``h_n = gamma C_0 h_FE(u_{n-1})``."""
    run = _Run(problem, config, None, 2)
    cfl, gamma = config.cfl_fe, config.gamma
    u = np.asarray(problem.initial_state(), dtype=float)
    t = run.t0
    f, fe = _evaluate(problem, t, u)
    tv0 = run.tv(u)
    h = min(config.h1, gamma * C0 * fe)
    n = 0
    while not run.done(t):
        n += 1
        rejected = 0
        while True:
            h_try, clipped = run.clip(t, h)
            u_new, fe_stage = _stage_rk2(u, t, h_try, f, problem)
            run.check_finite(u_new, t + h_try)
            f_new, fe_new = _evaluate(problem, t + h_try, u_new)
            nu = cfl * h_try / min(fe, fe_stage)
            if nu > C0 * cfl:
                rejected += 1
                run.give_up(n, rejected)
                h = gamma * C0 * fe_new
                continue
            break
        t += h_try
        u, f, fe = u_new, f_new, fe_new
        run.record(n=n, t=t, h=h_try, nu=nu, tv=run.tv(u), rejected=rejected,
                   method_tag="starter", final_clip=clipped)
        h = gamma * C0 * fe
    return run.trajectory(u, tv0)


def integrate(problem, config: RunConfig) -> Trajectory:
    """Dispatch on ``config.method``."""
    if config.k is None:
        return run_ssprk2(problem, config)
    if config.order == 2:
        return run_second_order(problem, config)
    return run_third_order(problem, config)
