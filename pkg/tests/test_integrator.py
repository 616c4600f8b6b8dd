import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from ssplmm.config import RunConfig
from ssplmm.errors import DomainError, NonFiniteState, NonPositiveStep, StartupFailure
from ssplmm.formulas import build_ratio_history, make_second_order, make_third_order
from ssplmm.integrator import (
    HistoryEntry,
    ODEProblem,
    StepHistory,
    integrate,
    lmm_step,
    run_second_order,
    run_ssprk2,
    run_third_order,
    ssprk2_step,
)
from ssplmm.spatial import Advection, Grid1D, SemiDiscreteProblem, burgers_problem


def zero_field(t, u):
    return np.zeros_like(u)


def test_ssprk2_examples():
    u = np.array([1.0, -2.0])
    assert np.array_equal(ssprk2_step(u, 0.0, 0.3, zero_field), u)
    c = np.array([0.5, 2.0])
    assert np.allclose(ssprk2_step(u, 0.0, 0.3, lambda t, v: c), u + 0.3 * c)
    assert ssprk2_step(np.array([1.0]), 0.0, 0.1, lambda t, v: -v)[0] == pytest.approx(0.905, abs=1e-15)
    with pytest.raises(NonPositiveStep):
        ssprk2_step(u, 0.0, 0.0, zero_field)


def test_ssprk2_accepts_problem_objects():
    p = ODEProblem(lambda t, u: -u, [1.0])
    assert ssprk2_step(p.initial_state(), 0.0, 0.1, p)[0] == pytest.approx(0.905)


def _entries(values):
    return [HistoryEntry(np.array([v]), float(i), 1.0, np.zeros(1), 1.0) for i, v in enumerate(values)]


def test_lmm_step_zero_field_combinations():
    f32 = make_second_order(3, build_ratio_history([1, 1, 1]))
    out = lmm_step(f32, _entries([4.0, 7.0, 8.0]), 1.0)
    assert out[0] == pytest.approx(0.75 * 8.0 + 0.25 * 4.0)
    f43 = make_third_order(4, build_ratio_history([1, 1, 1, 1]))
    out = lmm_step(f43, _entries([3.0, 1.0, 2.0, 9.0]), 1.0)
    assert out[0] == pytest.approx(16 / 27 * 9.0 + 11 / 27 * 3.0)
    with pytest.raises(DomainError):
        lmm_step(f43, _entries([1.0, 2.0]), 1.0)


def test_lmm_step_accepts_pairs():
    f32 = make_second_order(3, build_ratio_history([1, 1, 1]))
    hist = [(np.array([1.0]), np.array([0.0]))] * 3
    assert lmm_step(f32, hist, 0.5)[0] == pytest.approx(1.0)


def _local_error(h):
    # u' = u seeded with exact values on a variable grid ending at 1
    steps = [0.8 * h, 1.3 * h, h]
    t = [1.0 - sum(steps)]
    for s in steps:
        t.append(t[-1] + s)
    f = make_second_order(3, build_ratio_history(steps))
    hist = [(np.array([math.exp(tj)]), np.array([math.exp(tj)])) for tj in t[:3]]
    return abs(lmm_step(f, hist, h)[0] - math.exp(t[3]))


def test_second_order_local_error_is_third_order():
    e1, e2 = _local_error(0.02), _local_error(0.01)
    assert math.log2(e1 / e2) == pytest.approx(3.0, abs=0.15)


def test_step_history_ring():
    hist = StepHistory(3)
    for i in range(5):
        hist.push(HistoryEntry(np.zeros(1), float(i), 1.0, np.zeros(1), 2.0 + i))
    assert len(hist) == 3 and hist.full
    assert hist.steps() == [1.0, 1.0]
    assert hist.mu() == 4.0
    with pytest.raises(DomainError):
        hist.push(HistoryEntry(np.zeros(1), 1.0, 1.0, np.zeros(1), 1.0))


@pytest.mark.parametrize("method", ["msv-32", "msv-42", "msv-43", "msv-53"])
def test_zero_field_stays_constant(method):
    u0 = np.array([1.0, -3.0, 0.25])
    p = ODEProblem(zero_field, u0, h_fe=0.01)
    traj = integrate(p, RunConfig(method=method, t_final=1.0))
    assert np.array_equal(traj.final_state, u0)
    assert traj.records[-1].t == pytest.approx(1.0, abs=1e-15)
    assert all(r.rejected == 0 for r in traj.lmm_records())


def _constant_speed_problem(n=64, recon="weno5"):
    return SemiDiscreteProblem(
        Grid1D(n),
        Advection(speed=lambda t: 2.0),
        reconstruction=recon,
        initial=lambda x: np.sin(2 * np.pi * x),
    )


@pytest.mark.parametrize("method,target", [("msv-32", 0.25), ("msv-43", 1 / 6), ("msv-53", 0.25)])
def test_cfl_settles_for_constant_speed(method, target):
    config = RunConfig(method=method, t_final=0.5)
    p = _constant_speed_problem(recon=config.spatial_scheme)
    traj = integrate(p, config)
    tail = [r.nu for r in traj.lmm_records() if not r.final_clip][-50:]
    assert np.allclose(tail, target, atol=1e-6)


@pytest.mark.parametrize("method", ["msv-32", "msv-52", "msv-43", "msv-53"])
def test_step_invariants_on_burgers(method):
    config = RunConfig(problem="burgers", method=method, n_cells=128, t_final=0.4)
    p = burgers_problem(128, config.spatial_scheme)
    traj = integrate(p, config)
    t_prev = 0.0
    for r in traj.records:
        assert r.t == pytest.approx(t_prev + r.h, rel=1e-14)
        assert r.nu > 0
        t_prev = r.t
    assert traj.records[-1].t == pytest.approx(0.4, abs=1e-14)
    for r in traj.lmm_records():
        assert r.nu <= config.cfl_fe + 1e-12
        assert r.h <= r.ssp_coeff * r.mu + 1e-14
        if not r.final_clip and r.rejected == 0:
            assert r.h == pytest.approx(r.ssp_coeff * r.mu, rel=1e-12)
    assert sum(r.method_tag == "starter" for r in traj.records) == config.k - 1


def test_third_order_starter_respects_bounds():
    config = RunConfig(problem="burgers", method="msv-43", n_cells=128, t_final=0.05)
    traj = run_third_order(burgers_problem(128, "weno5"), config)
    starter = [r for r in traj.records if r.method_tag == "starter"]
    # gamma * h_FE exceeds rho * h_FE, so each starting step is redone once
    assert [r.rejected for r in starter] == [1, 1, 1]
    assert all(r.nu <= 0.9 * 0.6 * 0.5 + 1e-3 for r in starter)


def test_conditions_switch():
    config = RunConfig(problem="burgers", method="msv-43", n_cells=128, t_final=0.05,
                       enforce_conditions=False)
    traj = run_third_order(burgers_problem(128, "weno5"), config)
    assert traj.rejections == 0


def test_retry_cap_raises_startup_failure():
    # h_FE collapses after the first state so the h_FE ratio test can never pass
    p = ODEProblem(lambda t, u: -u, [1.0], h_fe=lambda t, u: 1.0 if t == 0.0 else 1e-9)
    with pytest.raises(StartupFailure):
        run_third_order(p, RunConfig(method="msv-43", t_final=1.0))


def test_non_finite_state_detected():
    p = ODEProblem(lambda t, u: 1e300 * u * u, [1e10], h_fe=1.0)
    with np.errstate(over="ignore", invalid="ignore"), pytest.raises(NonFiniteState):
        run_second_order(p, RunConfig(method="msv-32", t_final=1.0))


def test_method_compatibility():
    p = ODEProblem(zero_field, [1.0])
    with pytest.raises(DomainError):
        run_third_order(p, RunConfig(method="msv-62", t_final=1.0))


def test_ssprk2_only_run():
    p = ODEProblem(lambda t, u: -u, [1.0], h_fe=0.05)
    traj = run_ssprk2(p, RunConfig(method="ssprk2-only", t_final=1.0))
    assert traj.final_state[0] == pytest.approx(math.exp(-1.0), rel=1e-3)
    assert all(r.method_tag == "starter" for r in traj.records)
    assert traj.records[-1].final_clip


def test_runs_are_deterministic():
    config = RunConfig(problem="burgers", method="msv-43", n_cells=64, t_final=0.2)
    a = integrate(burgers_problem(64, "weno5"), config)
    b = integrate(burgers_problem(64, "weno5"), config)
    assert np.array_equal(a.final_state, b.final_state)
    assert np.array_equal(a.steps, b.steps)


def test_second_order_global_convergence_on_ode():
    # u' = -u with h_FE = H: error ratio under halving H should be ~4
    errs = []
    for H in (0.02, 0.01):
        p = ODEProblem(lambda t, u: -u, [1.0], h_fe=H)
        traj = integrate(p, RunConfig(method="msv-32", t_final=1.0, h1=H))
        errs.append(abs(traj.final_state[0] - math.exp(-1.0)))
    assert math.log2(errs[0] / errs[1]) >= 2 - 0.15


@given(
    st.sampled_from([(3, 2), (4, 2), (4, 3), (5, 3)]),
    st.lists(st.floats(-10, 10), min_size=5, max_size=5),
    st.lists(st.floats(0.3, 3.0), min_size=30, max_size=30),
)
def test_zero_stability_with_varying_formulas(km, start, steps):
    k, order = km
    hist = [(np.array([v]), np.zeros(1)) for v in start[:k]]
    bound = max(abs(v) for v in start[:k])
    h = list(steps[: k - 1])
    for s in steps[k - 1 :]:
        h_n = s
        if order == 2:
            h_n = min(h_n, sum(h[-(k - 1):]) - 1e-9)  # keeps Omega_k > 2
        else:
            h_n = min(h_n, sum(h[-(k - 1):]) / 2.0 - 1e-9)  # keeps Omega_(k-1) > 2
        ratios = build_ratio_history(h[-(k - 1):] + [h_n])
        f = make_second_order(k, ratios) if order == 2 else make_third_order(k, ratios, warn=False)
        u = lmm_step(f, hist[-k:], h_n)
        assert abs(u[0]) <= bound * (1 + 1e-15)
        hist.append((u, np.zeros(1)))
        h.append(h_n)
