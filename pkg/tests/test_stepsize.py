import math

import pytest
from hypothesis import given, strategies as st

from ssplmm.errors import DomainError, EmptyHistory, InvalidFe
from ssplmm.formulas import THIRD_ORDER_WINDOW, build_ratio_history, make_second_order, make_third_order
from ssplmm.stepsize import (
    THIRD_ORDER_RHO,
    ControllerParams,
    FeHistory,
    asymptotic_step,
    check_fe_ratio,
    check_h_bound,
    greedy_step,
    greedy_step_second,
    greedy_step_third,
    mu_n,
    nonincreasing_run_lengths,
    tau_recursion,
)

import oracles

pos = st.floats(1e-3, 1e3)


def test_params_defaults():
    p4 = ControllerParams.for_method(4, 3)
    assert (p4.rho, p4.rho_fe) == (0.6, 0.9)
    p5 = ControllerParams.for_method(5, 3)
    assert (p5.rho, p5.rho_fe) == (0.57, 0.962)
    p2 = ControllerParams.for_method(3, 2)
    assert (p2.rho, p2.rho_fe, p2.cfl_fe, p2.gamma) == (1.0, 1.0, 0.5, 0.9)
    assert THIRD_ORDER_RHO[4] == (0.6, 0.9)
    with pytest.raises(DomainError):
        ControllerParams(3, 4)
    with pytest.raises(DomainError):
        ControllerParams(3, 2, rho=0.0)


def test_mu_n():
    assert mu_n(FeHistory((1, 1, 1))) == 1
    assert mu_n([0.5, 1.5, 1.0]) == 0.5
    with pytest.raises(InvalidFe):
        mu_n([1.0, 0.0, 2.0])
    with pytest.raises(EmptyHistory):
        mu_n([])
    with pytest.raises(InvalidFe):
        FeHistory((1.0, -1.0))


def test_greedy_examples():
    assert greedy_step_second(2.0, 1.0) == pytest.approx(2 / 3)
    assert greedy_step_third(3.0, 1.0) == pytest.approx(3 / 5)
    assert greedy_step(2, 2.0, 1.0) == greedy_step_second(2.0, 1.0)
    with pytest.raises(DomainError):
        greedy_step_second(0.0, 1.0)
    with pytest.raises(DomainError):
        greedy_step_third(1.0, -1.0)
    with pytest.raises(DomainError):
        greedy_step(4, 1.0, 1.0)


def test_greedy_unbounded_mu():
    assert greedy_step_second(2.0, math.inf) == 2.0
    assert greedy_step_third(3.0, math.inf) == 1.5


@pytest.mark.parametrize("k,order,limit", [(3, 2, 0.5), (4, 2, 2 / 3), (4, 3, 1 / 3), (5, 3, 0.5)])
def test_greedy_limit_constant_mu(k, order, limit):
    h = oracles.greedy_sequence(k, order, [1.0] * 300, [0.37] * (k - 1))
    assert h[-1] == pytest.approx(limit, abs=1e-12)
    assert asymptotic_step(k, order, 1.0) == pytest.approx(limit)


@given(st.sampled_from([2, 3]), st.integers(3, 6), st.lists(pos, min_size=5, max_size=5), pos)
def test_greedy_attains_ssp_bound(order, k, hist, mu):
    if order == 3 and k not in (4, 5):
        k = 4
    prev = hist[: k - 1]
    S = sum(prev)
    h = greedy_step(order, S, mu)
    assert 0 < h < mu
    r = build_ratio_history(prev + [h])
    if order == 2:
        C = make_second_order(k, r).ssp_coeff
    else:
        f = make_third_order(k, r, warn=False)
        W = r.Omegas[k - 1]
        assert W == pytest.approx(2 + S / mu, rel=1e-12)
        C = (W - 2) / W  # the ratio implied by the greedy rule
        if W <= THIRD_ORDER_WINDOW:
            assert f.ssp_coeff == pytest.approx(C, rel=1e-12)
    assert h == pytest.approx(C * mu, rel=1e-12)


@given(
    st.sampled_from([(3, 2), (4, 2), (4, 3), (5, 3)]),
    st.lists(st.floats(0.5, 2.0), min_size=40, max_size=40),
    st.floats(0.01, 1.0),
)
def test_sandwich_monotonicity(km, mus, start):
    k, order = km
    lo, hi = min(mus), max(mus)
    starts = [start] * (k - 1)
    h = oracles.greedy_sequence(k, order, mus, starts)
    h_lo = oracles.greedy_sequence(k, order, [lo] * len(mus), starts)
    h_hi = oracles.greedy_sequence(k, order, [hi] * len(mus), starts)
    for a, b, c in zip(h_lo, h, h_hi):
        assert a <= b * (1 + 1e-12) and b <= c * (1 + 1e-12)


@given(
    st.sampled_from([(3, 2), (4, 3)]),
    st.lists(st.floats(0.5, 1.0), min_size=30, max_size=30),
    st.floats(0.05, 1.0),
)
def test_greedy_is_pointwise_largest(km, shrink, start):
    k, order = km
    starts = [start] * (k - 1)
    greedy = oracles.greedy_sequence(k, order, [1.0] * 30, starts)
    # any sequence with h_n <= greedy_step(history) stays below the greedy one
    h = list(starts)
    for s in shrink:
        h.append(s * greedy_step(order, sum(h[-(k - 1):]), 1.0))
    assert all(a <= b * (1 + 1e-12) for a, b in zip(h, greedy))


def test_fe_ratio_and_h_bound():
    assert check_fe_ratio(0.95, 1.0, 0.9)
    assert not check_fe_ratio(0.5, 1.0, 0.9)
    assert check_fe_ratio(1.0, 1.0, 0.5)
    assert check_h_bound(0.5, 1.0, 0.6)
    assert not check_h_bound(0.7, 1.0, 0.6)
    assert check_h_bound(0.6, 1.0, 0.6)


def test_tau_limits():
    assert tau_recursion((1, 1), 1.0, 200).limit == 0.5
    assert float(tau_recursion((1, 1), 1.0, 200).values[-1]) == pytest.approx(0.5, abs=1e-12)
    res = tau_recursion((0.3, 0.7), 3.0, 100)
    assert res.limit == 0.0
    with pytest.raises(DomainError):
        tau_recursion((1,), 1.0, 10)
    with pytest.raises(DomainError):
        tau_recursion((0, 0), 1.0, 10)
    with pytest.raises(DomainError):
        tau_recursion((1, 1), 0.0, 10)


def test_tau_run_lengths_example():
    res = tau_recursion((1, 1 / 200, 0.95638788642), 1.0, 1000)
    runs = nonincreasing_run_lengths(res.values)
    assert runs[-6:] == [3, 3, 3, 3, 3, 917]
    assert sum(runs) == 1000


def test_run_lengths_helper():
    assert nonincreasing_run_lengths([]) == []
    assert nonincreasing_run_lengths([3, 2, 2, 5, 1]) == [3, 2]


@given(
    st.integers(3, 6),
    st.floats(0.2, 2.5),
    st.lists(st.floats(0.0, 1.0), min_size=5, max_size=5),
)
def test_tau_converges_to_stated_limit(k, A, start):
    init = start[: k - 1]
    if sum(init) <= 0.01:
        return
    res = tau_recursion(init, A, 10_000, precision=30)
    if abs((k - 1) - A) < 0.05:
        return  # neutral case converges only algebraically
    assert res.converged_at is not None
    assert float(res.values[-1]) == pytest.approx(res.limit, abs=1e-10)
