import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from relent.errors import EmptySeries, OutOfRegime
from relent.gronwall import (Envelope, check_series, default_eps, delta_star,
                             envelope_ode_residual, stability_bound)


def test_known_value():
    eps = 1e-6
    env = Envelope(np.exp(-2.0) - eps, eps, 1.0)
    assert float(env(np.log(2.0))) == pytest.approx(np.exp(-0.5), abs=1e-10)


def test_start_and_limit():
    env = Envelope(1e-3, delta=0.5)
    assert float(env.squared(0.0)) == env.E0 + env.eps
    assert float(env(200.0)) == pytest.approx(1.0, abs=1e-12)
    assert env.eps == default_eps(1e-3)


def test_ode_residual_first_order():
    env = Envelope(1e-3, delta=0.5)
    r = [float(envelope_ode_residual(env, 0.3, h)) for h in (1e-4, 5e-5, 2.5e-5)]
    assert r[0] / r[1] == pytest.approx(2.0, abs=0.3)
    assert r[1] / r[2] == pytest.approx(2.0, abs=0.3)
    assert float(envelope_ode_residual(env, 0.3, 1e-6)) <= 1e-6 * float(env.rate(0.3)) * 10


def test_integral_identity():
    env = Envelope(1e-2, delta=0.7)
    tau, T = 0.2, 1.5
    integrand = lambda s: 2 * abs(np.log(env(s))) * env.squared(s) / env.delta  # noqa: E731
    val = quad(integrand, tau, T, epsabs=1e-13, epsrel=1e-12)[0]
    assert float(env.squared(T) - env.squared(tau)) == pytest.approx(val, abs=1e-8)


@given(st.floats(1e-8, 0.5), st.floats(1e-3, 1e3), st.floats(0.0, 50.0))
@settings(max_examples=50, deadline=None)
def test_envelope_increasing_and_bounded(E0, delta, t):
    env = Envelope(E0, delta=delta)
    a, b = float(env(t)), float(env(t + 0.1))
    assert 0 < a <= b <= 1.0


@given(st.floats(1e-6, 0.5), st.floats(1e-2, 1e2), st.floats(0.01, 10.0))
@settings(max_examples=50, deadline=None)
def test_envelope_nonincreasing_in_delta(E0, delta, t):
    env = Envelope(E0, delta=delta)
    assert float(env.with_delta(2 * delta)(t)) <= float(env(t)) * (1 + 1e-14)


def test_check_series_examples():
    env = Envelope(1e-3, delta=0.5)
    t = np.linspace(0, 1, 11)
    assert check_series(np.c_[t, np.zeros_like(t)], env).passed
    E = 0.5 * env.squared(t)
    E[4] = 1.01 * env.squared(t[4])
    v = check_series(np.c_[t, E], env)
    assert not v.passed and v.first_violation == 4
    assert v.first_violation_t == pytest.approx(t[4])
    assert v.max_margin == pytest.approx(0.01 * float(env.squared(t[4])))


def test_check_series_monotone_in_delta():
    E0 = 1e-3
    t = np.linspace(0, 1, 21)
    series = np.c_[t, E0 * (1 + 3 * t)]
    passes = [check_series(series, Envelope(E0, delta=d)).passed for d in np.logspace(-3, 3, 25)]
    # passing set is (0, delta*]: once failing it never passes again
    first_fail = passes.index(False)
    assert all(passes[:first_fail]) and not any(passes[first_fail:])
    d = delta_star(series, E0)
    assert 0 < d < 1e4
    assert check_series(series, Envelope(E0, delta=d)).passed
    assert not check_series(series, Envelope(E0, delta=d * 1.05)).passed


def test_delta_star_edges():
    t = np.linspace(0, 1, 5)
    assert delta_star(np.c_[t, np.full(5, 1e-3)], 1e-3) == 1e4
    # E above the envelope start at t=0: no delta helps
    assert delta_star(np.c_[t, np.full(5, 2e-3)], 1e-3) == 0.0


def test_errors():
    with pytest.raises(OutOfRegime):
        Envelope(0.999, 0.01)
    with pytest.raises(EmptySeries):
        check_series(np.empty((0, 2)), Envelope(1e-3))


@pytest.mark.parametrize("E0,C,T", [(1e-4, 2.0, 1.0), (0.3, 0.5, 3.0), (1e-10, 1.0, 0.1)])
def test_stability_bound_vs_mpmath(E0, C, T):
    mpmath.mp.dps = 40
    ref = mpmath.mpf(C) * mpmath.power(mpmath.mpf(E0), mpmath.exp(-mpmath.mpf(C) * T))
    assert stability_bound(E0, C, T) == pytest.approx(float(ref), rel=1e-12)
    assert stability_bound(0.0, C, T) == 0.0
