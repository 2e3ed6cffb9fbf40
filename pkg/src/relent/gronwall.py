"""Stability envelope ``e(t)`` and the verdict on an entropy time series."""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import EmptySeries, OutOfRegime


def default_eps(E0: float) -> float:
    return max(1e-12, 1e-3 * E0)


@dataclass(frozen=True)
class Envelope:
    """``e(t) = exp(exp(-t / delta) log(E0 + eps) / 2)``.

    It solves ``de/dt = |log e| e / delta`` with ``e(0)^2 = E0 + eps`` and
    increases to 1 when ``E0 + eps < 1``.
    """

    E0: float
    eps: float | None = None
    delta: float = 1.0

    def __post_init__(self):
        if self.eps is None:
            object.__setattr__(self, "eps", default_eps(self.E0))
        if not self.delta > 0:
            raise ValueError("delta must be positive")
        if not (0.0 < self.E0 + self.eps < 1.0):
            raise OutOfRegime(f"E0 + eps = {self.E0 + self.eps:.6g} is outside (0, 1)")

    @property
    def log0(self) -> float:
        return float(np.log(self.E0 + self.eps))

    def __call__(self, t):
        return np.exp(0.5 * np.exp(-np.asarray(t, dtype=float) / self.delta) * self.log0)

    def squared(self, t):
        f = np.exp(-np.asarray(t, dtype=float) / self.delta)
        # exact start value instead of exp(log(.)) round-off
        return np.where(f == 1.0, self.E0 + self.eps, np.exp(f * self.log0))

    def rate(self, t):
        e = self(t)
        return np.abs(np.log(e)) * e / self.delta

    def with_delta(self, delta) -> "Envelope":
        return replace(self, delta=float(delta))


def envelope(env: Envelope, t):
    return env(t)


def envelope_ode_residual(env: Envelope, t, dt, scheme="forward"):
    """``|finite-difference de/dt - |log e| e / delta|`` at ``t``."""
    if scheme == "forward":
        fd = (env(t + dt) - env(t)) / dt
    else:
        fd = (env(t + dt) - env(t - dt)) / (2.0 * dt)
    return np.abs(fd - env.rate(t))


@dataclass(frozen=True)
class Verdict:
    passed: bool
    first_violation: int | None
    first_violation_t: float | None
    max_margin: float

    def to_dict(self) -> dict:
        return {"pass": self.passed, "first_violation_t": self.first_violation_t,
                "max_margin": self.max_margin}


def check_series(series, env: Envelope) -> Verdict:
    """PASS iff ``E(t_i) <= e(t_i)^2`` at every sample.

    ``max_margin`` is ``max_i (E(t_i) - e(t_i)^2)``; it is negative on PASS.
    """
    arr = np.asarray(series, dtype=float).reshape(-1, 2)
    if arr.size == 0:
        raise EmptySeries("no samples")
    if np.any(np.diff(arr[:, 0]) < 0):
        raise ValueError("series must be sorted in time")
    margin = arr[:, 1] - env.squared(arr[:, 0])
    bad = np.nonzero(margin > 0.0)[0]
    if bad.size:
        i = int(bad[0])
        return Verdict(False, i, float(arr[i, 0]), float(margin.max()))
    return Verdict(True, None, None, float(margin.max()))


def delta_star(series, E0, eps=None, lo=1e-4, hi=1e4, rel=0.01):
    """Largest ``delta`` (to ``rel``) for which the series passes, or 0.

    ``e`` is nonincreasing in ``delta``, so the passing set is an interval
    ``(0, delta_star]`` and log-space bisection applies.
    """
    env = Envelope(E0, eps, 1.0)

    def ok(d):
        return check_series(series, env.with_delta(d)).passed

    if not ok(lo):
        return 0.0
    if ok(hi):
        return float(hi)
    a, b = np.log(lo), np.log(hi)
    while b - a > np.log1p(rel):
        m = 0.5 * (a + b)
        if ok(np.exp(m)):
            a = m
        else:
            b = m
    return float(np.exp(a))


def stability_bound(E0, C, T):
    """``C E0^{exp(-C T)}``."""
    if E0 < 0:
        raise ValueError("E0 must be nonnegative")
    if E0 == 0:
        return 0.0
    return float(C * E0 ** np.exp(-C * T))
