"""Scalar cutoff profiles shared by the extension, height and compensation code.

All profiles are vectorized over numpy arrays and come with their first two
derivatives so that fields built from them can be differentiated analytically.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np


def smoothstep(s):
    """Quintic smoothstep ``6s^5 - 15s^4 + 10s^3`` clamped to [0, 1]."""
    s = np.clip(s, 0.0, 1.0)
    return s * s * s * (s * (6.0 * s - 15.0) + 10.0)


def smoothstep_d1(s):
    inside = (s > 0.0) & (s < 1.0)
    s = np.clip(s, 0.0, 1.0)
    return np.where(inside, 30.0 * s * s * (s - 1.0) ** 2, 0.0)


def smoothstep_d2(s):
    inside = (s > 0.0) & (s < 1.0)
    s = np.clip(s, 0.0, 1.0)
    return np.where(inside, 60.0 * s * (2.0 * s - 1.0) * (s - 1.0), 0.0)


def smoothstep_integral(s):
    """Antiderivative of the smoothstep on [0, 1], zero at s = 0."""
    s = np.clip(s, 0.0, 1.0)
    return s**4 * (s * (s - 3.0) + 2.5)


@dataclass(frozen=True)
class Cutoff:
    """Even plateau cutoff: 1 on ``|r| <= start``, 0 on ``|r| >= stop``.

    The transition is the quintic smoothstep, so the profile is C^2 with
    vanishing first and second derivatives at both ends of the ramp.
    """

    start: float = 0.5
    stop: float = 1.0

    def _ramp(self, r):
        width = self.stop - self.start
        return (np.abs(r) - self.start) / width, 1.0 / width

    def __call__(self, r):
        s, _ = self._ramp(np.asarray(r, dtype=float))
        return 1.0 - smoothstep(s)

    def d1(self, r):
        r = np.asarray(r, dtype=float)
        s, c = self._ramp(r)
        return -smoothstep_d1(s) * c * np.sign(r)

    def d2(self, r):
        r = np.asarray(r, dtype=float)
        s, c = self._ramp(r)
        return -smoothstep_d2(s) * c * c

    def integral(self, r):
        """``int_0^r`` of the profile for ``r >= 0``."""
        r = np.asarray(r, dtype=float)
        width = self.stop - self.start
        s, _ = self._ramp(r)
        ramp = np.clip(r - self.start, 0.0, width) - width * smoothstep_integral(s)
        return np.minimum(r, self.start) + ramp


# eta: 1 on [0, 1/2], 0 beyond 1 (the xi cutoff and the compensation band cutoff)
ETA = Cutoff(0.5, 1.0)
# theta: 1 on [0, 1/4], 0 beyond 1/2 (ray cutoff for heights, mollifier kernel)
THETA = Cutoff(0.25, 0.5)


@dataclass(frozen=True)
class QuadraticCutoff:
    """``zeta(r) = (1 - r^2) * eta(r)`` on ``|r| <= 1`` and 0 beyond."""

    eta: Cutoff | "Perturbed" = ETA

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        return np.where(np.abs(r) < 1.0, (1.0 - r * r) * self.eta(r), 0.0)

    def d1(self, r):
        r = np.asarray(r, dtype=float)
        val = -2.0 * r * self.eta(r) + (1.0 - r * r) * self.eta.d1(r)
        return np.where(np.abs(r) < 1.0, val, 0.0)

    def d2(self, r):
        r = np.asarray(r, dtype=float)
        val = (-2.0 * self.eta(r) - 4.0 * r * self.eta.d1(r)
               + (1.0 - r * r) * self.eta.d2(r))
        return np.where(np.abs(r) < 1.0, val, 0.0)


@dataclass(frozen=True)
class Perturbed:
    """A cutoff multiplied by ``1 + slope * r`` near the origin.

    Only used to inject a profile with ``zeta'(0) != 0`` into the property
    suite; it is not a valid cutoff for the entropy.
    """

    base: Cutoff = ETA
    slope: float = 0.1

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        return self.base(r) * (1.0 + self.slope * r)

    def d1(self, r):
        r = np.asarray(r, dtype=float)
        return self.base.d1(r) * (1.0 + self.slope * r) + self.base(r) * self.slope

    def d2(self, r):
        r = np.asarray(r, dtype=float)
        return self.base.d2(r) * (1.0 + self.slope * r) + 2.0 * self.base.d1(r) * self.slope


class Truncation:
    """Odd C^1 truncation of the identity used as the volume weight.

    ``beta(r) = r`` for ``|r| <= 1/2``, ``r - (r - 1/2)^2`` on ``[1/2, 1]``
    (the cubic Hermite interpolant to the value 3/4 with zero slope at 1
    degenerates to this quadratic), and ``3/4`` beyond.
    """

    plateau = 0.75
    second_derivative_bound = 2.0

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        a = np.abs(r)
        mid = a - (a - 0.5) ** 2
        out = np.where(a <= 0.5, a, np.where(a < 1.0, mid, self.plateau))
        return np.sign(r) * out

    def d1(self, r):
        a = np.abs(np.asarray(r, dtype=float))
        return np.where(a <= 0.5, 1.0, np.where(a < 1.0, 1.0 - 2.0 * (a - 0.5), 0.0))

    def d2(self, r):
        r = np.asarray(r, dtype=float)
        a = np.abs(r)
        return np.where((a > 0.5) & (a < 1.0), -2.0 * np.sign(r), 0.0)


BETA = Truncation()
ZETA = QuadraticCutoff(ETA)

ProfileFn = Callable[[np.ndarray], np.ndarray]
