import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))

from relent.geometry import InterfaceCurve  # noqa: E402


def sheared_curve(base: InterfaceCurve, rate, t):
    """Exact image of a degree-one curve under the shear flow (rate*y, 0) at time t."""
    s = 2.0 * np.pi * np.arange(64) / 64
    p = base.point(s)
    p = np.stack([p[:, 0] + rate * t * p[:, 1], p[:, 1]], axis=1)
    return InterfaceCurve.from_samples(p, base.n_modes, base.r_c, validate=False)


def translated_curve(base: InterfaceCurve, velocity, t):
    shift = (velocity[0] + 1j * velocity[1]) * t
    return base.with_coeffs(base.coeffs + np.where(base.modes == 0, shift, 0.0))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def unit_circle():
    return InterfaceCurve.circle(1.0, r_c=0.5)


@pytest.fixture
def ellipse():
    return InterfaceCurve.ellipse(2.0, 1.0, r_c=0.25)
