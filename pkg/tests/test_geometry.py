import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import sheared_curve, translated_curve
from relent.errors import AmbiguousProjection, InvalidCurve, OutsideTubularNeighborhood
from relent.geometry import (FlatInterface, InterfaceCurve, check_sdist_transport, curvature_vector,
                             project, signed_distance)
from relent.phasefield import VelocityField


def dense_nearest(curve, x, n=1_000_000):
    s = 2.0 * np.pi * np.arange(n) / n
    p = curve.point(s)
    d = np.linalg.norm(p - x, axis=1)
    return d.min()


def test_signed_distance_circle_examples(unit_circle):
    assert signed_distance(unit_circle, [0.0, 0.0]) == pytest.approx(1.0, abs=1e-12)
    assert signed_distance(unit_circle, [2.0, 0.0]) == pytest.approx(-1.0, abs=1e-12)


@pytest.mark.parametrize("x", [(3.0, 0.0), (2.5, 1.0), (0.3, 0.4), (-1.0, 1.6)])
def test_signed_distance_ellipse_against_dense_oracle(ellipse, x):
    x = np.array(x)
    ref = dense_nearest(ellipse, x)
    sign = 1.0 if (x[0] / 2) ** 2 + x[1] ** 2 < 1 else -1.0
    assert signed_distance(ellipse, x) == pytest.approx(sign * ref, abs=1e-9)


def test_project_circle_point():
    curve = InterfaceCurve.circle(1.0, r_c=0.6)
    res = project(curve, [0.5, 0.0])
    np.testing.assert_allclose(res.foot, [1.0, 0.0], atol=1e-12)
    np.testing.assert_allclose(res.normal, [-1.0, 0.0], atol=1e-12)
    assert res.sdist == pytest.approx(0.5, abs=1e-12)


def test_project_center_is_ambiguous(unit_circle):
    with pytest.raises(AmbiguousProjection):
        project(unit_circle, [0.0, 0.0])


def test_project_outside_band(unit_circle):
    with pytest.raises(OutsideTubularNeighborhood):
        project(unit_circle, [1.8, 0.0])


def test_projection_gradient_matches_finite_differences(ellipse):
    x = np.array([1.5, 0.5])
    curve = InterfaceCurve.ellipse(2.0, 1.0, r_c=0.45)
    res = curve.project(x)
    h = 1e-5
    for j in range(2):
        e = np.zeros(2)
        e[j] = h
        fd = (curve.project(x + e).foot - curve.project(x - e).foot) / (2 * h)
        np.testing.assert_allclose(fd, res.grad_proj[:, j], rtol=1e-6, atol=1e-6 * np.abs(res.grad_proj).max())


def test_curvature_vector():
    for radius in (1.0, 2.0):
        c = InterfaceCurve.circle(radius, r_c=0.5)
        s = np.linspace(0, 2 * np.pi, 7)
        H = curvature_vector(c, s)
        np.testing.assert_allclose(np.linalg.norm(H, axis=1), 1.0 / radius, atol=1e-12)
        # points toward the center
        assert np.all(np.einsum("ni,ni->n", H, c.point(s)) < 0)
    # ellipse a cos s, b sin s: curvature at (a, 0) is a / b^2
    e = InterfaceCurve.ellipse(2.0, 1.0, r_c=0.25)
    np.testing.assert_allclose(curvature_vector(e, 0.0), [-2.0, 0.0], atol=1e-12)
    s = 0.7
    a, b = 2.0, 1.0
    k = a * b / (a**2 * np.sin(s) ** 2 + b**2 * np.cos(s) ** 2) ** 1.5
    assert np.linalg.norm(curvature_vector(e, s)) == pytest.approx(k, rel=1e-12)


def test_interior_negative_flips_sign():
    c = InterfaceCurve.circle(1.0, r_c=0.5, interior_positive=False)
    assert signed_distance(c, [0.8, 0.0]) == pytest.approx(-0.2, abs=1e-12)
    np.testing.assert_allclose(c.project([0.8, 0.0]).normal, [1.0, 0.0], atol=1e-12)


def test_invalid_r_c():
    with pytest.raises(InvalidCurve):
        InterfaceCurve.ellipse(2.0, 1.0, r_c=0.6)


def test_json_roundtrip(ellipse):
    c2 = InterfaceCurve.from_json(ellipse.to_json())
    np.testing.assert_array_equal(c2.coeffs, ellipse.coeffs)
    assert c2.r_c == ellipse.r_c


def test_flat_interface():
    f = FlatInterface((0.0, 0.0), (0.0, 1.0), r_c=0.5)
    b = f.project_points(np.array([[0.3, 0.2], [-1.0, -0.1]]))
    np.testing.assert_allclose(b.sdist, [0.2, -0.1])
    np.testing.assert_allclose(b.foot, [[0.3, 0.0], [-1.0, 0.0]])


@settings(max_examples=40, deadline=None)
@given(st.floats(0.0, 2 * np.pi), st.floats(-0.2, 0.2))
def test_unit_gradient_and_projection_identity(s, y):
    curve = InterfaceCurve.ellipse(2.0, 1.0, r_c=0.25)
    fr = curve.frame(np.array([s]))
    x = fr.point + y * fr.normal
    b = curve.project_points(x)
    assert b.sdist[0] == pytest.approx(y, abs=1e-10)
    h = 1e-6
    g = [(curve.project_points(x + h * e).sdist - curve.project_points(x - h * e).sdist)[0] / (2 * h)
         for e in np.eye(2)]
    assert np.hypot(*g) == pytest.approx(1.0, abs=1e-5)


def test_band_geometry_identities_1000_points(ellipse, rng):
    s = rng.uniform(0, 2 * np.pi, 1000)
    y = rng.uniform(-0.9, 0.9, 1000) * ellipse.r_c
    fr = ellipse.frame(s)
    x = fr.point + y[:, None] * fr.normal
    b = ellipse.project_points(x)
    h = 1e-6
    for j in range(2):
        e = np.zeros(2)
        e[j] = h
        up, dn = ellipse.project_points(x + e), ellipse.project_points(x - e)
        np.testing.assert_allclose((up.sdist - dn.sdist) / (2 * h), b.normal[:, j], atol=1e-5)
        np.testing.assert_allclose((up.foot - dn.foot) / (2 * h), b.grad_proj[:, :, j], atol=1e-5)


def _band(curve, rng, n=20, frac=0.45):
    s = rng.uniform(0, 2 * np.pi, n)
    y = rng.uniform(-frac, frac, n) * curve.r_c
    fr = curve.frame(s)
    return fr.point + y[:, None] * fr.normal


def test_sdist_transport_translation_and_rotation(unit_circle, rng):
    x = _band(unit_circle, rng)
    v = VelocityField.constant((1.0, 0.0))
    r = check_sdist_transport(lambda t: translated_curve(unit_circle, (1.0, 0.0), t), v, x, 0.0, 1e-4)
    assert r.max() <= 1e-6
    r = check_sdist_transport(lambda t: unit_circle, VelocityField.rotation(1.0), x, 0.0, 1e-4)
    assert r.max() <= 1e-6


def test_sdist_transport_shear_first_order(ellipse, rng):
    x = _band(ellipse, rng)
    v = VelocityField.shear(1.0)
    res = [check_sdist_transport(lambda t: sheared_curve(ellipse, 1.0, t), v, x, 0.0, dt, "forward").max()
           for dt in (1e-2, 5e-3, 2.5e-3, 1.25e-3)]
    ratios = np.array(res[:-1]) / np.array(res[1:])
    assert np.all(np.abs(ratios - 2.0) <= 0.2), ratios
