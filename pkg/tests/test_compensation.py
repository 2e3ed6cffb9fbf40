import json
import time

import numpy as np
import pytest

from relent.compensation import (Grid, build_w_raw, compensation_field, gradient_structure_check,
                                 leray, make_grid, normal_derivative_check, solenoidal_correct,
                                 spectral_divergence, spectral_gradient, stress_jump_W, w_raw_points)
from relent.errors import BandOverflow, GridTooCoarse
from relent.geometry import FlatInterface, InterfaceCurve
from relent.heights import height_field, mollify
from relent.phasefield import PhasePolygon, Physics, VelocityField

MU = Physics(mu_plus=3.0, mu_minus=1.0)
GAMMA = 0.7


@pytest.fixture
def flat():
    return FlatInterface((0.0, 0.0), (0.0, 1.0), r_c=0.5)


def flat_shear(physics=MU):
    return VelocityField.shear(GAMMA, physics=physics)


def test_W_vanishes_for_equal_viscosities_and_rigid_motion(unit_circle, rng):
    a = rng.uniform(0, 2 * np.pi, 20)
    x = 0.9 * np.c_[np.cos(a), np.sin(a)]
    v = VelocityField.extensional(1.0, physics=Physics(mu_plus=2.0, mu_minus=2.0))
    assert not np.any(stress_jump_W(v, unit_circle, x))
    v = VelocityField.rotation(1.0, physics=MU)
    np.testing.assert_allclose(stress_jump_W(v, unit_circle, x), 0.0, atol=1e-15)


def test_W_flat_shear_closed_form(flat):
    W = stress_jump_W(flat_shear(), flat, [0.3, 0.1])
    ref = ((MU.mu_plus - MU.mu_minus) * GAMMA / MU.mu_minus, 0.0)
    np.testing.assert_allclose(W, ref, atol=1e-14)


def test_w_raw_zero_heights(flat, rng):
    x = np.c_[rng.uniform(-1, 1, 50), rng.uniform(-0.2, 0.2, 50)]
    assert not np.any(w_raw_points(flat_shear(), flat, 0.0, x))


def test_w_raw_flat_shear_constant_height(flat, rng):
    h = 0.05
    y = rng.uniform(0.0, 0.12, 200)  # inside the plateau of the band cutoff
    x = np.c_[rng.uniform(-1, 1, 200), y]
    w = w_raw_points(flat_shear(), flat, h, x)
    W = (MU.mu_plus - MU.mu_minus) * GAMMA / MU.mu_minus
    np.testing.assert_allclose(w[:, 0], W * np.minimum(y, h), atol=1e-14)
    np.testing.assert_allclose(w[:, 1], 0.0, atol=1e-14)


def test_w_raw_bounded_by_heights(unit_circle, rng):
    v = VelocityField.extensional(1.0, physics=MU)
    h = lambda s, side: 0.02 + 0.01 * np.sin(3 * s) * side  # noqa: E731
    n = 10_000
    s = rng.uniform(0, 2 * np.pi, n)
    y = rng.uniform(-0.25, 0.25, n)
    fr = unit_circle.frame(s)
    x = fr.point + y[:, None] * fr.normal
    w = np.linalg.norm(w_raw_points(v, unit_circle, h, x), axis=1)
    yy = np.linspace(-0.25, 0.25, 101)
    wsup = max(np.linalg.norm(stress_jump_W(v, unit_circle, fr.point + t * fr.normal), axis=1).max()
               for t in yy)
    bound = wsup * h(s, np.sign(y))
    assert np.all(w <= bound * (1 + 1e-8) + 1e-15)


def test_band_overflow(flat):
    with pytest.raises(BandOverflow):
        w_raw_points(flat_shear(), flat, 0.3, np.array([[0.0, 0.1]]))


def test_grid_too_coarse():
    with pytest.raises(GridTooCoarse):
        make_grid(InterfaceCurve.circle(1.0, r_c=0.1), 32)


def test_normal_derivative_flat_shear(flat, rng):
    x = np.c_[rng.uniform(-1, 1, 100), rng.uniform(0.001, 0.049, 100)]
    assert normal_derivative_check(flat_shear(), flat, 0.05, x) <= 1e-8
    xm = np.c_[rng.uniform(-1, 1, 100), -rng.uniform(0.001, 0.049, 100)]
    assert normal_derivative_check(flat_shear(), flat, 0.05, xm) <= 1e-8


def test_normal_derivative_on_grid_flat_shear(flat):
    # grid differences of the sampled raw field reproduce W inside the
    # graph region up to the grid step
    n = 256
    grid = Grid(np.array([-2.0, -2.0]), 4.0, n)
    h = 0.1
    w = build_w_raw(flat_shear(), flat, h, grid)
    dy = np.gradient(w[0], grid.h, axis=1)  # fields are indexed [component, ix, iy]
    ys = grid.axis(1)
    W = (MU.mu_plus - MU.mu_minus) * GAMMA / MU.mu_minus
    inside = (ys > 2 * grid.h) & (ys < h - 2 * grid.h)
    np.testing.assert_allclose(dy[:, inside], W, atol=grid.h)


def test_leray_examples(unit_circle, rng):
    grid = make_grid(unit_circle, 128)
    X, Y = grid.nodes().T.reshape(2, grid.n, grid.n)
    k = 2 * np.pi / grid.side
    phi = np.sin(k * X) * np.cos(2 * k * Y)
    grad = spectral_gradient(grid, np.stack([phi, phi]))[0]
    assert np.abs(leray(grid, grad)).max() <= 1e-12
    psi = np.cos(3 * k * X + 1.0) * np.sin(k * Y)
    gpsi = spectral_gradient(grid, np.stack([psi, psi]))[0]
    curl = np.stack([gpsi[1], -gpsi[0]])
    np.testing.assert_allclose(leray(grid, curl), curl, atol=1e-10)
    f = rng.normal(size=(2, grid.n, grid.n))
    p = leray(grid, f)
    np.testing.assert_allclose(leray(grid, p), p, atol=1e-12)
    assert np.linalg.norm(p) <= np.linalg.norm(f)


def test_compensation_field_circle_512(unit_circle):
    t0 = time.perf_counter()
    v = VelocityField.extensional(1.0, physics=MU)
    poly = PhasePolygon.regular(4096, 0.98)
    m = mollify(height_field(poly, unit_circle, 4096), 0.2)
    w = compensation_field(v, unit_circle, m, n=512)
    assert time.perf_counter() - t0 < 60
    assert w.max_divergence() <= 1e-10 * np.abs(w.values).max()
    assert w.l2_norm() <= w.l2_norm("raw")
    np.testing.assert_allclose(leray(w.grid, w.values), w.values, atol=1e-12 * np.abs(w.values).max())
    assert np.abs(spectral_divergence(w.grid, w.values)).max() <= 1e-10 * np.abs(w.values).max()


def test_equal_viscosities_give_zero_field(unit_circle):
    v = VelocityField.extensional(1.0, physics=Physics(mu_plus=1.0, mu_minus=1.0))
    m = mollify(height_field(PhasePolygon.regular(1024, 0.98), unit_circle, 1024), 0.2)
    w = compensation_field(v, unit_circle, m, n=128)
    assert w.is_zero()
    rep = gradient_structure_check(w, v, unit_circle, m)
    assert rep["deviation_sq"] == 0.0


def test_field_interpolation_and_export(tmp_path, unit_circle):
    grid = make_grid(unit_circle, 128)
    X, Y = grid.nodes().T.reshape(2, grid.n, grid.n)
    k = 2 * np.pi / grid.side
    # divergence-free, so the correction leaves it unchanged
    vals = np.stack([np.sin(k * (Y - grid.lo[1])), np.cos(k * (X - grid.lo[0]))])
    w = solenoidal_correct(grid, vals)
    x = np.array([[0.13, -0.4], [1.1, 0.7]])
    ref = np.c_[np.sin(k * (x[:, 1] - grid.lo[1])), np.cos(k * (x[:, 0] - grid.lo[0]))]
    np.testing.assert_allclose(w(x), ref, atol=1e-5)
    g = w.grad(x)
    np.testing.assert_allclose(g[:, 0, 1], k * np.cos(k * (x[:, 1] - grid.lo[1])), atol=1e-4)
    np.testing.assert_allclose(g[:, 0, 0], 0.0, atol=1e-10)
    stem = tmp_path / "w"
    w.export(str(stem))
    data = np.fromfile(f"{stem}.bin", dtype="<f8").reshape(2, 128, 128)
    np.testing.assert_array_equal(data, w.values)
    head = json.loads((tmp_path / "w.json").read_text())
    assert head["N"] == 128 and len(head["box"]) == 4 and "t" in head
