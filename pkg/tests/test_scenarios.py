import numpy as np
import pytest

from relent.errors import PerturbationTooLarge, StepTooLarge, UnknownScenario
from relent.geometry import InterfaceCurve
from relent.phasefield import PhasePolygon, VelocityField, energy
from relent.scenarios import NAMES, advect, make_scenario, simulate
from relent.entropy import QuadratureSettings


def test_advect_polygon_rotation_is_exact_to_rk4():
    poly = PhasePolygon.regular(64)
    v = VelocityField.rotation(1.0)
    out = advect(poly, v, 0.0, 0.01)
    th = 0.01
    rot = np.array([[np.cos(th), -np.sin(th)], [np.sin(th), np.cos(th)]])
    assert np.abs(out.vertices - poly.vertices @ rot.T).max() <= 1e-12
    assert out.area == pytest.approx(poly.area, rel=1e-12)


def test_advect_curve_translation():
    c = InterfaceCurve.circle(1.0, r_c=0.5)
    out = advect(c, VelocityField.constant((1.0, 0.5)), 0.0, 0.05)
    assert out.point(np.array([0.3]))[0] == pytest.approx(c.point(np.array([0.3]))[0] + [0.05, 0.025],
                                                          abs=1e-13)


def test_advect_guard():
    with pytest.raises(StepTooLarge):
        advect(PhasePolygon.regular(16), VelocityField.rotation(10.0), 0.0, 0.02)
    with pytest.raises(TypeError):
        advect(np.zeros((3, 2)), VelocityField.rotation(1.0), 0.0, 0.01)


def test_scenario_errors():
    with pytest.raises(UnknownScenario):
        make_scenario("spiral")
    with pytest.raises(PerturbationTooLarge):
        make_scenario("perturbed_twin", {"amplitude": 0.07})


@pytest.mark.parametrize("name", NAMES)
def test_initial_states_are_consistent(name):
    scn = make_scenario(name, seed=3)
    assert scn.poly0.n_edges == 512
    lo, hi = scn.box
    assert np.all(scn.poly0.vertices > lo) and np.all(scn.poly0.vertices < hi)
    if name != "perturbed_twin":
        # exact graph twin: vertices lie on the strong interface
        assert np.abs(np.linalg.norm(scn.poly0.vertices, axis=1) - 1.0).max() <= 1e-14


def test_perturbed_twin_amplitude_and_seed():
    a = make_scenario("perturbed_twin", {"amplitude": 0.03}, seed=5)
    b = make_scenario("perturbed_twin", {"amplitude": 0.03}, seed=5)
    c = make_scenario("perturbed_twin", {"amplitude": 0.03}, seed=6)
    g = np.linalg.norm(a.poly0.vertices, axis=1) - 1.0
    assert np.abs(g).max() == pytest.approx(0.03, rel=1e-12)
    assert np.array_equal(a.poly0.vertices, b.poly0.vertices)
    assert not np.array_equal(a.poly0.vertices, c.poly0.vertices)


def test_multiplicity_arc():
    scn = make_scenario("multiplicity_twin")
    assert (scn.multiplicity == 2.0).sum() == 128
    V = scn.varifold(scn.poly0)
    assert V.total_mass == pytest.approx(scn.poly0.perimeter + scn.poly0.edge_lengths[:128].sum(),
                                         rel=1e-12)


def test_translation_moves_center():
    scn = make_scenario("translation", t1=0.5, dt=0.01)
    last = list(scn.states())[-1]
    assert last.t == pytest.approx(0.5)
    assert last.poly.vertices.mean(axis=0) == pytest.approx([0.5, 0.0], abs=1e-12)
    assert last.curve.point(np.array([0.0]))[0] == pytest.approx([1.5, 0.0], abs=1e-12)


@pytest.mark.parametrize("name,params", [("translation", {"rho_plus": 2.0}),
                                         ("rotation", {"rho_plus": 3.0, "sigma": 0.5})])
def test_rigid_energy_conserved(name, params):
    scn = make_scenario(name, params, t1=1.0, dt=1e-2)
    vals = [energy(st.poly, scn.u, scn.varifold(st.poly), st.t, box=scn.box)
            for k, st in enumerate(scn.states()) if k % 20 == 0]
    vals = np.array(vals)
    assert np.abs(vals - vals[0]).max() <= 1e-5 * vals[0]


def test_simulate_exact_twin_rotation():
    scn = make_scenario("rotation", t1=0.02, dt=1e-2)
    res = simulate(scn, QuadratureSettings(box_cells=16))
    assert len(res.reports) == 3
    for r in res.reports:
        assert r.total <= 1e-3
    assert res.max_residuals["res_transport"] <= 1e-8
    assert res.max_residuals["res_sdist"] <= 1e-5


def test_simulate_report_every_and_compensation():
    scn = make_scenario("perturbed_twin", {"mu_plus": 3.0}, seed=2, t1=0.02, dt=1e-2)
    res = simulate(scn, QuadratureSettings(box_cells=16), report_every=2, grid_n=128,
                   snapshot_every=1)
    assert [r.t for r in res.reports] == pytest.approx([0.0, 0.02])
    assert len(res.snapshots) == 2
    assert all(np.isfinite(list(r.terms.values())).all() for r in res.reports)
