"""Runtime property suite and the monitored-constant sweep."""
from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .compensation import (compensation_field, gradient_structure_check, leray, make_grid,
                           normal_derivative_check, spectral_divergence)
from .entropy import QuadratureSettings, StrongState, WeakState, relative_entropy, term_budget
from .extension import XiField, beta_transport_residual, coercivity_checks, xi_dt_residual
from .geometry import FlatInterface, InterfaceCurve, check_sdist_transport
from .gronwall import Envelope, envelope_ode_residual
from .heights import height_field, height_l2_ratio, mollify
from .phasefield import PhasePolygon, Physics, VelocityField, compatibility_residual, lift_varifold
from .profiles import ZETA
from .quadrature import tube_rule


@dataclass
class CheckResult:
    name: str
    module: str
    passed: bool
    value: float
    tol: float
    seconds: float = 0.0

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        return f"{tag} {self.module}.{self.name}: {self.value:.3e} (tol {self.tol:.1e}, {self.seconds:.2f}s)"


_REGISTRY = []


def check(module):
    def wrap(fn):
        _REGISTRY.append((module, fn.__name__, fn))
        return fn
    return wrap


def modules():
    return sorted({m for m, _, _ in _REGISTRY})


def _rand_band(curve, rng, n, frac=0.9):
    s = rng.uniform(0.0, 2.0 * np.pi, n)
    y = rng.uniform(-frac, frac, n) * curve.r_c
    fr = curve.frame(s)
    return fr.point + y[:, None] * fr.normal


def _unit(rng, n):
    a = rng.uniform(0.0, 2.0 * np.pi, n)
    return np.stack([np.cos(a), np.sin(a)], axis=1)


# ---------------------------------------------------------------------------
# geometry


@check("geometry")
def unit_gradient(ctx):
    curve = InterfaceCurve.ellipse(2.0, 1.0, r_c=0.25)
    x = _rand_band(curve, ctx["rng"], 1000)
    h = 1e-6
    err = 0.0
    b = curve.project_points(x)
    for j in range(2):
        e = np.zeros(2)
        e[j] = h
        fd_s = (curve.project_points(x + e).sdist - curve.project_points(x - e).sdist) / (2 * h)
        fd_p = (curve.project_points(x + e).foot - curve.project_points(x - e).foot) / (2 * h)
        err = max(err, float(np.abs(fd_s - b.normal[:, j]).max()))
        err = max(err, float(np.abs(fd_p - b.grad_proj[:, :, j]).max()))
    return err, 1e-5


# ---------------------------------------------------------------------------
# extension


@check("extension")
def coercivity(ctx):
    rng = ctx["rng"]
    curve = InterfaceCurve.ellipse(2.0, 1.0, r_c=0.25)
    n = 100_000
    lo, hi = np.array([-2.6, -1.6]), np.array([2.6, 1.6])
    x = lo + (hi - lo) * rng.uniform(size=(n, 2))
    # include points very close to the interface
    x[: n // 4] = _rand_band(curve, rng, n // 4, frac=0.05)
    res = coercivity_checks(XiField(curve, ctx["zeta"]), _unit(rng, n), x)
    bad = sum(int((~v).sum()) for k, v in res.items() if k != "weight")
    return float(bad), 0.0


@check("extension")
def evolution_residuals(ctx):
    rng = ctx["rng"]
    c0 = InterfaceCurve.circle(1.0, r_c=0.5)
    x = _rand_band(c0, rng, 200, frac=0.45)
    worst = 0.0
    cases = [(VelocityField.constant((1.0, 0.5)),
              lambda t: c0.with_coeffs(c0.coeffs + np.where(c0.modes == 0, t * (1 + 0.5j), 0))),
             (VelocityField.rotation(1.0), lambda t: c0)]
    for v, curve_at in cases:
        worst = max(worst, float(check_sdist_transport(curve_at, v, x, 0.0, 1e-4).max()))
        worst = max(worst, float(xi_dt_residual(lambda t: XiField(curve_at(t), ctx["zeta"]),
                                                v, x, 0.0, 1e-4).max()))
        worst = max(worst, float(beta_transport_residual(curve_at, v, x, 0.0, 1e-4).max()))
    return worst, 1e-5


# ---------------------------------------------------------------------------
# phasefield


@check("phasefield")
def varifold_compatibility(ctx):
    poly = PhasePolygon.regular(64, 1.0)
    V = lift_varifold(poly, np.where(np.arange(64) < 16, 2.0, 1.0))

    def psi(x):
        return np.sin(x[:, 0]) * x[:, 1] + np.cos(x[:, 1])

    return compatibility_residual(V, poly, psi), 1e-10


@check("phasefield")
def perimeter(ctx):
    poly = PhasePolygon.regular(4096, 1.0)
    exact = 2.0 * 4096 * np.sin(np.pi / 4096)
    return abs(poly.perimeter - exact), 1e-12


# ---------------------------------------------------------------------------
# heights


@check("heights")
def shifted_disk_heights(ctx):
    curve = InterfaceCurve.circle(1.0, r_c=0.5)
    n = 512
    err = 0.0
    for d in (0.04, 0.02, 0.01):
        hf = height_field(PhasePolygon.regular(n, 1.0 - d), curve, n)
        err = max(err, float(np.abs(hf.h_plus - d).max()), float(np.abs(hf.h_minus).max()))
    return err, 1e-12


@check("heights")
def mollifier_constants(ctx):
    curve = InterfaceCurve.ellipse(2.0, 1.0, r_c=0.25)
    hf = height_field(PhasePolygon.regular(8, 0.5), curve, 2048)
    object.__setattr__(hf, "h_plus", np.full(2048, 0.03))
    object.__setattr__(hf, "h_minus", np.full(2048, 0.01))
    m = mollify(hf, 0.1)
    return float(max(np.abs(m.h_plus - 0.03).max(), np.abs(m.h_minus - 0.01).max())), 1e-14


# ---------------------------------------------------------------------------
# compensation


@check("compensation")
def leray_projection(ctx):
    curve = InterfaceCurve.circle(1.0, r_c=0.5)
    grid = make_grid(curve, 128)
    x = grid.nodes()
    f = np.stack([np.sin(x[:, 0]) * np.cos(2 * x[:, 1]), np.exp(-(x**2).sum(1))], axis=0)
    f = f.reshape(2, grid.n, grid.n)
    p = leray(grid, f)
    div = np.abs(spectral_divergence(grid, p)).max() / np.abs(f).max()
    idem = np.abs(leray(grid, p) - p).max()
    shrink = float(np.linalg.norm(p) > np.linalg.norm(f) * (1 + 1e-12))
    return float(max(div, idem, shrink)), 1e-10


@check("compensation")
def flat_shear_jump(ctx):
    ph = Physics(mu_plus=3.0, mu_minus=1.0)
    flat = FlatInterface((0.0, 0.0), (0.0, 1.0), r_c=0.5)
    v = VelocityField.two_sided(VelocityField.shear(0.7), VelocityField.shear(2.1),
                                lambda x, t: x[:, 1] > 0, physics=ph)
    x = np.stack([ctx["rng"].uniform(-1, 1, 50), ctx["rng"].uniform(0.001, 0.01, 50)], axis=1)
    return normal_derivative_check(v, flat, 0.02, x), 1e-6


# ---------------------------------------------------------------------------
# entropy


@check("entropy")
def exact_twin(ctx):
    curve = InterfaceCurve.circle(1.0, r_c=0.5)
    v = VelocityField.rotation(1.0)
    poly = PhasePolygon.regular(512, 1.0)
    rep = term_budget(WeakState(poly, v, lift_varifold(poly)), StrongState(curve, v),
                      settings=QuadratureSettings(box_cells=24))
    parts = max(rep.e_tilt, rep.e_kinetic, rep.e_weightvol, rep.e_multiplicity)
    return float(parts), 1e-3


@check("entropy")
def normal_control(ctx):
    curve = InterfaceCurve.circle(1.0, r_c=0.5)
    v = VelocityField.rotation(1.0)
    s = np.linspace(0.0, 2.0 * np.pi, 256, endpoint=False)
    r = 1.0 + 0.02 * np.sin(3 * s)
    poly = PhasePolygon.from_vertices(np.stack([r * np.cos(s), r * np.sin(s)], axis=1))
    rep = relative_entropy(WeakState(poly, v, lift_varifold(poly)), StrongState(curve, v),
                           settings=QuadratureSettings(box_cells=24))
    return float(max(0.0, rep.diagnostics["normal_error"] - rep.total)), 1e-10


# ---------------------------------------------------------------------------
# gronwall


@check("gronwall")
def envelope_first_order(ctx):
    env = Envelope(1e-3, delta=0.5)
    r1 = float(envelope_ode_residual(env, 0.3, 1e-4))
    r2 = float(envelope_ode_residual(env, 0.3, 5e-5))
    return abs(r1 / r2 - 2.0), 0.3


@check("gronwall")
def envelope_start(ctx):
    env = Envelope(1e-3, delta=0.5)
    return abs(float(env.squared(0.0)) - (env.E0 + env.eps)), 0.0


# ---------------------------------------------------------------------------


def run_checks(name_filter=None, zeta=None, seed=0):
    """Run the registered properties; ``name_filter`` matches module or check names."""
    ctx = {"rng": np.random.default_rng(seed), "zeta": zeta or ZETA}
    out = []
    for module, name, fn in _REGISTRY:
        if name_filter and name_filter not in (module, name):
            continue
        t = time.perf_counter()
        value, tol = fn(ctx)
        out.append(CheckResult(name, module, bool(value <= tol), float(value), tol,
                               time.perf_counter() - t))
    return out


def monitored_sweep(deltas=(0.04, 0.02, 0.01), n=4096, grid_n=512, e=0.2, rate=1.0):
    """Monitored constants of the height, w and grad-w bounds on shifted disks.

    The weak phase is the concentric disk of radius ``1 - delta`` and the
    strong flow is extensional with a viscosity jump.
    """
    ph = Physics(mu_plus=3.0, mu_minus=1.0)
    curve = InterfaceCurve.circle(1.0, r_c=0.5)
    v = VelocityField.extensional(rate, physics=ph)
    rows = []
    for d in deltas:
        poly = PhasePolygon.regular(n, 1.0 - d)
        hf = height_field(poly, curve, n)
        tube = tube_rule(curve, poly)
        m = mollify(hf, e)
        w = compensation_field(v, curve, m, make_grid(curve, grid_n))
        g = gradient_structure_check(w, v, curve, m)
        rows.append({"delta": d, "height": height_l2_ratio(hf, tube)["ratio"],
                     "w": g["w_ratio"], "grad_w": g["ratio"]})
    return rows


def spread(rows, key):
    vals = np.array([r[key] for r in rows])
    return float(vals.max() / vals.min())
