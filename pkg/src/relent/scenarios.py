"""Manufactured strong solutions, weak twins and time stepping."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .entropy import EntropyReport, QuadratureSettings, StrongState, WeakState, evaluate
from .errors import PerturbationTooLarge, StepTooLarge, UnknownScenario
from .extension import XiField, xi_dt_residual
from .geometry import InterfaceCurve, check_sdist_transport
from .phasefield import (PhasePolygon, Physics, ScalarField, VelocityField, lift_varifold,
                         transport_residual)

NAMES = ("translation", "rotation", "shear", "perturbed_twin", "multiplicity_twin")

DEFAULTS = {
    "radius": 1.0,
    "r_c": 0.5,
    "n_vertices": 512,
    "velocity": [1.0, 0.0],
    "omega": 1.0,
    "rate": 0.5,
    "amplitude": 0.02,
    "modes": [2, 6],
    "n_vortices": 3,
    "vortex_width": 0.3,
    "vortex_strength": 2e-4,
    "arc": [0.0, 0.5 * np.pi],
    "multiplicity": 2.0,
    "rho_plus": 1.0,
    "rho_minus": 1.0,
    "mu_plus": 1.0,
    "mu_minus": 1.0,
    "sigma": 1.0,
    "mollify_scale": None,
}


def rk4_points(p, v, t, dt):
    k1 = v(p, t)
    k2 = v(p + 0.5 * dt * k1, t + 0.5 * dt)
    k3 = v(p + 0.5 * dt * k2, t + 0.5 * dt)
    k4 = v(p + dt * k3, t + dt)
    return p + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _guard(v, p, t, dt):
    j = v.grad(p, t)
    g = float(np.max(np.linalg.norm(j, ord=2, axis=(1, 2))))
    if dt * g > 0.1:
        raise StepTooLarge(f"dt * |grad v| = {dt * g:.3g} > 0.1")


def advect(obj, v, t, dt, check=True):
    """Advance a polygon (RK4 per vertex) or a curve (RK4 + Fourier re-fit)."""
    if isinstance(obj, PhasePolygon):
        if check:
            _guard(v, obj.vertices, t, dt)
        return obj.map(lambda r: rk4_points(r, v, t, dt))
    if isinstance(obj, InterfaceCurve):
        m = 4 * obj.coeffs.size
        s = 2.0 * np.pi * np.arange(m) / m
        p = obj.point(s)
        if check:
            _guard(v, p, t, dt)
        moved = rk4_points(p, v, t, dt)
        spec = np.fft.fft(moved[:, 0] + 1j * moved[:, 1]) / m
        k = obj.modes
        return obj.with_coeffs(spec[k % m])
    raise TypeError(f"cannot advect {type(obj).__name__}")


@dataclass
class State:
    t: float
    curve: InterfaceCurve
    poly: PhasePolygon


@dataclass
class Scenario:
    name: str
    params: dict
    seed: int
    curve0: InterfaceCurve
    v: VelocityField
    poly0: PhasePolygon
    u: VelocityField
    multiplicity: np.ndarray
    box: tuple
    t0: float = 0.0
    t1: float = 1.0
    dt: float = 1e-3

    @property
    def physics(self) -> Physics:
        return self.v.physics

    def varifold(self, poly):
        return lift_varifold(poly, self.multiplicity)

    def weak(self, state: State) -> WeakState:
        return WeakState(state.poly, self.u, self.varifold(state.poly))

    def strong(self, state: State) -> StrongState:
        return StrongState(state.curve, self.v)

    def states(self):
        """Yield the states at ``t0, t0 + dt, ..., t1``."""
        n = int(round((self.t1 - self.t0) / self.dt))
        st = State(self.t0, self.curve0, self.poly0)
        yield st
        for i in range(n):
            t = self.t0 + i * self.dt
            st = State(self.t0 + (i + 1) * self.dt, advect(st.curve, self.v, t, self.dt),
                       advect(st.poly, self.u, t, self.dt))
            yield st


def _physics(p):
    return Physics(p["rho_plus"], p["rho_minus"], p["mu_plus"], p["mu_minus"], p["sigma"])


def _graph_polygon(curve, g, n):
    s = 2.0 * np.pi * np.arange(n) / n
    fr = curve.frame(s)
    return PhasePolygon.from_vertices(fr.point + g[:, None] * fr.normal)


def make_scenario(name, params=None, seed=0, t0=0.0, t1=1.0, dt=1e-3, tol=None) -> Scenario:
    """Build one of the named scenarios; unknown params are ignored."""
    if name not in NAMES:
        raise UnknownScenario(f"unknown scenario {name!r}; expected one of {NAMES}")
    p = dict(DEFAULTS)
    p.update(params or {})
    phys = _physics(p)
    rng = np.random.default_rng(seed)
    radius, rc, n = float(p["radius"]), float(p["r_c"]), int(p["n_vertices"])
    if name == "translation":
        v = VelocityField.constant(p["velocity"], physics=phys)
    elif name == "shear":
        v = VelocityField.shear(p["rate"], physics=phys)
    else:
        v = VelocityField.rotation(p["omega"], physics=phys)
    curve = InterfaceCurve.circle(radius, r_c=rc, **({"tol": tol} if tol is not None else {}))
    g = np.zeros(n)
    u = v
    if name == "perturbed_twin":
        a = float(p["amplitude"])
        if a > rc / 8.0:
            raise PerturbationTooLarge(f"amplitude {a} exceeds r_c / 8 = {rc / 8.0}")
        s = 2.0 * np.pi * np.arange(n) / n
        lo, hi = p["modes"]
        prof = np.zeros(n)
        for k in range(int(lo), int(hi) + 1):
            c = rng.normal(size=2) / k
            prof += c[0] * np.cos(k * s) + c[1] * np.sin(k * s)
        g = a * prof / np.max(np.abs(prof))
        for _ in range(int(p["n_vortices"])):
            ang = rng.uniform(0.0, 2.0 * np.pi)
            r = radius + rng.uniform(-0.5, 0.5) * rc
            strength = float(p["vortex_strength"]) * rng.choice([-1.0, 1.0])
            u = u + VelocityField.gaussian_vortex((r * np.cos(ang), r * np.sin(ang)),
                                                  p["vortex_width"], strength)
        u = u.with_physics(phys)
    poly = _graph_polygon(curve, g, n)
    mult = np.ones(poly.n_edges)
    if name == "multiplicity_twin":
        a0, a1 = p["arc"]
        mid = 0.5 * (poly.edges[0] + poly.edges[1])
        ang = np.mod(np.arctan2(mid[:, 1], mid[:, 0]), 2.0 * np.pi)
        mult[(ang >= a0) & (ang < a1)] = float(p["multiplicity"])
    # analysis box fixed over the trajectory so rigid motions conserve energy
    reach = radius + 3.0 * rc
    if name == "translation":
        shift = np.asarray(p["velocity"], dtype=float) * (t1 - t0)
        lo = np.minimum(0.0, shift) - reach
        hi = np.maximum(0.0, shift) + reach
    elif name == "shear":
        ext = abs(p["rate"]) * (t1 - t0) * reach
        lo = np.array([-reach - ext, -reach])
        hi = np.array([reach + ext, reach])
    else:
        lo, hi = np.array([-reach, -reach]), np.array([reach, reach])
    return Scenario(name, p, seed, curve, v, poly, u, mult, (lo, hi), t0, t1, dt)


# ---------------------------------------------------------------------------
# running


def _test_function():
    c = np.array([0.6, 0.3])

    def value(x, t):
        r = np.atleast_2d(x) - c
        return np.exp(-(r**2).sum(1))

    def grad(x, t):
        r = np.atleast_2d(x) - c
        return -2.0 * r * value(x, t)[:, None]

    return ScalarField(value, grad, lambda x, t: np.zeros(len(np.atleast_2d(x))))


@dataclass
class RunResult:
    reports: list = field(default_factory=list)
    max_residuals: dict = field(default_factory=dict)
    monitored: dict = field(default_factory=dict)
    snapshots: list = field(default_factory=list)


def _band_points(curve, rng, k=10):
    s = rng.uniform(0.0, 2.0 * np.pi, k)
    y = rng.uniform(-0.5, 0.5, k) * curve.r_c
    fr = curve.frame(s)
    return fr.point + y[:, None] * fr.normal


def compensation_for(scn: Scenario, state: State, grid_n):
    """Compensation field for a state, or ``None`` for equal viscosities."""
    from .compensation import compensation_field, make_grid
    from .heights import height_field, mollify

    phys = scn.physics
    if phys.mu_plus == phys.mu_minus:
        return None
    rc = state.curve.r_c
    hf = height_field(state.poly, state.curve, 4096)
    e = scn.params.get("mollify_scale") or 0.25 * rc
    m = mollify(hf, e)
    grid = make_grid(scn.curve0, grid_n, center=0.5 * (scn.box[0] + scn.box[1]),
                     side=float(np.max(scn.box[1] - scn.box[0])))
    return compensation_field(scn.v, state.curve, m, grid, state.t)


def simulate(scn: Scenario, settings: QuadratureSettings | None = None, report_every=1,
             grid_n=256, residuals=True, snapshot_every=0, xi_profile=None) -> RunResult:
    """Step the scenario and evaluate the full report every ``report_every`` steps."""
    settings = settings or QuadratureSettings(box=scn.box)
    if settings.box is None:
        settings = QuadratureSettings(**{**settings.__dict__, "box": scn.box})
    rng = np.random.default_rng(scn.seed + 1)
    phi = _test_function()
    out = RunResult()
    maxres = {"res_transport": 0.0, "res_sdist": 0.0, "res_xi": 0.0}
    prev = None
    prev_w = None
    for i, st in enumerate(scn.states()):
        res = {"res_transport": 0.0, "res_sdist": 0.0, "res_xi": 0.0}
        if residuals and prev is not None:
            t0 = prev.t
            base = prev

            def poly_at(tt, base=base, t0=t0):
                return base.poly if tt == t0 else advect(base.poly, scn.u, t0, tt - t0, check=False)

            def curve_at(tt, base=base, t0=t0, cur=st):
                if tt == t0:
                    return base.curve
                if tt == cur.t:
                    return cur.curve
                return advect(base.curve, scn.v, t0, tt - t0, check=False)

            res["res_transport"] = transport_residual(poly_at, scn.u, phi, t0, st.t, n_time=2,
                                                      area_order=(6, 2))
            # central differences about the step midpoint
            mid, half = 0.5 * (t0 + st.t), 0.5 * (st.t - t0)
            x = _band_points(prev.curve, rng)
            res["res_sdist"] = float(check_sdist_transport(curve_at, scn.v, x, mid, half).max())
            prof = {} if xi_profile is None else {"zeta": xi_profile}
            res["res_xi"] = float(xi_dt_residual(lambda tt: XiField(curve_at(tt), **prof),
                                                 scn.v, x, mid, half).max())
            for k in maxres:
                maxres[k] = max(maxres[k], res[k])
        prev = st
        if i % report_every:
            continue
        w = compensation_for(scn, st, grid_n)
        w_dt = None
        if w is not None and prev_w is not None:
            from .compensation import CompensationField
            w_dt = CompensationField(w.grid, (w.values - prev_w[1].values) / (st.t - prev_w[0]))
        if w is not None:
            prev_w = (st.t, w)
        rep = evaluate(scn.weak(st), scn.strong(st), w=w, w_dt=w_dt, t=st.t, settings=settings)
        rep.residuals = res
        out.reports.append(rep)
        if snapshot_every and w is not None and (i // report_every) % snapshot_every == 0:
            out.snapshots.append(w)
    out.max_residuals = maxres
    return out
