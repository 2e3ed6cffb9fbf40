"""Relative entropy between a polygonal weak phase and a smooth strong one.

Every quantity is an instantaneous value at time ``t``: the entropy parts,
the dissipation rate and the time integrands of the ``R_*`` and ``A_*``
terms. Integrals use three backbones:

* the perimeter measure of the weak phase and the varifold atoms,
* the tube rule around the strong interface for integrands carrying
  ``chi_u - chi_v`` or gradients of ``beta`` and ``xi``,
* a volume rule (box plus polygon, or the compensation grid) for integrands
  weighted by ``rho(chi_u)`` or ``mu(chi_u)``.
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field, replace

import numpy as np
import shapely

from .errors import IncompatibleVarifold, QuadratureNotConverged
from .extension import BetaWeight, XiField, normal_velocity_data
from .geometry import ProjectionBatch
from .phasefield import PhasePolygon, VarifoldMeasure, VelocityField, perimeter_measure
from .profiles import BETA
from .quadrature import box_rule, polygon_rule, tube_rule

ENTROPY_PARTS = ("e_tilt", "e_kinetic", "e_weightvol", "e_multiplicity")
TERMS = ("R_surTen", "R_dt", "R_visc", "R_adv", "R_weightVol",
         "A_visc", "A_dt", "A_adv", "A_surTen", "A_weightVol")
CSV_COLUMNS = ("t", "E_total", "E_tilt", "E_kinetic", "E_weightvol", "E_multiplicity",
               "envelope_sq", "diss") + TERMS + ("res_transport", "res_sdist", "res_xi")


@dataclass(frozen=True)
class WeakState:
    poly: PhasePolygon
    u: VelocityField
    varifold: VarifoldMeasure


@dataclass(frozen=True)
class StrongState:
    curve: object
    v: VelocityField


@dataclass(frozen=True)
class QuadratureSettings:
    n_rays: int = 1024
    tube_order: int = 4
    box_cells: int = 48
    box_order: int = 3
    area_order: tuple = (10, 3)
    box: tuple | None = None
    box_pad: float | None = None  # defaults to 3 r_c
    check_convergence: bool = False
    rel_tol: float = 1e-3
    abs_floor: float = 1e-6

    def refined(self) -> "QuadratureSettings":
        return replace(self, n_rays=2 * self.n_rays, box_cells=2 * self.box_cells,
                       area_order=(2 * self.area_order[0], self.area_order[1] + 1),
                       check_convergence=False)


@dataclass
class EntropyReport:
    t: float
    e_tilt: float
    e_kinetic: float
    e_weightvol: float
    e_multiplicity: float
    terms: dict = field(default_factory=dict)
    dissipation: float = 0.0
    residuals: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)

    @property
    def total(self) -> float:
        return self.e_tilt + self.e_kinetic + self.e_weightvol + self.e_multiplicity

    def row(self, envelope_sq=float("nan")) -> dict:
        out = {"t": self.t, "E_total": self.total, "E_tilt": self.e_tilt,
               "E_kinetic": self.e_kinetic, "E_weightvol": self.e_weightvol,
               "E_multiplicity": self.e_multiplicity, "envelope_sq": envelope_sq,
               "diss": self.dissipation}
        for name in TERMS:
            out[name] = self.terms.get(name, float("nan"))
        for name in ("res_transport", "res_sdist", "res_xi"):
            out[name] = self.residuals.get(name, float("nan"))
        return out

    def to_csv_row(self, envelope_sq=float("nan")) -> str:
        buf = io.StringIO()
        row = self.row(envelope_sq)
        csv.writer(buf, lineterminator="\n").writerow([format_float(row[c]) for c in CSV_COLUMNS])
        return buf.getvalue()

    def to_json(self) -> str:
        d = {"t": self.t, "total": self.total, "dissipation": self.dissipation,
             "terms": self.terms, "residuals": self.residuals}
        for name in ENTROPY_PARTS:
            d[name] = getattr(self, name)
        return json.dumps(d, sort_keys=True)


def format_float(x) -> str:
    return repr(float(x))


def csv_header() -> str:
    return ",".join(CSV_COLUMNS) + "\n"


# ---------------------------------------------------------------------------
# helpers


def _dot(a, b):
    return np.einsum("ni,ni->n", a, b)


def _mv(m, a):
    return np.einsum("nij,nj->ni", m, a)


def _sym(j):
    return 0.5 * (j + np.swapaxes(j, 1, 2))


def _ddot(a, b):
    return np.einsum("nij,nij->n", a, b)


def tube_batch(tr) -> ProjectionBatch:
    fr = tr.frame
    r = tr.ray
    return ProjectionBatch(tr.points, fr.param[r], fr.point[r], tr.y, fr.normal[r],
                           fr.tangent[r], fr.curvature[r], fr.dcurvature[r])


def check_compatibility(pm, varifold: VarifoldMeasure, tol=1e-10):
    if len(pm.weights) != len(varifold.site_weight):
        raise IncompatibleVarifold("varifold sites do not match the perimeter measure")
    first = np.stack([np.bincount(varifold.site, weights=varifold.masses * varifold.directions[:, k],
                                  minlength=len(pm.weights)) for k in range(2)], axis=1)
    res = np.abs(first - pm.normals * pm.weights[:, None]).max()
    if res > tol * max(1.0, float(pm.weights.max())):
        raise IncompatibleVarifold(f"compatibility residual {res:.3g}")


class _Volume:
    """Volume rule for ``int a(chi_u) g dx`` with ``a`` affine in ``chi_u``."""

    def __init__(self, poly, settings: QuadratureSettings, box, w=None):
        if w is not None:
            self.points = w.grid.nodes()
            cell = w.grid.h ** 2
            inside = poly.contains(self.points).astype(float)
            self.c_all = np.full(len(self.points), cell)
            self.c_phase = cell * inside
        else:
            bp, bw = box_rule(*box, n_cells=settings.box_cells, order=settings.box_order)
            pp, pw = polygon_rule(poly, *settings.area_order)
            self.points = np.concatenate([bp, pp])
            self.c_all = np.concatenate([bw, np.zeros_like(pw)])
            self.c_phase = np.concatenate([np.zeros_like(bw), pw])

    def integrate(self, g, minus=1.0, plus=1.0) -> float:
        """``int (minus + (plus - minus) chi_u) g dx``."""
        return float(np.dot(minus * self.c_all + (plus - minus) * self.c_phase, g))


class _Difference:
    """``int (chi_u - chi_v) g dx``: tube rule plus an outside-band correction."""

    def __init__(self, tr, curve, poly, settings, needed):
        self.tr = tr
        self.diff = tr.diff
        self.outside = None
        if needed:
            pp, pw = polygon_rule(poly, *settings.area_order)
            pv = PhasePolygon.from_vertices(curve.polygon(4096))
            qp, qw = polygon_rule(pv, *settings.area_order)
            self.outside = (np.concatenate([pp, qp]), np.concatenate([pw, -qw]))

    def integrate(self, g_tube, g_fn=None) -> float:
        val = float(np.dot(self.diff * self.tr.weights, g_tube))
        if self.outside is not None and g_fn is not None:
            pts, w = self.outside
            val = float(np.dot(w, g_fn(pts)))
        return val


def _needs_outside(curve, poly, tr) -> bool:
    b = curve.project_points(poly.vertices, check=False, robust=True)
    if np.any(np.abs(b.sdist) >= curve.r_c):
        return True
    return bool(np.any(tr.edge_chi_u[:, 0] != 0.0) or np.any(tr.edge_chi_u[:, 1] != 1.0))


def _outside_area(curve, poly, tr) -> float:
    pv = shapely.Polygon(curve.polygon(8192))
    total = shapely.symmetric_difference(poly.to_shapely(), pv).area
    band = float(np.dot(np.abs(tr.diff), tr.weights))
    return max(total - band, 0.0)


def _tilt(pm, xi_vals, sigma):
    return sigma * float(np.dot(1.0 - _dot(xi_vals, pm.normals), pm.weights))


def tilt_excess(poly: PhasePolygon, curve, sigma=1.0, xi: XiField | None = None, n_quad=2) -> float:
    """``sigma int (1 - xi . n_u) d|grad chi_u|`` with Gauss points on every edge."""
    xi = xi or XiField(curve)
    pm = perimeter_measure(poly, n_quad)
    return _tilt(pm, xi(pm.points), sigma)


# ---------------------------------------------------------------------------
# evaluation


def evaluate(weak: WeakState, strong: StrongState, w=None, w_dt=None, beta=BETA,
             xi: XiField | None = None, t=0.0, settings: QuadratureSettings | None = None,
             terms=True) -> EntropyReport:
    """Entropy parts and, with ``terms``, the full term budget at time ``t``.

    ``w`` is a ``CompensationField`` or ``None`` (meaning ``w = 0``);
    ``w_dt`` is its time derivative sampled on the same grid.
    """
    settings = settings or QuadratureSettings()
    rep = _evaluate(weak, strong, w, w_dt, beta, xi, t, settings, terms)
    if settings.check_convergence:
        fine = _evaluate(weak, strong, w, w_dt, beta, xi, t, settings.refined(), terms)
        scale = max(abs(fine.total), settings.abs_floor)
        if abs(fine.total - rep.total) > settings.rel_tol * scale:
            raise QuadratureNotConverged(
                f"relative entropy {rep.total:.6g} vs refined {fine.total:.6g}")
        rep.diagnostics["refined_total"] = fine.total
    return rep


def relative_entropy(weak, strong, w=None, beta=BETA, xi=None, t=0.0, settings=None) -> EntropyReport:
    return evaluate(weak, strong, w=w, beta=beta, xi=xi, t=t, settings=settings, terms=False)


def term_budget(weak, strong, w=None, w_dt=None, beta=BETA, xi=None, t=0.0, settings=None) -> EntropyReport:
    return evaluate(weak, strong, w=w, w_dt=w_dt, beta=beta, xi=xi, t=t, settings=settings, terms=True)


def _evaluate(weak, strong, w, w_dt, beta, xi, t, st: QuadratureSettings, terms):
    curve, v = strong.curve, strong.v
    poly, u, V = weak.poly, weak.u, weak.varifold
    phys = v.physics
    sigma = phys.sigma
    rc = curve.r_c
    xi = xi or XiField(curve)
    weight = BetaWeight(rc, beta)
    if w is not None and w.is_zero():
        w = None

    # surface part ---------------------------------------------------------
    pm = perimeter_measure(poly, V.n_quad)
    check_compatibility(pm, V)
    pb = curve.project_points(pm.points, check=False)
    pxi = xi.from_batch(pb)
    e_tilt = _tilt(pm, pxi.xi, sigma)

    theta = V.theta()
    ab = curve.project_points(V.positions, check=False)
    axi = xi.from_batch(ab)
    e_mult = sigma * float(np.dot(1.0 - theta, V.masses))
    s_minus_xi = V.directions - axi.xi
    normal_error = 0.5 * sigma * float(np.dot((s_minus_xi**2).sum(1), V.masses))

    # tube part --------------------------------------------------------------
    tr = tube_rule(curve, poly, st.n_rays, st.tube_order)
    tb = tube_batch(tr)
    outside = _needs_outside(curve, poly, tr)
    bvals = np.abs(weight.value(tr.y))
    e_weightvol = float(np.dot(np.abs(tr.diff) * bvals, tr.weights))
    if outside:
        e_weightvol += beta.plateau * _outside_area(curve, poly, tr)

    # volume part --------------------------------------------------------------
    if st.box is not None:
        box = st.box
    else:
        _, cp = curve.samples(512)
        pad = 3.0 * rc if st.box_pad is None else st.box_pad
        box = (cp.min(axis=0) - pad, cp.max(axis=0) + pad)
    vol = _Volume(poly, st, box, w)
    x = vol.points
    uu, vv = u(x, t), v(x, t)
    ww = w(x) if w is not None else 0.0
    d = uu - vv - ww
    e_kin = vol.integrate(0.5 * (d**2).sum(1), phys.rho_minus, phys.rho_plus)
    jd = u.grad(x, t) - v.grad(x, t) - (w.grad(x) if w is not None else 0.0)
    dsym = _sym(jd)
    diss = vol.integrate(2.0 * _ddot(dsym, dsym), phys.mu_minus, phys.mu_plus)

    rep = EntropyReport(t, e_tilt, e_kin, e_weightvol, e_mult, dissipation=diss)
    rep.diagnostics.update(normal_error=normal_error, outside_band=outside)
    if not terms:
        return rep

    # term budget ------------------------------------------------------------
    T = {}
    diff = _Difference(tr, curve, poly, st, outside)
    xt = tr.points
    txi = xi.from_batch(tb)
    ut, vt = u(xt, t), v(xt, t)
    wt = w(xt) if w is not None else np.zeros_like(vt)
    dt_ = ut - vt - wt
    jv_t = v.grad(xt, t)
    grad_beta = weight.grad(tb)
    drho = phys.rho_plus - phys.rho_minus
    dmu = phys.mu_plus - phys.mu_minus

    # fields on the volume rule
    jv = v.grad(x, t)

    def vfun(fn):
        # evaluator for the outside-band correction
        return fn if diff.outside is not None else None

    # R_surTen
    jv_atoms = v.grad(V.positions, t)
    r1 = -sigma * float(np.dot(_dot(s_minus_xi, _mv(jv_atoms, s_minus_xi)), V.masses))
    r2 = sigma * float(np.dot((1.0 - theta) * _dot(axi.xi, _mv(jv_atoms, axi.xi)), V.masses))
    r3 = sigma * float(np.dot(tr.diff * tr.weights, _dot(dt_, txi.grad_div)))
    band = np.abs(pb.sdist) < rc
    r4 = r5 = r6 = 0.0
    if band.any():
        bb = pb.subset(band)
        nu = pm.normals[band]
        wgt = pm.weights[band]
        bxi = xi.from_batch(bb)
        jv_p = v.grad(bb.x, t)
        nv = bb.normal
        _, vbar, gvbar = normal_velocity_data(bb, v, t)
        r4 = -sigma * float(np.dot(_dot(bxi.xi, nu) * _dot(nv, _mv(jv_p, nv))
                                   - _dot(bxi.xi, _mv(jv_p, bxi.xi)), wgt))
        tr_term = np.einsum("nji,nj->ni", gvbar - jv_p, bxi.xi)
        tr_term -= _dot(nv, tr_term)[:, None] * nv
        r5 = sigma * float(np.dot(_dot(nu, tr_term), wgt))
        r6 = sigma * float(np.dot(_dot(nu, _mv(bxi.grad, vbar - v(bb.x, t))), wgt))
    T["R_surTen"] = r1 + r2 + r3 + r4 + r5 + r6

    # R_dt, R_visc, R_adv
    if drho:
        def g_dt(p):
            return drho * _dot(u(p, t) - v(p, t) - (w(p) if w is not None else 0.0), v.dt(p, t))
        T["R_dt"] = -diff.integrate(drho * _dot(dt_, v.dt(xt, t)), vfun(g_dt))
    else:
        T["R_dt"] = 0.0
    if dmu:
        def visc(p):
            dv = _sym(v.grad(p, t))
            return 2.0 * dmu * _ddot(dv, _sym(u.grad(p, t) - v.grad(p, t)))
        T["R_visc"] = -diff.integrate(visc(xt), vfun(visc))
    else:
        T["R_visc"] = 0.0
    adv1 = 0.0
    if drho:
        def g_adv(p):
            dd = u(p, t) - v(p, t) - (w(p) if w is not None else 0.0)
            return drho * _dot(dd, _mv(v.grad(p, t), v(p, t)))
        adv1 = -diff.integrate(drho * _dot(dt_, _mv(jv_t, vt)), vfun(g_adv))
    adv2 = -vol.integrate(_dot(d, _mv(jv, d)), phys.rho_minus, phys.rho_plus)
    T["R_adv"] = adv1 + adv2

    # R_weightVol
    _, vbar_t, _ = normal_velocity_data(tb, v, t)
    vn_t = _dot(vt, tb.normal)[:, None] * tb.normal
    T["R_weightVol"] = float(np.dot(tr.diff * tr.weights,
                                    _dot(vbar_t - vn_t, grad_beta) + _dot(dt_, grad_beta)))

    # A_* terms
    if w is None:
        for name in ("A_visc", "A_dt", "A_adv", "A_surTen", "A_weightVol"):
            T[name] = 0.0
    else:
        jw = w.grad(x)
        dw = _sym(jw)
        a_visc = -vol.integrate(2.0 * _ddot(dw, dsym), phys.mu_minus, phys.mu_plus)
        if dmu:
            def g_av(p):
                return 2.0 * dmu * _ddot(_sym(v.grad(p, t)), _sym(w.grad(p)))
            a_visc += diff.integrate(g_av(xt), vfun(g_av))
        T["A_visc"] = a_visc
        wdt = w_dt(x) if w_dt is not None else 0.0
        T["A_dt"] = -vol.integrate(_dot(d, wdt + _mv(jw, vv)), phys.rho_minus, phys.rho_plus)
        T["A_adv"] = -vol.integrate(_dot(d, _mv(jv + jw, ww) + _mv(jw, d)),
                                    phys.rho_minus, phys.rho_plus)
        T["A_weightVol"] = float(np.dot(tr.diff * tr.weights, _dot(wt, grad_beta)))
        jw_atoms = w.grad(V.positions)
        a1 = -sigma * float(np.dot(_dot(s_minus_xi, _mv(jw_atoms, s_minus_xi)), V.masses))
        a2 = sigma * float(np.dot((1.0 - theta) * _dot(axi.xi, _mv(jw_atoms, axi.xi)), V.masses))
        jw_t = w.grad(xt)
        a3 = sigma * float(np.dot(tr.diff * tr.weights,
                                  _dot(wt, txi.grad_div)
                                  + np.einsum("nij,nji->n", jw_t, txi.grad)))
        jw_p = w.grad(pm.points)
        a5 = -sigma * float(np.dot(_dot(pxi.xi, _mv(jw_p, pm.normals - pxi.xi)), pm.weights))
        T["A_surTen"] = a1 + a2 + a3 + a5
    rep.terms = T
    return rep


def dissipation(u, v, w, physics, poly, box, t=0.0, n_cells=48, order=3, area_order=(10, 3)):
    """``int 2 mu(chi_u) |D^sym(u - v - w)|^2 dx`` over a box."""
    st = QuadratureSettings(box_cells=n_cells, box_order=order, area_order=area_order)
    vol = _Volume(poly, st, box, w)
    x = vol.points
    jd = u.grad(x, t) - v.grad(x, t) - (w.grad(x) if w is not None else 0.0)
    ds = _sym(jd)
    return vol.integrate(2.0 * _ddot(ds, ds), physics.mu_minus, physics.mu_plus)


def write_csv(path, rows):
    """Write ``(report, envelope_sq)`` pairs with the fixed column order."""
    with open(path, "w", newline="") as fh:
        fh.write(csv_header())
        for rep, env in rows:
            fh.write(rep.to_csv_row(env))
