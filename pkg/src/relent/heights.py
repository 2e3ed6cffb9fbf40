"""One-sided interface error heights, their mollification and diagnostics.

Heights are measured along the normal rays of the strong interface: ``h+``
integrates ``1 - chi_u`` on the plus side and ``h-`` integrates ``chi_u`` on
the minus side, both weighted by the ray cutoff ``theta(y / r_c)``.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
import shapely
from scipy.interpolate import CubicSpline

from .errors import KernelSupportEmpty, SelfIntersectingOffset
from .phasefield import PhasePolygon
from .profiles import THETA
from .quadrature import ray_crossings


@dataclass(frozen=True)
class HeightSample:
    base: np.ndarray
    h_plus: float
    h_minus: float


def uniform_params(n):
    return 2.0 * np.pi * np.arange(n) / n


@dataclass(frozen=True, eq=False)
class HeightField:
    """Raw heights at uniform curve parameters."""

    curve: object
    params: np.ndarray
    h_plus: np.ndarray
    h_minus: np.ndarray
    wide: bool = False

    @property
    def frame(self):
        fr = self.__dict__.get("_frame")
        if fr is None:
            fr = self.curve.frame(self.params)
            object.__setattr__(self, "_frame", fr)
        return fr

    @property
    def ds(self):
        """Arclength weights of the periodic trapezoid rule."""
        return self.frame.speed * (2.0 * np.pi / len(self.params))

    def sample(self, i) -> HeightSample:
        return HeightSample(self.frame.point[i], float(self.h_plus[i]), float(self.h_minus[i]))


def ray_heights(poly: PhasePolygon, origins, normals, r_c, wide=False):
    """Exact ``(h+, h-)`` along rays ``origins +- y normals``."""
    scale = 2.0 * r_c if wide else r_c
    reach = 0.5 * scale
    m = len(origins)
    a, b = poly.edges
    cr = ray_crossings(a, b, origins, normals, -reach, reach)
    brk = np.concatenate([np.tile([-reach, 0.0, reach], (m, 1)), cr.params], axis=1)
    brk.sort(axis=1)
    lo, hi = brk[:, :-1], brk[:, 1:]
    chi = cr.indicator(0.5 * (lo + hi))
    prim = THETA.integral
    mass = scale * (prim(np.abs(hi) / scale) - prim(np.abs(lo) / scale))
    plus = lo >= 0.0
    h_plus = np.where(plus, (1.0 - chi) * mass, 0.0).sum(1)
    h_minus = np.where(~plus, -chi * mass, 0.0).sum(1)
    return h_plus, h_minus


def height_field(poly: PhasePolygon, curve, n=4096, wide=False, params=None) -> HeightField:
    """Heights at ``n`` uniform parameters (or at the given parameters).

    ``wide`` doubles the support of the ray cutoff.
    """
    s = uniform_params(n) if params is None else np.asarray(params, dtype=float)
    fr = curve.frame(s)
    hp, hm = ray_heights(poly, fr.point, fr.normal, curve.r_c, wide)
    return HeightField(curve, s, hp, hm, wide)


def height(poly: PhasePolygon, curve, base, side=1, wide=False) -> float:
    """Height at one base point on the curve; ``side`` is +1 or -1."""
    s = curve.project_points(np.asarray(base, dtype=float)[None, :], check=False).param
    hf = height_field(poly, curve, params=s, wide=wide)
    return float(hf.h_plus[0] if side > 0 else hf.h_minus[0])


# ---------------------------------------------------------------------------
# mollification


@dataclass(frozen=True, eq=False)
class MollifiedHeight:
    """Mollified heights at the raw sample parameters, with interpolation."""

    raw: HeightField
    e: float
    h_plus: np.ndarray
    h_minus: np.ndarray
    normalization: np.ndarray

    @property
    def curve(self):
        return self.raw.curve

    @property
    def params(self):
        return self.raw.params

    def _spline(self, side):
        key = f"_spline{side}"
        sp = self.__dict__.get(key)
        if sp is None:
            vals = self.h_plus if side > 0 else self.h_minus
            s = np.append(self.params, 2.0 * np.pi)
            sp = CubicSpline(s, np.append(vals, vals[0]), bc_type="periodic")
            object.__setattr__(self, key, sp)
        return sp

    def at(self, s, side=1):
        return self._spline(side)(np.mod(s, 2.0 * np.pi))

    def arclength_derivative(self, s, side=1):
        s = np.mod(s, 2.0 * np.pi)
        return self._spline(side)(s, 1) / self.curve.frame(s).speed

    def max_slope(self, side=1):
        return float(np.max(np.abs(self.arclength_derivative(self.params, side))))


def kernel_sum(points, values, ds, e):
    """``sum_j theta(|x_j - x_i| / e) values_j ds_j`` over neighbors along the curve."""
    n = len(points)
    window = int(np.ceil(e / ds.min())) + 1
    window = min(window, (n - 1) // 2)
    num = np.zeros((values.shape[0], n))
    den = np.zeros(n)
    for off in range(-window, window + 1):
        q = np.roll(points, -off, axis=0)
        k = THETA(np.linalg.norm(q - points, axis=1) / e) * np.roll(ds, -off)
        den += k
        num += k * np.roll(values, -off, axis=1)
    return num, den


def mollify(heights: HeightField, e: float) -> MollifiedHeight:
    """Convex kernel average of the heights with chordal distance.

    The kernel is ``theta(|x~ - x| / e)`` and the integrals use the periodic
    trapezoid rule in arclength, so constants are reproduced exactly.
    """
    if not e > 0:
        raise KernelSupportEmpty("mollification scale must be positive")
    ds = heights.ds
    if 0.5 * e <= ds.max():
        raise KernelSupportEmpty(f"e = {e} is below the sample spacing {ds.max():.3g}")
    vals = np.vstack([heights.h_plus, heights.h_minus])
    num, den = kernel_sum(heights.frame.point, vals, ds, e)
    hp, hm = num / den
    return MollifiedHeight(heights, float(e), hp, hm, den)


# ---------------------------------------------------------------------------
# reconstruction


def _curve_values(curve, h, n):
    s = uniform_params(n)
    if isinstance(h, MollifiedHeight):
        return s, h.at(s, 1), h.at(s, -1)
    if isinstance(h, HeightField):
        if len(h.params) != n:
            raise ValueError("height field resolution does not match")
        return s, h.h_plus, h.h_minus
    raise TypeError("expected a HeightField or MollifiedHeight")


def graph_reconstruction(curve, h_plus, h_minus=None, n=None) -> PhasePolygon:
    """Polygon of ``chi_v - chi_{0 <= sdist <= h+} + chi_{-h- <= sdist <= 0}``.

    ``h_plus`` may be a ``HeightField`` or ``MollifiedHeight`` carrying both
    sides, or two arrays sampled at uniform parameters.
    """
    if h_minus is None:
        n = n or (len(h_plus.params) if isinstance(h_plus, HeightField) else 4096)
        s, hp, hm = _curve_values(curve, h_plus, n)
    else:
        hp = np.asarray(h_plus, dtype=float)
        hm = np.asarray(h_minus, dtype=float)
        s = uniform_params(len(hp))
    if not curve.interior_positive:
        raise ValueError("reconstruction needs the plus phase to be the bounded region")
    fr = curve.frame(s)
    kmax = np.abs(fr.curvature)
    if np.any(hp * kmax >= 1.0) or np.any(hm * kmax >= 1.0):
        raise SelfIntersectingOffset("offset height exceeds the curvature radius")
    base = shapely.Polygon(fr.point)
    inner_ring = fr.point + hp[:, None] * fr.normal
    outer_ring = fr.point - hm[:, None] * fr.normal
    for ring in (inner_ring, outer_ring):
        if not shapely.LinearRing(ring).is_simple:
            raise SelfIntersectingOffset("offset curve self-intersects")
    inner = shapely.Polygon(inner_ring)
    outer = shapely.Polygon(outer_ring)
    geom = shapely.union(inner, shapely.difference(outer, base))
    return PhasePolygon.from_shapely(geom)


def sym_diff_area(a: PhasePolygon, b: PhasePolygon) -> float:
    return float(shapely.symmetric_difference(a.to_shapely(), b.to_shapely()).area)


# ---------------------------------------------------------------------------
# diagnostics


def orlicz_G(p):
    """Convex function with quadratic growth below 1 and linear growth above."""
    p = np.abs(p)
    return np.where(p <= 1.0, p * p, 2.0 * p - 1.0)


def orlicz_l4_check(curve, u, r_c=None):
    """Return ``(int |u|^4 dS, (1+L)^3 / r_c^4 (|Du|_G^2 + |Du|_G^4 + ||u||_2^4))``.

    ``u`` is sampled at uniform parameters. The tangential derivative is a
    forward difference, so a jump of size ``J`` contributes about ``2 |J|``
    to ``|Du|_G`` through the linear branch of ``G``.
    """
    u = np.asarray(u, dtype=float)
    n = len(u)
    s = uniform_params(n)
    fr = curve.frame(s)
    ds = fr.speed * (2.0 * np.pi / n)
    pts = fr.point
    chord = np.linalg.norm(np.roll(pts, -1, axis=0) - pts, axis=1)
    slope = (np.roll(u, -1) - u) / chord
    r_c = curve.r_c if r_c is None else r_c
    length = float(ds.sum())
    du_g = float(np.sum(orlicz_G(slope) * chord))
    l2sq = float(np.sum(u * u * ds))
    lhs = float(np.sum(u**4 * ds))
    rhs = (1.0 + length) ** 3 / r_c**4 * (du_g**2 + du_g**4 + l2sq**2)
    return lhs, rhs


def height_l2_ratio(hf: HeightField, tube) -> dict:
    """Monitored constant of the L^2 height bound.

    ``int |h|^2 dS / (r_c int |chi_u - chi_v| min(dist / r_c, 1) dx)``; the
    volume integral uses the tube rule and therefore only sees the band.
    """
    rc = hf.curve.r_c
    num = float(np.sum((hf.h_plus**2 + hf.h_minus**2) * hf.ds))
    den = float(np.sum(np.abs(tube.diff) * np.minimum(np.abs(tube.y) / rc, 1.0) * tube.weights))
    return {"lhs": num, "rhs": rc * den, "ratio": num / (rc * den) if den > 0 else np.nan}


def height_time_structure(poly_at, curve_at, v, eta, eta_grad, t, dt, n=4096, side=1):
    """``d/dt int eta h dS - int h (Id - n n) v . grad eta dS`` at time ``t``.

    Forward difference in time; every other quantity at ``t``.
    """
    def weighted(time):
        hf = height_field(poly_at(time), curve_at(time), n)
        h = hf.h_plus if side > 0 else hf.h_minus
        return hf, h, float(np.sum(eta(hf.frame.point) * h * hf.ds))

    hf, h, now = weighted(t)
    _, _, later = weighted(t + dt)
    fr = hf.frame
    vt = np.einsum("ni,ni->n", v(fr.point, t), fr.tangent)
    tang = vt * np.einsum("ni,ni->n", eta_grad(fr.point), fr.tangent)
    return (later - now) / dt - float(np.sum(h * tang * hf.ds))


def export_csv(path, mollified: MollifiedHeight):
    raw = mollified.raw
    arclength = np.concatenate([[0.0], np.cumsum(raw.ds)[:-1]])
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["arclength", "h_plus", "h_minus", "h_plus_e", "h_minus_e"])
        for row in zip(arclength, raw.h_plus, raw.h_minus, mollified.h_plus, mollified.h_minus):
            w.writerow([repr(float(x)) for x in row])
