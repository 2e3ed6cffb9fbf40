"""Quadrature rules shared by the phasefield, heights and entropy code.

The weak phase is polygonal, so ray/polygon crossings are computed exactly and
the integrands restricted to a ray are piecewise smooth with known breakpoints.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np


@lru_cache(maxsize=None)
def gauss(n: int):
    """Gauss-Legendre nodes and weights on [0, 1]."""
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


@dataclass(frozen=True)
class Crossings:
    """Sorted crossing parameters of rays with a polygon boundary.

    ``params`` is ``(M, K)`` padded with ``hi``; only crossings strictly
    inside ``(lo, hi)`` are stored. ``above`` counts crossings at ``>= hi``.
    """

    params: np.ndarray
    count: np.ndarray
    above: np.ndarray
    hi: np.ndarray

    def indicator(self, y):
        """Phase indicator at ray parameters ``y`` of shape ``(M, J)``."""
        real = np.arange(self.params.shape[1])[None, :] < self.count[:, None]
        n = ((self.params[:, None, :] > y[:, :, None]) & real[:, None, :]).sum(axis=2)
        return ((n + self.above[:, None]) % 2).astype(float)


def ray_crossings(a, b, origins, dirs, lo, hi, chunk=256) -> Crossings:
    """Exact crossings of rays ``origins + tau * dirs`` with segments ``a -> b``.

    A segment crosses when its endpoints lie strictly on different sides of
    the ray's line, with endpoints on the line counted as the negative side.
    This half-open rule counts each vertex on the line once, so the parity of
    crossings beyond ``tau`` is the polygon indicator at that point.
    """
    origins = np.atleast_2d(origins)
    dirs = np.atleast_2d(dirs)
    m = len(origins)
    lo = np.broadcast_to(np.asarray(lo, dtype=float), (m,))
    hi = np.broadcast_to(np.asarray(hi, dtype=float), (m,))
    rows, vals = [], []
    above = np.zeros(m, dtype=np.int64)
    ab = b - a
    for start in range(0, m, chunk):
        sl = slice(start, start + chunk)
        o = origins[sl, None, :]
        d = dirs[sl, None, :]
        ra = a[None] - o
        rb = b[None] - o
        sa = d[..., 0] * ra[..., 1] - d[..., 1] * ra[..., 0]
        sb = d[..., 0] * rb[..., 1] - d[..., 1] * rb[..., 0]
        cross = (sa > 0.0) != (sb > 0.0)
        denom = np.where(cross, sa - sb, 1.0)
        tau = (ra * d).sum(-1) + sa / denom * (ab[None] * d).sum(-1)
        above[sl] = (cross & (tau >= hi[sl, None])).sum(axis=1)
        r, e = np.nonzero(cross & (tau > lo[sl, None]) & (tau < hi[sl, None]))
        rows.append(r + start)
        vals.append(tau[r, e])
    rows = np.concatenate(rows)
    vals = np.concatenate(vals)
    count = np.bincount(rows, minlength=m)
    k = max(int(count.max(initial=0)), 1)
    params = np.repeat(hi[:, None], k, axis=1).copy()
    if rows.size:
        order = np.lexsort((vals, rows))
        rows, vals = rows[order], vals[order]
        first = np.concatenate([[0], np.cumsum(count)[:-1]])
        rank = np.arange(rows.size) - first[rows]
        params[rows, rank] = vals
    return Crossings(params, count, above, np.asarray(hi))


@dataclass(frozen=True)
class TubeRule:
    """Quadrature over the tube ``{gamma(s) + y n(s) : |y| < r_c}``.

    Points are stored with their tube coordinates so that projection data is
    known exactly without Newton iterations.
    """

    points: np.ndarray
    weights: np.ndarray
    ray: np.ndarray  # ray index of every point
    y: np.ndarray  # signed distance of every point
    chi_u: np.ndarray
    chi_v: np.ndarray
    frame: object  # CurveFrame of the ray bases
    edge_chi_u: np.ndarray  # (M, 2) weak indicator just inside y = -r_c and y = +r_c

    @property
    def diff(self):
        return self.chi_u - self.chi_v


def tube_rule(curve, poly, n_rays=1024, order=4) -> TubeRule:
    """Tube quadrature split at the interface and at every polygon crossing.

    In the ``sigma`` direction this is the periodic trapezoid rule; along each
    ray the sub-intervals between breakpoints carry Gauss points, and the two
    indicators are constant on each sub-interval.
    """
    rc = curve.r_c
    s = 2.0 * np.pi * np.arange(n_rays) / n_rays
    fr = curve.frame(s)
    a, b = poly.edges
    cr = ray_crossings(a, b, fr.point, fr.normal, -rc, rc)
    m = n_rays
    brk = np.concatenate([np.tile([-rc, 0.0, rc], (m, 1)), cr.params], axis=1)
    brk.sort(axis=1)
    lo, hi = brk[:, :-1], brk[:, 1:]
    mid = 0.5 * (lo + hi)
    chi_u_seg = cr.indicator(mid)
    chi_v_seg = (mid > 0.0).astype(float)
    gx, gw = gauss(order)
    half = hi - lo
    y = lo[:, :, None] + half[:, :, None] * gx[None, None, :]
    jac = 1.0 - y * fr.curvature[:, None, None]
    ds = fr.speed * (2.0 * np.pi / n_rays)
    w = half[:, :, None] * gw[None, None, :] * jac * ds[:, None, None]
    shape = y.shape
    ray = np.broadcast_to(np.arange(m)[:, None, None], shape).ravel()
    y = y.ravel()
    keep = w.ravel() > 0.0
    ray, y = ray[keep], y[keep]
    pts = fr.point[ray] + y[:, None] * fr.normal[ray]
    cu = np.broadcast_to(chi_u_seg[:, :, None], shape).ravel()[keep]
    cv = np.broadcast_to(chi_v_seg[:, :, None], shape).ravel()[keep]
    edge = cr.indicator(np.tile([-rc * (1 - 1e-12), rc * (1 - 1e-12)], (m, 1)))
    return TubeRule(pts, w.ravel()[keep], ray, y, cu, cv, fr, edge)


def polygon_rule(poly, n_radial=12, n_trans=3):
    """Signed quadrature for ``int chi f dx`` over a polygon.

    Each edge spans a fan triangle with a common apex; the collapsed tensor
    Gauss rule on the triangle is exact for polynomials of modest degree and
    the signed triangle areas cancel outside the polygon.
    """
    a, b = poly.edges
    apex = poly.apex
    ur, wr = gauss(n_radial)
    ut, wt = gauss(n_trans)
    ea = a - apex
    eb = b - apex
    area2 = ea[:, 0] * eb[:, 1] - ea[:, 1] * eb[:, 0]
    u = ur[:, None]
    v = ut[None, :]
    # x = apex + u (ea + v (eb - ea)), jacobian area2 * u
    pts = (apex[None, None, None, :]
           + u[None, :, :, None] * (ea[:, None, None, :]
                                    + v[None, :, :, None] * (eb - ea)[:, None, None, :]))
    w = area2[:, None, None] * (u * wr[:, None] * wt[None, :])[None]
    return pts.reshape(-1, 2), w.ravel()


def box_rule(lo, hi, n_cells=64, order=4):
    """Tensor Gauss rule on a rectangle split into ``n_cells`` per side."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    gx, gw = gauss(order)
    axes, wts = [], []
    for k in range(2):
        h = (hi[k] - lo[k]) / n_cells
        base = lo[k] + h * np.arange(n_cells)
        axes.append((base[:, None] + h * gx[None, :]).ravel())
        wts.append(np.tile(h * gw, n_cells))
    xx, yy = np.meshgrid(axes[0], axes[1], indexing="ij")
    ww = np.outer(wts[0], wts[1])
    return np.stack([xx.ravel(), yy.ravel()], axis=1), ww.ravel()


def perimeter_rule(a, b, n_quad):
    """Gauss points on segments: points ``(E*n, 2)``, weights, edge index."""
    gx, gw = gauss(n_quad)
    d = b - a
    length = np.linalg.norm(d, axis=1)
    pts = a[:, None, :] + gx[None, :, None] * d[:, None, :]
    w = length[:, None] * gw[None, :]
    idx = np.repeat(np.arange(len(a)), n_quad)
    return pts.reshape(-1, 2), w.ravel(), idx
