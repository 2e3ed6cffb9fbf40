"""Cutoff normal extension, the truncated distance weight and normal velocities.

All derivatives are analytic in tube coordinates ``x = gamma(sigma) + d n``:
``grad d = n``, ``grad sigma = T / (1 - d k)`` and ``dn/dsigma = -k T``.
Matrices follow ``J[i, j] = d_j f_i``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .config import DEFAULT
from .errors import NotUnit, OutsideTubularNeighborhood
from .geometry import ProjectionBatch, as_points
from .profiles import BETA, ZETA, QuadraticCutoff, Truncation


def outer(a, b):
    return np.einsum("ni,nj->nij", a, b)


def matvec(m, v):
    return np.einsum("nij,nj->ni", m, v)


@dataclass(frozen=True)
class XiData:
    xi: np.ndarray
    grad: np.ndarray
    div: np.ndarray
    grad_div: np.ndarray


@dataclass(frozen=True, eq=False)
class XiField:
    """``xi(x) = zeta(sdist / r_c) n(Px)`` inside the band, zero outside."""

    curve: object
    zeta: QuadraticCutoff = field(default=ZETA)

    @property
    def r_c(self):
        return self.curve.r_c

    def project(self, x) -> ProjectionBatch:
        return self.curve.project_points(as_points(x), check=False)

    def from_batch(self, b: ProjectionBatch) -> XiData:
        rc = self.r_c
        r = b.sdist / rc
        inside = np.abs(r) < 1.0
        z0 = np.where(inside, self.zeta(r), 0.0)
        z1 = np.where(inside, self.zeta.d1(r), 0.0) / rc
        z2 = np.where(inside, self.zeta.d2(r), 0.0) / rc**2
        k = b.curvature
        jac = b.jacobian_factor
        n, t = b.normal, b.tangent
        xi = z0[:, None] * n
        grad = z1[:, None, None] * outer(n, n) - (z0 * k / jac)[:, None, None] * outer(t, t)
        div = z1 - z0 * k / jac
        d_normal = z2 - z1 * k / jac - z0 * k**2 / jac**2
        d_sigma = -z0 * b.dcurvature / jac**2
        grad_div = d_normal[:, None] * n + (d_sigma / jac)[:, None] * t
        return XiData(xi, grad, div, grad_div)

    def __call__(self, x):
        return self.from_batch(self.project(x)).xi


def xi(field: XiField, x):
    """Extension field at one point (vector) or a batch of points."""
    x = np.asarray(x, dtype=float)
    out = field(x)
    return out[0] if x.ndim == 1 else out


@dataclass(frozen=True, eq=False)
class BetaWeight:
    """``beta(sdist / r_c)`` and its gradient ``beta'(sdist / r_c) n / r_c``."""

    r_c: float
    profile: Truncation = field(default=BETA)

    def value(self, sdist):
        return self.profile(np.asarray(sdist) / self.r_c)

    def grad(self, b: ProjectionBatch):
        inside = np.abs(b.sdist) < self.r_c
        d1 = np.where(inside, self.profile.d1(b.sdist / self.r_c), 0.0)
        return (d1 / self.r_c)[:, None] * b.normal


def normal_velocity_data(b: ProjectionBatch, v, t=0.0):
    """``(V_n, Vbar_n, grad Vbar_n)`` at projected points.

    ``grad Vbar_n = (f' n - f k T) (x) T / (1 - d k)`` with ``f = v(Px) . n``
    and ``f' = (J T) . n - k v . T`` evaluated at the foot.
    """
    n, tan = b.normal, b.tangent
    vx = v(b.x, t)
    vp = v(b.foot, t, side=1) if getattr(v, "minus", None) is not None else v(b.foot, t)
    jp = v.grad(b.foot, t, side=1) if getattr(v, "minus", None) is not None else v.grad(b.foot, t)
    f = np.einsum("ni,ni->n", vp, n)
    fp = np.einsum("ni,ni->n", matvec(jp, tan), n) - b.curvature * np.einsum("ni,ni->n", vp, tan)
    vn = np.einsum("ni,ni->n", vx, n)[:, None] * n
    vbar = f[:, None] * n
    lead = fp[:, None] * n - (f * b.curvature)[:, None] * tan
    grad = outer(lead, tan) / b.jacobian_factor[:, None, None]
    return vn, vbar, grad


def normal_velocities(curve, v, x, t=0.0):
    """Normal velocity at ``x`` and its extension constant along normals."""
    x = np.asarray(x, dtype=float)
    b = curve.project_points(as_points(x))
    vn, vbar, _ = normal_velocity_data(b, v, t)
    return (vn[0], vbar[0]) if x.ndim == 1 else (vn, vbar)


def _time_difference(f, t, dt, scheme):
    if scheme == "central":
        return (f(t + dt) - f(t - dt)) / (2.0 * dt)
    if scheme == "forward":
        return (f(t + dt) - f(t)) / dt
    raise ValueError(f"unknown scheme {scheme!r}")


def xi_dt_residual(field_at, v, x, t, dt, scheme="central"):
    """``|d_t xi + (Vbar_n . grad) xi + (Id - n n)(grad Vbar_n)^T xi|``.

    ``field_at`` maps a time to an ``XiField``; the time derivative is a
    finite difference, every spatial term is analytic at time ``t``.
    """
    x = as_points(x)
    now = field_at(t)
    b = now.curve.project_points(x)
    for s in ((t + dt, t - dt) if scheme == "central" else (t + dt,)):
        field_at(s).curve.project_points(x)
    d = now.from_batch(b)
    _, vbar, gv = normal_velocity_data(b, v, t)
    dxi = _time_difference(lambda s: field_at(s)(x), t, dt, scheme)
    adv = matvec(d.grad, vbar)
    tr = np.einsum("nji,nj->ni", gv, d.xi)
    tr -= np.einsum("ni,ni->n", b.normal, tr)[:, None] * b.normal
    return np.linalg.norm(dxi + adv + tr, axis=1)


def beta_transport_residual(curve_at, v, x, t, dt, scheme="central", profile=BETA):
    """``|d_t beta(sdist / r_c) + (Vbar_n . grad) beta(sdist / r_c)|``."""
    x = as_points(x)
    b = curve_at(t).project_points(x)
    for s in ((t + dt, t - dt) if scheme == "central" else (t + dt,)):
        curve_at(s).project_points(x)
    weight = BetaWeight(curve_at(t).r_c, profile)
    _, vbar, _ = normal_velocity_data(b, v, t)
    dbeta = _time_difference(lambda s: weight.value(curve_at(s).project_points(x).sdist),
                             t, dt, scheme)
    return np.abs(dbeta + np.einsum("ni,ni->n", vbar, weight.grad(b)))


def coercivity_checks(field: XiField, b, x, beta=BETA, slack=1e-12):
    """Pointwise coercivity facts for unit vectors ``b`` at points ``x``.

    Returns boolean arrays for
    ``truncation``: ``min(sdist^2 / r_c^2, 1) <= 1 - zeta``,
    ``tilt``: ``1 - zeta <= 1 - b . xi``,
    ``normal``: ``|b - xi|^2 <= 2 (1 - b . xi)``, and
    ``weight``: ``min(|r|, 1) <= 2 |beta(r)|``.
    """
    b = as_points(b)
    if np.any(np.abs(np.linalg.norm(b, axis=1) - 1.0) > DEFAULT.unit_vector):
        raise NotUnit("direction vectors must have unit length")
    batch = field.project(x)
    r = batch.sdist / field.r_c
    z = np.where(np.abs(r) < 1.0, field.zeta(r), 0.0)
    xi_val = field.from_batch(batch).xi
    bx = np.einsum("ni,ni->n", b, xi_val)
    return {
        "truncation": np.minimum(r * r, 1.0) <= 1.0 - z + slack,
        "tilt": 1.0 - z <= 1.0 - bx + slack,
        "normal": ((b - xi_val) ** 2).sum(1) <= 2.0 * (1.0 - bx) + slack,
        "weight": np.minimum(np.abs(r), 1.0) <= 2.0 * np.abs(beta(r)) + slack,
    }


def require_band(batch: ProjectionBatch, r_c: float):
    if np.any(np.abs(batch.sdist) >= r_c):
        raise OutsideTubularNeighborhood("point outside the tubular band")
