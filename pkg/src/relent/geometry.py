"""Closed planar interfaces, signed distance and nearest-point projection.

An interface is a truncated Fourier series ``z(s) = sum_k c_k exp(iks)`` of a
2pi-periodic parameter. Points are handled as real ``(..., 2)`` arrays; the
complex form is only used internally for evaluation.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
import shapely
from scipy.spatial import cKDTree

from .config import DEFAULT, Tolerances
from .errors import AmbiguousProjection, InvalidCurve, OutsideTubularNeighborhood

N_SEEDS = 256
N_DENSE = 4096


def as_points(x) -> np.ndarray:
    return np.atleast_2d(np.asarray(x, dtype=float))


def to_complex(x):
    x = np.asarray(x, dtype=float)
    return x[..., 0] + 1j * x[..., 1]


def to_vec(z):
    return np.stack([np.real(z), np.imag(z)], axis=-1)


@dataclass(frozen=True)
class CurveFrame:
    """Geometric data of a curve at a batch of parameters."""

    param: np.ndarray
    point: np.ndarray
    tangent: np.ndarray
    normal: np.ndarray
    curvature: np.ndarray  # signed w.r.t. the inner normal
    dcurvature: np.ndarray  # derivative of curvature w.r.t. arclength
    speed: np.ndarray  # |z'(s)|


@dataclass(frozen=True)
class ProjectionResult:
    foot: np.ndarray
    sdist: float
    normal: np.ndarray
    grad_proj: np.ndarray
    param: float = 0.0
    curvature: float = 0.0


@dataclass(frozen=True)
class ProjectionBatch:
    """Vectorized projection data for ``N`` query points."""

    x: np.ndarray
    param: np.ndarray
    foot: np.ndarray
    sdist: np.ndarray
    normal: np.ndarray
    tangent: np.ndarray
    curvature: np.ndarray
    dcurvature: np.ndarray

    @property
    def jacobian_factor(self):
        """``1 - sdist * curvature``; the area element of the tube map."""
        return 1.0 - self.sdist * self.curvature

    @property
    def grad_proj(self):
        t = self.tangent
        return np.einsum("ni,nj->nij", t, t) / self.jacobian_factor[:, None, None]

    @property
    def hess_sdist(self):
        t = self.tangent
        c = -self.curvature / self.jacobian_factor
        return c[:, None, None] * np.einsum("ni,nj->nij", t, t)

    def item(self, i: int = 0) -> ProjectionResult:
        return ProjectionResult(
            foot=self.foot[i], sdist=float(self.sdist[i]), normal=self.normal[i],
            grad_proj=self.grad_proj[i], param=float(self.param[i]),
            curvature=float(self.curvature[i]))

    def subset(self, mask) -> "ProjectionBatch":
        return ProjectionBatch(*(getattr(self, f)[mask] for f in
                                 ("x", "param", "foot", "sdist", "normal",
                                  "tangent", "curvature", "dcurvature")))


@dataclass(frozen=True, eq=False)
class InterfaceCurve:
    """Smooth closed curve with a tubular radius ``r_c``.

    ``coeffs`` holds the Fourier coefficients for modes ``-K..K``. The
    parameterization is normalized to run counterclockwise. When
    ``interior_positive`` is true the bounded region is the plus phase and the
    inner normal points into it; otherwise the plus phase is the exterior.
    """

    coeffs: np.ndarray
    r_c: float
    interior_positive: bool = True
    validate: bool = True
    tol: Tolerances = field(default=DEFAULT, repr=False)

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=complex).ravel()
        if c.size % 2 == 0:
            raise InvalidCurve("coefficient count must be odd (modes -K..K)")
        modes = np.arange(c.size) - c.size // 2
        if np.sum(modes * np.abs(c) ** 2) < 0.0:
            c = c[::-1].copy()
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)
        object.__setattr__(self, "modes", modes)
        if not self.r_c > 0:
            raise InvalidCurve("r_c must be positive")
        if self.validate:
            self._check_reach()

    # construction -------------------------------------------------------
    @classmethod
    def circle(cls, radius=1.0, center=(0.0, 0.0), r_c=0.5, n_modes=1, **kw):
        c = np.zeros(2 * n_modes + 1, dtype=complex)
        c[n_modes] = center[0] + 1j * center[1]
        c[n_modes + 1] = radius
        return cls(c, r_c, **kw)

    @classmethod
    def ellipse(cls, a=2.0, b=1.0, center=(0.0, 0.0), angle=0.0, r_c=0.25, n_modes=1, **kw):
        # a cos s + i b sin s = (a+b)/2 e^{is} + (a-b)/2 e^{-is}
        c = np.zeros(2 * n_modes + 1, dtype=complex)
        rot = np.exp(1j * angle)
        c[n_modes] = center[0] + 1j * center[1]
        c[n_modes + 1] = 0.5 * (a + b) * rot
        c[n_modes - 1] = 0.5 * (a - b) * rot
        return cls(c, r_c, **kw)

    @classmethod
    def from_samples(cls, points, n_modes, r_c, **kw):
        """Least-squares Fourier fit of points sampled at uniform parameters."""
        z = to_complex(points)
        m = z.size
        if m < 2 * n_modes + 1:
            raise InvalidCurve("not enough samples for the requested mode count")
        spec = np.fft.fft(z) / m
        k = np.arange(-n_modes, n_modes + 1)
        return cls(spec[k % m], r_c, **kw)

    def with_coeffs(self, coeffs, validate=False) -> "InterfaceCurve":
        return InterfaceCurve(coeffs, self.r_c, self.interior_positive, validate, self.tol)

    @property
    def orient(self) -> float:
        return 1.0 if self.interior_positive else -1.0

    @property
    def n_modes(self) -> int:
        return self.coeffs.size // 2

    # evaluation ---------------------------------------------------------
    def derivatives(self, s, order=3):
        """Return ``[z, z', ..., z^(order)]`` as complex arrays."""
        s = np.asarray(s, dtype=float)
        shape = s.shape
        s = s.ravel()
        k = self.modes
        basis = np.exp(1j * np.outer(s, k))
        out = []
        weights = self.coeffs.copy()
        for _ in range(order + 1):
            out.append((basis @ weights).reshape(shape))
            weights = weights * (1j * k)
        return out

    def point(self, s):
        return to_vec(self.derivatives(s, 0)[0])

    def frame(self, s) -> CurveFrame:
        s = np.asarray(s, dtype=float)
        z, z1, z2, z3 = self.derivatives(s, 3)
        speed = np.abs(z1)
        tan = z1 / speed
        nrm = self.orient * 1j * tan
        cross = np.imag(np.conj(z1) * z2)
        dcross = np.imag(np.conj(z1) * z3)
        dot12 = np.real(np.conj(z1) * z2)
        curv = self.orient * cross / speed**3
        dcurv = self.orient * (dcross / speed**3 - 3.0 * cross * dot12 / speed**5) / speed
        return CurveFrame(s, to_vec(z), to_vec(tan), to_vec(nrm), curv, dcurv, speed)

    def samples(self, n=N_DENSE):
        s = 2.0 * np.pi * np.arange(n) / n
        return s, self.point(s)

    def area(self) -> float:
        return float(np.pi * np.sum(self.modes * np.abs(self.coeffs) ** 2))

    def length(self, n=N_DENSE) -> float:
        s = 2.0 * np.pi * np.arange(n) / n
        return float(np.abs(self.derivatives(s, 1)[1]).mean() * 2.0 * np.pi)

    def diameter(self, n=N_DENSE) -> float:
        _, p = self.samples(n)
        lo, hi = p.min(axis=0), p.max(axis=0)
        return float(np.max(hi - lo))

    def polygon(self, n=1024) -> np.ndarray:
        """Vertices of the inscribed polygon (counterclockwise)."""
        return self.samples(n)[1]

    def _check_reach(self):
        s, pts = self.samples(N_DENSE)
        fr = self.frame(s)
        if self.r_c * np.max(np.abs(fr.curvature)) >= 1.0:
            raise InvalidCurve("r_c exceeds the curvature radius")
        if not shapely.LinearRing(pts).is_simple:
            raise InvalidCurve("curve self-intersects")
        tree = cKDTree(pts)
        off = 0.999 * self.r_c
        for sign in (1.0, -1.0):
            d, _ = tree.query(pts + sign * off * fr.normal)
            if np.any(d < off * (1.0 - 1e-9)):
                raise InvalidCurve("tube map is not injective at this r_c")

    # inside test ------------------------------------------------------------
    def inside(self, x) -> np.ndarray:
        """True where ``x`` lies in the bounded region."""
        x = as_points(x)
        ring = shapely.Polygon(self.polygon(N_DENSE))
        return shapely.contains_xy(ring, x[:, 0], x[:, 1])

    # projection ---------------------------------------------------------
    def _newton(self, x_c, s):
        tol = self.tol
        clamp = 2.0 * np.pi / N_SEEDS
        active = np.ones(s.shape, dtype=bool)
        for _ in range(tol.newton_max_iter):
            idx = np.nonzero(active)[0]
            if idx.size == 0:
                break
            z, z1, z2 = self.derivatives(s[idx], 2)
            r = z - x_c[idx]
            f = np.real(np.conj(r) * z1)
            fp = np.abs(z1) ** 2 + np.real(np.conj(r) * z2)
            safe = fp > 1e-14 * np.abs(z1) ** 2
            step = np.where(safe, f / np.where(safe, fp, 1.0), np.sign(f) * clamp)
            step = np.clip(step, -clamp, clamp)
            s[idx] -= step
            active[idx] = np.abs(step) > tol.newton_step
        return np.mod(s, 2.0 * np.pi)

    def _seeds(self):
        cache = self.__dict__.get("_seed_cache")
        if cache is None:
            s, p = self.samples(N_SEEDS)
            cache = (s, p, cKDTree(p))
            object.__setattr__(self, "_seed_cache", cache)
        return cache

    def _batch(self, x, s) -> ProjectionBatch:
        fr = self.frame(s)
        sd = np.einsum("ni,ni->n", x - fr.point, fr.normal)
        return ProjectionBatch(x, s, fr.point, sd, fr.normal, fr.tangent,
                               fr.curvature, fr.dcurvature)

    def project_points(self, x, check=True, robust=False) -> ProjectionBatch:
        """Project a batch of points onto the curve.

        With ``check`` the points must lie inside the tubular band. ``robust``
        runs Newton from several seeds and keeps the nearest foot; use it for
        points far from the curve.
        """
        x = as_points(x)
        xc = to_complex(x)
        s_seed, _, tree = self._seeds()
        if robust:
            _, idx = tree.query(x, k=4)
            s0 = s_seed[idx].ravel()
            s = self._newton(np.repeat(xc, 4), s0.copy())
            d = np.abs(self.derivatives(s, 0)[0] - np.repeat(xc, 4)).reshape(-1, 4)
            s = s.reshape(-1, 4)[np.arange(len(x)), np.argmin(d, axis=1)]
        else:
            _, idx = tree.query(x)
            s = self._newton(xc, s_seed[idx].copy())
        batch = self._batch(x, s)
        if check:
            bad = np.abs(batch.sdist) >= self.r_c
            if np.any(bad):
                raise OutsideTubularNeighborhood(
                    f"{int(bad.sum())} point(s) with |sdist| >= r_c = {self.r_c}")
        return batch

    def project(self, x) -> ProjectionResult:
        """Nearest-point projection of a single point, with ambiguity detection."""
        x = np.asarray(x, dtype=float).reshape(2)
        s_seed, p_seed, _ = self._seeds()
        d = np.linalg.norm(p_seed - x, axis=1)
        minima = np.nonzero((d <= np.roll(d, 1)) & (d <= np.roll(d, -1)))[0]
        s = self._newton(np.full(minima.size, x[0] + 1j * x[1]), s_seed[minima].copy())
        feet = self.point(s)
        dist = np.linalg.norm(feet - x, axis=1)
        best = int(np.argmin(dist))
        close = np.abs(dist - dist[best]) < self.tol.ambiguity_distance
        if np.any(np.linalg.norm(feet[close] - feet[best], axis=1) > self.tol.ambiguity_separation):
            raise AmbiguousProjection(f"several nearest points for x = {x.tolist()}")
        batch = self._batch(x[None, :], np.array([s[best]]))
        if abs(batch.sdist[0]) >= self.r_c:
            raise OutsideTubularNeighborhood(f"|sdist| = {abs(batch.sdist[0]):.6g} >= r_c")
        return batch.item()

    def signed_distance(self, x) -> np.ndarray:
        """Signed distance, positive in the plus phase. Total function."""
        return self.project_points(x, check=False, robust=True).sdist

    # serialization ------------------------------------------------------
    def to_json(self) -> str:
        return json.dumps({
            "coeffs": [[float(c.real), float(c.imag)] for c in self.coeffs],
            "r_c": float(self.r_c),
            "interior_positive": bool(self.interior_positive),
        })

    @classmethod
    def from_json(cls, text: str) -> "InterfaceCurve":
        d = json.loads(text)
        c = np.array([a + 1j * b for a, b in d["coeffs"]])
        return cls(c, d["r_c"], d.get("interior_positive", True))


@dataclass(frozen=True, eq=False)
class FlatInterface:
    """Straight line through ``origin`` with inner normal ``normal``.

    Shares the projection interface of ``InterfaceCurve``; the parameter of a
    point is its coordinate along the tangent.
    """

    origin: tuple = (0.0, 0.0)
    normal_dir: tuple = (0.0, 1.0)
    r_c: float = 0.5

    @property
    def _frame(self):
        n = np.asarray(self.normal_dir, dtype=float)
        n = n / np.linalg.norm(n)
        t = np.array([n[1], -n[0]])
        return np.asarray(self.origin, dtype=float), n, t

    def frame(self, s) -> CurveFrame:
        s = np.asarray(s, dtype=float)
        p, n, t = self._frame
        zero = np.zeros_like(s)
        return CurveFrame(s, p + s[..., None] * t, np.broadcast_to(t, s.shape + (2,)),
                          np.broadcast_to(n, s.shape + (2,)), zero, zero, np.ones_like(s))

    def point(self, s):
        return self.frame(s).point

    def project_points(self, x, check=True, robust=False) -> ProjectionBatch:
        x = as_points(x)
        p, n, t = self._frame
        s = (x - p) @ t
        sd = (x - p) @ n
        if check and np.any(np.abs(sd) >= self.r_c):
            raise OutsideTubularNeighborhood("point outside the band of the flat interface")
        m = len(x)
        zero = np.zeros(m)
        return ProjectionBatch(x, s, p + s[:, None] * t, sd, np.tile(n, (m, 1)),
                               np.tile(t, (m, 1)), zero, zero)

    def project(self, x) -> ProjectionResult:
        return self.project_points(x).item()

    def signed_distance(self, x):
        return self.project_points(x, check=False).sdist

    def inside(self, x):
        return self.signed_distance(x) > 0.0


def signed_distance(curve, x):
    """Signed distance of one point (float) or a batch (array)."""
    x = np.asarray(x, dtype=float)
    d = curve.signed_distance(x)
    return float(d[0]) if x.ndim == 1 else d


def project(curve, x) -> ProjectionResult:
    return curve.project(x)


def curvature_vector(curve, s):
    """Curvature vector ``kappa * n`` at parameter(s) ``s``."""
    fr = curve.frame(np.asarray(s, dtype=float))
    return fr.curvature[..., None] * fr.normal


def check_sdist_transport(curve_at, v, x, t, dt, scheme="central"):
    """Residual ``|d/dt sdist + (Vbar_n . grad) sdist|`` at the points ``x``.

    ``curve_at`` maps a time to an interface. The time derivative is a central
    difference over ``[t - dt, t + dt]`` or a forward difference over
    ``[t, t + dt]``; the transport term is evaluated analytically at ``t``
    where ``grad sdist = n(Px)`` and ``Vbar_n . n = v(Px) . n(Px)``.
    """
    x = as_points(x)
    now = curve_at(t).project_points(x)
    later = curve_at(t + dt).project_points(x).sdist
    if scheme == "central":
        dsdt = (later - curve_at(t - dt).project_points(x).sdist) / (2.0 * dt)
    elif scheme == "forward":
        dsdt = (later - now.sdist) / dt
    else:
        raise ValueError(f"unknown scheme {scheme!r}")
    vn = np.einsum("ni,ni->n", v(now.foot, t), now.normal)
    return np.abs(dsdt + vn)
