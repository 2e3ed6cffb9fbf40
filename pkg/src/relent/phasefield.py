"""Weak-phase polygons, perimeter measures, varifolds and velocity fields."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import shapely

from .config import DEFAULT
from .errors import (DegeneratePolygon, IncompatibleVarifold, InvalidMultiplicity,
                     QuadratureNotConverged)
from .quadrature import box_rule, gauss, perimeter_rule, polygon_rule


def shoelace(ring) -> float:
    x, y = ring[:, 0], ring[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


# ---------------------------------------------------------------------------
# polygons


@dataclass(frozen=True, eq=False)
class PhasePolygon:
    """Polygonal phase indicator.

    ``rings`` are closed vertex loops (last vertex not repeated) oriented so
    that the phase lies to the left of every edge: outer boundaries run
    counterclockwise and holes clockwise. Several disjoint components are
    allowed.
    """

    rings: tuple

    def __post_init__(self):
        rings = []
        for r in self.rings:
            r = np.array(r, dtype=float).reshape(-1, 2)
            if len(r) > 1 and np.array_equal(r[0], r[-1]):
                r = r[:-1]
            if len(r) < 3:
                raise DegeneratePolygon("a ring needs at least three vertices")
            if np.any(np.linalg.norm(np.roll(r, -1, axis=0) - r, axis=1) == 0.0):
                raise DegeneratePolygon("zero-length edge")
            if shoelace(r) == 0.0 or not shapely.LinearRing(r).is_simple:
                raise DegeneratePolygon("ring has zero area or self-intersects")
            r.setflags(write=False)
            rings.append(r)
        object.__setattr__(self, "rings", tuple(rings))
        geom = self.to_shapely()
        if not geom.is_valid or abs(geom.area - self.area) > 1e-9 * max(1.0, abs(self.area)):
            raise DegeneratePolygon("rings are not a valid, consistently oriented polygon")

    @classmethod
    def from_vertices(cls, vertices, holes: Sequence = ()):
        """Outer loop plus optional holes; orientation is fixed automatically."""
        outer = np.asarray(vertices, dtype=float)
        if shoelace(outer) < 0:
            outer = outer[::-1]
        rings = [outer]
        for h in holes:
            h = np.asarray(h, dtype=float)
            rings.append(h[::-1] if shoelace(h) > 0 else h)
        return cls(tuple(rings))

    @classmethod
    def regular(cls, n, radius=1.0, center=(0.0, 0.0), phase=0.0):
        a = phase + 2.0 * np.pi * np.arange(n) / n
        return cls.from_vertices(np.c_[center[0] + radius * np.cos(a),
                                       center[1] + radius * np.sin(a)])

    @classmethod
    def union(cls, *polys: "PhasePolygon"):
        """Combine polygons with disjoint closures into one phase."""
        return cls(tuple(r for p in polys for r in p.rings))

    @property
    def edges(self):
        cache = self.__dict__.get("_edges")
        if cache is None:
            a = np.concatenate([r for r in self.rings])
            b = np.concatenate([np.roll(r, -1, axis=0) for r in self.rings])
            cache = (a, b)
            object.__setattr__(self, "_edges", cache)
        return cache

    @property
    def vertices(self):
        return np.concatenate(self.rings)

    @property
    def edge_lengths(self):
        a, b = self.edges
        return np.linalg.norm(b - a, axis=1)

    @property
    def edge_normals(self):
        """Unit inner normals (left of the edge direction)."""
        a, b = self.edges
        d = b - a
        return np.c_[-d[:, 1], d[:, 0]] / np.linalg.norm(d, axis=1)[:, None]

    @property
    def n_edges(self) -> int:
        return len(self.edges[0])

    @property
    def area(self) -> float:
        return float(sum(shoelace(r) for r in self.rings))

    @property
    def perimeter(self) -> float:
        return float(self.edge_lengths.sum())

    @property
    def apex(self):
        return self.vertices.mean(axis=0)

    def to_shapely(self):
        parts = []
        for r in self.rings:
            if shoelace(r) > 0:
                parts.append([r, []])
        for r in self.rings:
            if shoelace(r) < 0:
                p = shapely.Point(r[0])
                for part in parts:
                    if shapely.Polygon(part[0]).buffer(1e-12).contains(p):
                        part[1].append(r)
                        break
        polys = [shapely.Polygon(o, h) for o, h in parts]
        return polys[0] if len(polys) == 1 else shapely.MultiPolygon(polys)

    @classmethod
    def from_shapely(cls, geom) -> "PhasePolygon":
        """Convert a shapely (Multi)Polygon, dropping empty parts."""
        parts = getattr(geom, "geoms", [geom])
        rings = []
        for part in parts:
            if part.is_empty or part.geom_type != "Polygon":
                continue
            part = shapely.geometry.polygon.orient(part, 1.0)
            for ring in [part.exterior, *part.interiors]:
                r = np.asarray(ring.coords)[:-1]
                keep = np.linalg.norm(np.roll(r, -1, axis=0) - r, axis=1) > 0.0
                rings.append(r[keep])
        if not rings:
            raise DegeneratePolygon("empty geometry")
        return cls(tuple(rings))

    def contains(self, x):
        x = np.atleast_2d(x)
        return shapely.contains_xy(self.to_shapely(), x[:, 0], x[:, 1])

    def map(self, fn) -> "PhasePolygon":
        """Apply a point map to every vertex (orientation is kept)."""
        return PhasePolygon(tuple(fn(r) for r in self.rings))

    def to_json(self) -> str:
        return json.dumps({"rings": [r.tolist() for r in self.rings]})

    @classmethod
    def from_json(cls, text: str) -> "PhasePolygon":
        return cls(tuple(np.array(r) for r in json.loads(text)["rings"]))


@dataclass(frozen=True)
class PerimeterMeasure:
    points: np.ndarray
    normals: np.ndarray
    weights: np.ndarray
    edge: np.ndarray

    @property
    def mass(self) -> float:
        return float(self.weights.sum())


def perimeter_measure(poly: PhasePolygon, n_quad: int = 2) -> PerimeterMeasure:
    """Gauss quadrature of ``|grad chi|`` with the inner edge normals."""
    if n_quad < 1:
        raise ValueError("n_quad must be at least 1")
    a, b = poly.edges
    pts, w, idx = perimeter_rule(a, b, n_quad)
    return PerimeterMeasure(pts, poly.edge_normals[idx], w, idx)


# ---------------------------------------------------------------------------
# varifolds


@dataclass(frozen=True)
class VarifoldMeasure:
    """Weighted atoms ``(position, direction, mass)`` on position x circle.

    Atoms are grouped into sites; ``site_weight`` is the perimeter mass of
    the weak phase at each site, so the multiplicity density is
    ``site_weight / (varifold mass at the site)``.
    """

    positions: np.ndarray
    directions: np.ndarray
    masses: np.ndarray
    site: np.ndarray
    site_weight: np.ndarray
    n_quad: int = 2

    def __post_init__(self):
        if np.any(self.masses < 0):
            raise InvalidMultiplicity("negative varifold mass")
        norm = np.linalg.norm(self.directions, axis=1)
        if np.any(np.abs(norm - 1.0) > DEFAULT.unit_vector):
            raise InvalidMultiplicity("varifold directions must be unit vectors")

    @property
    def total_mass(self) -> float:
        return float(self.masses.sum())

    def site_mass(self):
        return np.bincount(self.site, weights=self.masses, minlength=len(self.site_weight))

    def theta_sites(self):
        m = self.site_mass()
        return np.divide(self.site_weight, m, out=np.zeros_like(m), where=m > 0)

    def theta(self):
        """Multiplicity density at every atom."""
        return self.theta_sites()[self.site]

    def to_json(self) -> str:
        return json.dumps({
            "atoms": [{"position": p.tolist(), "direction": d.tolist(), "mass": float(m),
                       "site": int(s)}
                      for p, d, m, s in zip(self.positions, self.directions,
                                            self.masses, self.site)],
            "site_weight": self.site_weight.tolist(),
            "n_quad": self.n_quad,
        })

    @classmethod
    def from_json(cls, text: str) -> "VarifoldMeasure":
        d = json.loads(text)
        atoms = d["atoms"]
        return cls(np.array([a["position"] for a in atoms], dtype=float).reshape(-1, 2),
                   np.array([a["direction"] for a in atoms], dtype=float).reshape(-1, 2),
                   np.array([a["mass"] for a in atoms], dtype=float),
                   np.array([a["site"] for a in atoms], dtype=int),
                   np.array(d["site_weight"], dtype=float), d.get("n_quad", 2))


def lift_varifold(poly: PhasePolygon, multiplicity=1.0, n_quad: int = 2) -> VarifoldMeasure:
    """Varifold carried by the polygon boundary with per-edge multiplicity.

    An edge of multiplicity ``m`` gets mass ``(m + 1) / 2`` along the inner
    normal and ``(m - 1) / 2`` along its opposite, so the total mass is ``m``
    times the perimeter while the first moment still equals the normal. This
    keeps the compatibility condition exact.
    """
    mult = np.broadcast_to(np.asarray(multiplicity, dtype=float), (poly.n_edges,))
    if np.any(mult < 1.0):
        raise InvalidMultiplicity("multiplicity must be >= 1")
    pm = perimeter_measure(poly, n_quad)
    m = mult[pm.edge]
    sites = np.arange(len(pm.weights))
    extra = m > 1.0
    pos = np.concatenate([pm.points, pm.points[extra]])
    dirs = np.concatenate([pm.normals, -pm.normals[extra]])
    mass = np.concatenate([0.5 * (m + 1.0) * pm.weights, 0.5 * (m[extra] - 1.0) * pm.weights[extra]])
    site = np.concatenate([sites, sites[extra]])
    return VarifoldMeasure(pos, dirs, mass, site, pm.weights.copy(), n_quad)


def compatibility_residual(varifold: VarifoldMeasure, poly: PhasePolygon, psi) -> float:
    """``|sum psi s dV - sum psi n_u d|grad chi||`` for a scalar test function."""
    pm = perimeter_measure(poly, varifold.n_quad)
    if len(pm.weights) != len(varifold.site_weight):
        raise IncompatibleVarifold("varifold sites do not match the perimeter measure")
    lhs = (psi(varifold.positions)[:, None] * varifold.directions * varifold.masses[:, None]).sum(0)
    rhs = (psi(pm.points)[:, None] * pm.normals * pm.weights[:, None]).sum(0)
    return float(np.linalg.norm(lhs - rhs))


# ---------------------------------------------------------------------------
# velocity fields


@dataclass(frozen=True)
class Physics:
    rho_plus: float = 1.0
    rho_minus: float = 1.0
    mu_plus: float = 1.0
    mu_minus: float = 1.0
    sigma: float = 1.0

    def rho(self, chi):
        return self.rho_minus + (self.rho_plus - self.rho_minus) * chi

    def mu(self, chi):
        return self.mu_minus + (self.mu_plus - self.mu_minus) * chi


Field = Callable[[np.ndarray, float], np.ndarray]


def _zero_dt(x, t):
    return np.zeros_like(np.atleast_2d(x), dtype=float)


@dataclass(frozen=True, eq=False)
class VelocityField:
    """Velocity with Jacobian ``J[i, j] = d v_i / d x_j``.

    A two-sided field carries a separate ``minus`` branch and a ``phase``
    selector returning True in the plus phase. ``side=+1/-1`` forces a branch.
    """

    value: Field
    jacobian: Field
    physics: Physics = field(default_factory=Physics)
    time_derivative: Field | None = None
    minus: "VelocityField | None" = None
    phase: Callable | None = None

    def _branch(self, x, t, side, attr):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        out = getattr(self, attr)(x, t)
        if self.minus is None or side == 1:
            return out
        alt = getattr(self.minus, attr)(x, t)
        if side == -1:
            return alt
        plus = self.phase(x, t)
        mask = plus.reshape((-1,) + (1,) * (out.ndim - 1))
        return np.where(mask, out, alt)

    def __call__(self, x, t=0.0, side=None):
        return self._branch(x, t, side, "value")

    def grad(self, x, t=0.0, side=None):
        return self._branch(x, t, side, "jacobian")

    def dt(self, x, t=0.0, side=None, h=1e-6):
        both = self.minus is None or self.minus.time_derivative is not None
        if self.time_derivative is not None and both:
            return self._branch(x, t, side, "time_derivative")
        return (self(x, t + h, side) - self(x, t - h, side)) / (2.0 * h)

    def sym_grad(self, x, t=0.0, side=None):
        j = self.grad(x, t, side)
        return 0.5 * (j + np.swapaxes(j, 1, 2))

    def with_physics(self, physics: Physics) -> "VelocityField":
        minus = self.minus.with_physics(physics) if self.minus is not None else None
        return VelocityField(self.value, self.jacobian, physics, self.time_derivative,
                             minus, self.phase)

    def __add__(self, other: "VelocityField") -> "VelocityField":
        if self.minus is not None or other.minus is not None:
            raise ValueError("sums of two-sided fields are not supported")
        dts = (self.time_derivative, other.time_derivative)
        td = None
        if all(d is not None for d in dts):
            def td(x, t):
                return dts[0](x, t) + dts[1](x, t)
        return VelocityField(lambda x, t: self.value(x, t) + other.value(x, t),
                             lambda x, t: self.jacobian(x, t) + other.jacobian(x, t),
                             self.physics, td)

    def max_divergence(self, x, t=0.0) -> float:
        j = self.grad(x, t)
        return float(np.max(np.abs(j[:, 0, 0] + j[:, 1, 1])))

    # factories ----------------------------------------------------------
    @classmethod
    def linear(cls, matrix, offset=(0.0, 0.0), center=(0.0, 0.0), physics=None):
        """``v(x) = offset + A (x - center)``."""
        a = np.asarray(matrix, dtype=float)
        b = np.asarray(offset, dtype=float)
        c = np.asarray(center, dtype=float)
        return cls(lambda x, t: b + (np.atleast_2d(x) - c) @ a.T,
                   lambda x, t: np.broadcast_to(a, (len(np.atleast_2d(x)), 2, 2)).copy(),
                   physics or Physics(), _zero_dt)

    @classmethod
    def constant(cls, velocity, physics=None):
        return cls.linear(np.zeros((2, 2)), velocity, physics=physics)

    @classmethod
    def rotation(cls, omega=1.0, center=(0.0, 0.0), physics=None):
        return cls.linear([[0.0, -omega], [omega, 0.0]], center=center, physics=physics)

    @classmethod
    def shear(cls, rate=1.0, physics=None):
        return cls.linear([[0.0, rate], [0.0, 0.0]], physics=physics)

    @classmethod
    def extensional(cls, rate=1.0, center=(0.0, 0.0), physics=None):
        return cls.linear([[rate, 0.0], [0.0, -rate]], center=center, physics=physics)

    @classmethod
    def gaussian_vortex(cls, center, width, strength, physics=None):
        """Solenoidal field ``(d_y psi, -d_x psi)`` of ``psi = A exp(-|x-c|^2/l^2)``."""
        c = np.asarray(center, dtype=float)
        l2 = float(width) ** 2

        def parts(x):
            r = np.atleast_2d(x) - c
            psi = strength * np.exp(-(r**2).sum(1) / l2)
            return r, psi

        def value(x, t):
            r, psi = parts(x)
            return np.c_[-2.0 * r[:, 1] / l2 * psi, 2.0 * r[:, 0] / l2 * psi]

        def jac(x, t):
            r, psi = parts(x)
            pxx = (4.0 * r[:, 0] ** 2 / l2**2 - 2.0 / l2) * psi
            pyy = (4.0 * r[:, 1] ** 2 / l2**2 - 2.0 / l2) * psi
            pxy = 4.0 * r[:, 0] * r[:, 1] / l2**2 * psi
            out = np.empty((len(r), 2, 2))
            out[:, 0, 0] = pxy
            out[:, 0, 1] = pyy
            out[:, 1, 0] = -pxx
            out[:, 1, 1] = -pxy
            return out

        return cls(value, jac, physics or Physics(), _zero_dt)

    @classmethod
    def comoving(cls, base: "VelocityField", drift):
        """``v(x, t) = drift + base(x - drift t)``: a pattern carried along."""
        c = np.asarray(drift, dtype=float)

        def value(x, t):
            return c + base.value(np.atleast_2d(x) - c * t, t)

        def jac(x, t):
            return base.jacobian(np.atleast_2d(x) - c * t, t)

        def dt(x, t):
            j = jac(x, t)
            return -np.einsum("nij,j->ni", j, c)

        return cls(value, jac, base.physics, dt)

    @classmethod
    def two_sided(cls, plus: "VelocityField", minus: "VelocityField", phase, physics=None):
        return cls(plus.value, plus.jacobian, physics or plus.physics,
                   plus.time_derivative, minus, phase)


ZERO = VelocityField.constant((0.0, 0.0))


@dataclass(frozen=True)
class ScalarField:
    """Test function with gradient and optional time derivative."""

    value: Field
    grad: Field
    dt: Field | None = None


# ---------------------------------------------------------------------------
# weak-form checks


def transport_residual(poly_at, v: VelocityField, phi: ScalarField, t0, t1, n_time=8,
                       n_sub=1, area_order=(12, 3)) -> float:
    """Residual of the weak transport identity on ``[t0, t1]``.

    ``poly_at`` maps a time to the transported polygon. The time integral is
    composite Gauss-Legendre with ``n_sub`` panels of ``n_time`` nodes.
    """
    if v is ZERO:
        return 0.0

    def integral(t, f):
        pts, w = polygon_rule(poly_at(t), *area_order)
        return float(np.dot(w, f(pts, t)))

    def rate(x, t):
        g = phi.grad(x, t)
        dt = phi.dt(x, t) if phi.dt is not None else 0.0
        return dt + np.einsum("ni,ni->n", v(x, t), g)

    gx, gw = gauss(n_time)
    edges = np.linspace(t0, t1, n_sub + 1)
    flux = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        for x, w in zip(a + (b - a) * gx, (b - a) * gw):
            flux += w * integral(x, rate)
    return abs(integral(t1, phi.value) - integral(t0, phi.value) - flux)


def default_box(poly: PhasePolygon, pad: float):
    v = poly.vertices
    return v.min(axis=0) - pad, v.max(axis=0) + pad


def volume_integral(poly: PhasePolygon, f_all, f_phase, box, n_cells=64, order=4,
                    area_order=(12, 3)) -> float:
    """``int_box f_all + int_{chi = 1} f_phase``."""
    total = 0.0
    if f_all is not None:
        pts, w = box_rule(*box, n_cells=n_cells, order=order)
        total += float(np.dot(w, f_all(pts)))
    if f_phase is not None:
        pts, w = polygon_rule(poly, *area_order)
        total += float(np.dot(w, f_phase(pts)))
    return total


def kinetic_energy(poly: PhasePolygon, v: VelocityField, t, box, physics: Physics,
                   n_cells=64, order=4, area_order=(12, 3)) -> float:
    def half_sq(x):
        return 0.5 * (v(x, t) ** 2).sum(1)

    drho = physics.rho_plus - physics.rho_minus
    f_all = (lambda x: physics.rho_minus * half_sq(x)) if physics.rho_minus else None
    f_phase = (lambda x: drho * half_sq(x)) if drho else None
    return volume_integral(poly, f_all, f_phase, box, n_cells, order, area_order)


def energy(poly: PhasePolygon, v: VelocityField, varifold: VarifoldMeasure, t=0.0,
           box=None, pad=1.0, n_cells=32, order=4, rel_tol=None) -> float:
    """Kinetic energy over a bounding box plus ``sigma`` times the varifold mass.

    The volume term is evaluated at two resolutions; the finer value is
    returned and ``QuadratureNotConverged`` is raised if they disagree.
    """
    phys = v.physics
    box = box if box is not None else default_box(poly, pad)
    coarse = kinetic_energy(poly, v, t, box, phys, n_cells, order, (8, 2))
    fine = kinetic_energy(poly, v, t, box, phys, 2 * n_cells, order, (16, 4))
    tol = DEFAULT.quadrature_rel if rel_tol is None else rel_tol
    if abs(fine - coarse) > tol * max(abs(fine), 1e-300):
        raise QuadratureNotConverged(f"kinetic energy {coarse} vs {fine}")
    return fine + phys.sigma * varifold.total_mass
