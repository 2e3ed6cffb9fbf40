"""Viscosity-jump compensation field.

``W`` is the tangential stress vector, ``w+ / w-`` integrate it along normal
rays over the mollified heights, and the divergence-free correction removes
the gradient part spectrally on a periodic box.
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import map_coordinates

from .errors import BandOverflow, GridTooCoarse
from .geometry import as_points
from .heights import MollifiedHeight
from .profiles import THETA
from .quadrature import gauss


def _sym_grad_sided(v, x, t, plus):
    """Symmetric gradient taking the plus branch where ``plus`` is true."""
    if getattr(v, "minus", None) is None:
        return v.sym_grad(x, t)
    out = np.empty((len(x), 2, 2))
    if plus.any():
        out[plus] = v.sym_grad(x[plus], t, side=1)
    if (~plus).any():
        out[~plus] = v.sym_grad(x[~plus], t, side=-1)
    return out


def _jump_factor(physics, chi_v):
    mp, mm = physics.mu_plus, physics.mu_minus
    return 2.0 * (mp - mm) / (mp * (1.0 - chi_v) + mm * chi_v)


def stress_at(v, foot, normal, y, t=0.0):
    """``W(foot + y n)`` for tube coordinates; ``y >= 0`` is the plus phase."""
    phys = v.physics
    if phys.mu_plus == phys.mu_minus:
        return np.zeros((len(y), 2))
    x = foot + y[:, None] * normal
    plus = y >= 0.0
    d = _sym_grad_sided(v, x, t, plus)
    dn = np.einsum("nij,nj->ni", d, normal)
    dn -= np.einsum("ni,ni->n", dn, normal)[:, None] * normal
    return _jump_factor(phys, plus.astype(float))[:, None] * dn


def stress_jump_W(v, curve, x, t=0.0):
    """Tangential stress-jump vector at points inside the band."""
    x = np.asarray(x, dtype=float)
    b = curve.project_points(as_points(x))
    out = stress_at(v, b.foot, b.normal, b.sdist, t)
    return out[0] if x.ndim == 1 else out


def _height_fn(h, side):
    if isinstance(h, MollifiedHeight):
        return lambda s: h.at(s, side)
    if callable(h):
        return lambda s: np.broadcast_to(h(s, side), np.shape(s))
    if isinstance(h, (tuple, list)):
        val = h[0] if side > 0 else h[1]
    else:
        val = h
    return lambda s: np.full(np.shape(s), float(val))


def check_heights(h, r_c):
    if isinstance(h, MollifiedHeight):
        top = max(h.h_plus.max(), h.h_minus.max())
    elif isinstance(h, (tuple, list)):
        top = max(h)
    elif callable(h):
        return
    else:
        top = float(h)
    if top > 0.5 * r_c:
        raise BandOverflow(f"height {top:.4g} exceeds r_c / 2 = {0.5 * r_c:.4g}")


def band_cutoff(sdist, r_c):
    return THETA(np.abs(sdist) / r_c)


def w_raw_points(v, curve, h_e, x, t=0.0, n_y=8, batch=None):
    """Evaluate ``w+ + w-`` at arbitrary points.

    ``h_e`` is a ``MollifiedHeight``, a constant, a ``(plus, minus)`` pair or a
    callable ``(param, side) -> height``.
    """
    check_heights(h_e, curve.r_c)
    x = as_points(x)
    out = np.zeros((len(x), 2))
    phys = v.physics
    if phys.mu_plus == phys.mu_minus:
        return out
    if batch is None:
        batch = curve.project_points(x, check=False)
    eta = band_cutoff(batch.sdist, curve.r_c)
    live = np.nonzero(eta > 0.0)[0]
    if live.size == 0:
        return out
    b = batch.subset(live)
    gx, gw = gauss(n_y)
    for side in (1, -1):
        hs = _height_fn(h_e, side)(b.param)
        reach = np.minimum(np.maximum(side * b.sdist, 0.0), hs)
        idx = np.nonzero(reach > 0.0)[0]
        if idx.size == 0:
            continue
        y = side * reach[idx, None] * gx[None, :]
        foot = np.repeat(b.foot[idx], n_y, axis=0)
        nrm = np.repeat(b.normal[idx], n_y, axis=0)
        wv = stress_at(v, foot, nrm, y.ravel(), t).reshape(len(idx), n_y, 2)
        integral = np.einsum("q,nqi->ni", gw, wv) * reach[idx, None]
        out[live[idx]] += eta[live[idx], None] * integral
    return out


# ---------------------------------------------------------------------------
# periodic grids


@dataclass(frozen=True)
class Grid:
    lo: np.ndarray
    side: float
    n: int

    @property
    def h(self) -> float:
        return self.side / self.n

    def axis(self, k):
        return self.lo[k] + self.h * np.arange(self.n)

    def nodes(self):
        xx, yy = np.meshgrid(self.axis(0), self.axis(1), indexing="ij")
        return np.stack([xx.ravel(), yy.ravel()], axis=1)

    def wavenumbers(self):
        """Angular wavenumbers with the Nyquist mode zeroed."""
        k = 2.0 * np.pi * np.fft.fftfreq(self.n, d=self.h)
        if self.n % 2 == 0:
            k[self.n // 2] = 0.0
        return k

    def header(self, t=0.0) -> dict:
        return {"N": self.n, "box": [float(self.lo[0]), float(self.lo[1]),
                                     float(self.lo[0] + self.side), float(self.lo[1] + self.side)],
                "t": float(t)}


def make_grid(curve, n=512, center=None, side=None) -> Grid:
    """Periodic box of side ``diameter + 6 r_c`` around the curve."""
    if side is None:
        side = curve.diameter() + 6.0 * curve.r_c
    if center is None:
        _, pts = curve.samples(1024)
        center = 0.5 * (pts.min(axis=0) + pts.max(axis=0))
    grid = Grid(np.asarray(center, dtype=float) - 0.5 * side, float(side), int(n))
    if 0.5 * curve.r_c / grid.h < 4:
        raise GridTooCoarse(f"band half-width r_c/2 = {0.5 * curve.r_c:.3g} spans fewer than 4 cells of {grid.h:.3g}")
    return grid


def spectral_gradient(grid: Grid, field):
    """``G[i, j] = d_j field_i`` for a ``(2, n, n)`` field."""
    k = grid.wavenumbers()
    fh = np.fft.fft2(field, axes=(1, 2))
    kx = k[:, None]
    ky = k[None, :]
    out = np.empty((2, 2, grid.n, grid.n))
    for i in range(2):
        out[i, 0] = np.real(np.fft.ifft2(1j * kx * fh[i]))
        out[i, 1] = np.real(np.fft.ifft2(1j * ky * fh[i]))
    return out


def spectral_divergence(grid: Grid, field):
    g = spectral_gradient(grid, field)
    return g[0, 0] + g[1, 1]


def leray(grid: Grid, field):
    """Remove the gradient part: ``w - k (k . w) / |k|^2`` mode by mode."""
    k = grid.wavenumbers()
    kx = k[:, None]
    ky = k[None, :]
    k2 = kx * kx + ky * ky
    inv = np.divide(1.0, k2, out=np.zeros_like(k2), where=k2 > 0)
    fh = np.fft.fft2(field, axes=(1, 2))
    dot = (kx * fh[0] + ky * fh[1]) * inv
    out = np.empty_like(field)
    out[0] = np.real(np.fft.ifft2(fh[0] - kx * dot))
    out[1] = np.real(np.fft.ifft2(fh[1] - ky * dot))
    return out


@dataclass(frozen=True, eq=False)
class CompensationField:
    """Grid field with spline interpolation of values and spectral gradients."""

    grid: Grid
    values: np.ndarray  # (2, n, n)
    raw: np.ndarray | None = None
    t: float = 0.0

    def _coords(self, x):
        x = as_points(x)
        return ((x - self.grid.lo) / self.grid.h).T

    def __call__(self, x):
        c = self._coords(x)
        return np.stack([map_coordinates(self.values[i], c, order=3, mode="grid-wrap")
                         for i in range(2)], axis=1)

    @property
    def gradient_grid(self):
        g = self.__dict__.get("_grad")
        if g is None:
            g = spectral_gradient(self.grid, self.values)
            object.__setattr__(self, "_grad", g)
        return g

    def grad(self, x):
        c = self._coords(x)
        g = self.gradient_grid
        out = np.empty((c.shape[1], 2, 2))
        for i in range(2):
            for j in range(2):
                out[:, i, j] = map_coordinates(g[i, j], c, order=3, mode="grid-wrap")
        return out

    def l2_norm(self, which="values") -> float:
        f = self.values if which == "values" else self.raw
        return float(np.sqrt(np.sum(f**2) * self.grid.h**2))

    def max_divergence(self) -> float:
        return float(np.max(np.abs(spectral_divergence(self.grid, self.values))))

    def is_zero(self) -> bool:
        return not np.any(self.values)

    def export(self, stem):
        """Write ``stem.bin`` (little-endian float64, row-major) and ``stem.json``."""
        np.ascontiguousarray(self.values, dtype="<f8").tofile(f"{stem}.bin")
        head = self.grid.header(self.t)
        head["shape"] = list(self.values.shape)
        with open(f"{stem}.json", "w") as fh:
            json.dump(head, fh, sort_keys=True)


def build_w_raw(v, curve, h_e, grid: Grid, t=0.0, n_y=8):
    """``w+ + w-`` sampled at the grid nodes, shape ``(2, n, n)``."""
    vals = w_raw_points(v, curve, h_e, grid.nodes(), t, n_y)
    return vals.T.reshape(2, grid.n, grid.n)


def solenoidal_correct(grid: Grid, w_raw, t=0.0) -> CompensationField:
    return CompensationField(grid, leray(grid, w_raw), w_raw, t)


def compensation_field(v, curve, h_e, grid: Grid | None = None, t=0.0, n=512):
    grid = grid or make_grid(curve, n)
    return solenoidal_correct(grid, build_w_raw(v, curve, h_e, grid, t), t)


def normal_derivative_check(v, curve, h_e, x, t=0.0, step=1e-6):
    """``max |(n . grad) w_raw - W|`` at points inside ``0 < sdist < h+``.

    The directional derivative is a central difference of the pointwise
    primitive; inside the graph region on the minus side the expected value
    is ``-W`` since ``w-`` integrates from the point up to the interface.
    """
    x = as_points(x)
    b = curve.project_points(x)
    up = w_raw_points(v, curve, h_e, x + step * b.normal, t)
    down = w_raw_points(v, curve, h_e, x - step * b.normal, t)
    dn = (up - down) / (2.0 * step)
    expected = np.sign(b.sdist)[:, None] * stress_at(v, b.foot, b.normal, b.sdist, t)
    return float(np.max(np.linalg.norm(dn - expected, axis=1)))


def height_budget(h_e: MollifiedHeight) -> float:
    """``int |h+|^2 + |grad h+|^2 + |h-|^2 + |grad h-|^2 dS``."""
    s = h_e.params
    ds = h_e.raw.ds
    total = 0.0
    for side in (1, -1):
        total += np.sum((h_e.at(s, side) ** 2 + h_e.arclength_derivative(s, side) ** 2) * ds)
    return float(total)


def gradient_structure_check(w: CompensationField, v, curve, h_e, t=0.0, step=1e-7) -> dict:
    """L^2 deviation of ``grad w`` from the graph-region leading term.

    The leading term is ``W (x) n`` on ``0 <= sdist <= h+`` and ``-W (x) n`` on
    ``-h- <= sdist <= 0``. The raw primitive is differentiated pointwise by
    central differences (its kinks are resolved exactly), while the smooth
    gradient correction ``w_raw - w`` is differentiated spectrally. Returns
    the squared deviation, the height budget and their ratio, together with
    the analogous ratio for ``||w||^2``.
    """
    nodes = w.grid.nodes()
    b = curve.project_points(nodes, check=False)
    band = np.nonzero(np.abs(b.sdist) < 0.5 * curve.r_c)[0]
    bb = b.subset(band)
    dev_raw = np.zeros((len(band), 2, 2))
    for j in range(2):
        e = np.zeros(2)
        e[j] = step
        up = w_raw_points(v, curve, h_e, bb.x + e, t)
        down = w_raw_points(v, curve, h_e, bb.x - e, t)
        dev_raw[:, :, j] = (up - down) / (2.0 * step)
    for side in (1, -1):
        hs = _height_fn(h_e, side)(bb.param)
        region = (side * bb.sdist >= 0.0) & (side * bb.sdist <= hs)
        if region.any():
            br = bb.subset(region)
            wv = stress_at(v, br.foot, br.normal, br.sdist, t)
            dev_raw[region] -= side * np.einsum("ni,nj->nij", wv, br.normal)
    corr = spectral_gradient(w.grid, w.raw - w.values).reshape(2, 2, -1).transpose(2, 0, 1)
    dev = -corr
    dev[band] += dev_raw
    dev_sq = float(np.sum(dev**2) * w.grid.h**2)
    budget = height_budget(h_e) if isinstance(h_e, MollifiedHeight) else np.nan
    w_sq = w.l2_norm() ** 2
    return {"deviation_sq": dev_sq, "budget": budget,
            "ratio": dev_sq / budget if budget else np.nan,
            "w_l2_sq": w_sq, "w_ratio": w_sq / budget if budget else np.nan}
