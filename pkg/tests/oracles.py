"""Independent brute-force references used by the tests."""
import numpy as np
from numpy.polynomial.legendre import leggauss

from relent.profiles import BETA, ZETA


def gauss01(n):
    x, w = leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


def circle_xi(x, radius, r_c):
    """Extension field of a centered circle with the plus phase inside."""
    r = np.linalg.norm(x, axis=1)
    sd = radius - r
    return ZETA(sd / r_c)[:, None] * (-x / r[:, None])


def star_entropy(vertices, radius, r_c, u_minus_v, box, sigma=1.0, n_edge=16, n_box=1200):
    """Entropy parts of a star-shaped polygon against a centered circle.

    Tilt: Gauss points on every edge. Weight volume: per edge, exact ray
    intersection in polar angle and a radial Gauss rule. Kinetic: midpoint
    rule on the box (unit densities).
    """
    a = vertices
    b = np.roll(vertices, -1, axis=0)
    gx, gw = gauss01(n_edge)
    pts = a[:, None, :] + gx[None, :, None] * (b - a)[:, None, :]
    L = np.linalg.norm(b - a, axis=1)
    nrm = np.stack([-(b - a)[:, 1], (b - a)[:, 0]], axis=1) / L[:, None]
    xi = circle_xi(pts.reshape(-1, 2), radius, r_c).reshape(pts.shape)
    tilt = sigma * np.sum((1.0 - np.einsum("eqi,ei->eq", xi, nrm)) * gw[None, :] * L[:, None])

    th0 = np.arctan2(a[:, 1], a[:, 0])
    th1 = np.arctan2(b[:, 1], b[:, 0])
    dth = np.mod(th1 - th0, 2.0 * np.pi)
    rx, rw = gauss01(40)
    wv = 0.0
    for e in range(len(a)):
        th = th0[e] + gx * dth[e]
        d = np.stack([np.cos(th), np.sin(th)], axis=1)
        # ray intersection with the segment a + s (b - a)
        ab = b[e] - a[e]
        den = d[:, 0] * ab[1] - d[:, 1] * ab[0]
        s = -(d[:, 0] * a[e, 1] - d[:, 1] * a[e, 0]) / den
        R = np.linalg.norm(a[e] + s[:, None] * ab, axis=1)
        lo, hi = np.minimum(R, radius), np.maximum(R, radius)
        r = lo[:, None] + rx[None, :] * (hi - lo)[:, None]
        f = np.abs(BETA((radius - r) / r_c)) * r
        wv += np.sum(gw * dth[e] * (f * rw).sum(1) * (hi - lo))
    lo, hi = np.asarray(box[0], float), np.asarray(box[1], float)
    h = (hi - lo) / n_box
    xs = lo[0] + h[0] * (np.arange(n_box) + 0.5)
    ys = lo[1] + h[1] * (np.arange(n_box) + 0.5)
    X, Y = np.meshgrid(xs, ys)
    q = np.stack([X.ravel(), Y.ravel()], axis=1)
    kin = 0.5 * np.sum(u_minus_v(q) ** 2) * h[0] * h[1]
    return {"e_tilt": float(tilt), "e_weightvol": float(wv), "e_kinetic": float(kin)}
