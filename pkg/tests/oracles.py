"""Independent reference computations used by the tests.

The minimal speed is recomputed by brute force: the dispersion integral is
evaluated on a dense (lambda, c) grid, the crossing speed is interpolated on
every lambda column and the window is zoomed around the minimum.  The
integral itself uses closed forms or a pole-subtracted Gauss-Legendre rule,
never the package's quadrature.
"""

import math

import numpy as np

GRID = 2000
ZOOMS = 3


def uniform_I(r, v_max):
    def I(lam, c):
        lo = 1.0 + lam * (c - v_max)
        hi = 1.0 + lam * (c + v_max)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = (1.0 + r) / (2.0 * v_max * lam) * np.log(hi / lo)
        return np.where(lo > 0, out, np.inf)

    return I


def truncated_gaussian_I(r, sigma, A, nodes=200):
    x, w = np.polynomial.legendre.leggauss(nodes)
    v = A * x
    w = A * w
    mass = math.erf(A / (math.sqrt(2.0) * sigma))

    def M(y):
        return np.exp(-0.5 * (y / sigma) ** 2) / (math.sqrt(2 * math.pi) * sigma * mass)

    Mv = M(v)

    def I(lam, c):
        lam = np.asarray(lam, dtype=float)
        c = np.asarray(c, dtype=float)
        lam, c = np.broadcast_arrays(lam, c)
        out = np.full(lam.shape, np.inf)
        ok = 1.0 + lam * (c - A) > 0
        p = c[ok] + 1.0 / lam[ok]  # pole, beyond A
        Mp = M(p)
        flat_p = p.reshape(-1, 1)
        smooth = ((Mv[None, :] - Mp[:, None]) / (flat_p - v[None, :])) @ w
        total = smooth + Mp * np.log((p + A) / (p - A))
        out[ok] = (1.0 + r) / lam[ok] * total
        return out

    return I


def grid_scan_speed(I, lam_range, c_range, n=GRID, zooms=ZOOMS, chunk=100):
    """Minimum over lambda of the speed at which ``I(lambda, c)`` crosses 1."""
    (l0, l1), (c0, c1) = lam_range, c_range
    for _ in range(zooms + 1):
        lam = np.linspace(l0, l1, n)
        cs = np.linspace(c0, c1, n)
        cross = np.full(n, np.inf)
        for s in range(0, n, chunk):
            L = lam[s:s + chunk, None]
            vals = I(L * np.ones((1, n)), np.ones_like(L) * cs[None, :])
            below = vals <= 1.0
            for k in range(L.shape[0]):
                idx = np.argmax(below[k])
                if not below[k, idx] or idx == 0:
                    continue
                f0, f1 = vals[k, idx - 1], vals[k, idx]
                if not np.isfinite(f0):
                    continue
                cross[s + k] = cs[idx - 1] + (f0 - 1.0) / (f0 - f1) * (cs[idx] - cs[idx - 1])
        j = int(np.argmin(cross))
        best_c, best_l = float(cross[j]), float(lam[j])
        hl, hc = lam[1] - lam[0], cs[1] - cs[0]
        l0, l1 = max(best_l - 20 * hl, 1e-12), best_l + 20 * hl
        c0, c1 = best_c - 20 * hc, best_c + 20 * hc
    return best_c, best_l


def two_atom_speed(r, v_max):
    return 2.0 * math.sqrt(r) * v_max / (1.0 + r) if r < 1 else v_max
