"""Velocity kernels and the quadrature rules used to integrate against them.

A kernel is either continuous (a density on an interval or on the real line)
or atomic (finitely many velocities with weights).  Every integral in the
package goes through :meth:`VelocityKernel.rule`, which returns nodes and
mass weights ``m_j`` such that ``sum(m_j * h(v_j))`` approximates the
integral of ``h`` against the kernel.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.special import erf

DEFAULT_NODES = 256
PANEL_ORDER = 8
# Gaussian tails beyond this many standard deviations are below 1e-31.
GAUSSIAN_CUTOFF = 12.0
GRADING = 0.25
GRADED_PANELS = 26


class KernelError(ValueError):
    pass


@dataclass(frozen=True)
class Moments:
    mass: float
    mean: float
    diffusivity: float


@dataclass(frozen=True, eq=False)
class VelocityKernel:
    name: str
    kind: str  # "continuous" or "atomic"
    support: tuple[float, float]
    density: Callable | None = None
    atoms: tuple[np.ndarray, np.ndarray] | None = None
    params: dict = field(default_factory=dict)
    breakpoints: np.ndarray | None = None
    mapping: str = "interval"  # "interval", "gaussian_line", "cauchy_line"
    n_nodes: int = DEFAULT_NODES

    def __call__(self, v):
        if self.kind != "continuous":
            raise KernelError("atomic kernels have no pointwise density")
        v = np.asarray(v, dtype=float)
        lo, hi = self.support
        out = np.asarray(self.density(v), dtype=float)
        return np.where((v >= lo) & (v <= hi), out, 0.0)

    @property
    def bounded(self) -> bool:
        return math.isfinite(self.support[0]) and math.isfinite(self.support[1])

    @property
    def v_max(self) -> float:
        return self.support[1]

    def rule(self, n: int | None = None, graded: bool = False) -> tuple[np.ndarray, np.ndarray]:
        """Nodes and mass weights (quadrature weight times density).

        ``graded`` adds geometrically shrinking panels at the upper edge of a
        bounded support, where ``1 / (1 + lam (c - v))`` becomes nearly singular.
        """
        if self.kind == "atomic":
            v, w = self.atoms
            return v.copy(), w.copy()
        n = self.n_nodes if n is None else int(n)
        nodes, qw = _quadrature(self, n, graded and self.bounded)
        return nodes, qw * self.density(nodes)

    def discrete(self, n: int | None = None) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Nodes, plain weights ``q`` and density values ``M`` with ``sum(q * M) == 1``."""
        if self.kind == "atomic":
            v, w = self.atoms
            return v.copy(), np.ones_like(v), w / w.sum()
        n = self.n_nodes if n is None else int(n)
        nodes, qw = _quadrature(self, n)
        M = self.density(nodes)
        return nodes, qw, M / float(np.sum(qw * M))

    def integrate(self, integrand: Callable, n: int | None = None) -> float:
        nodes, m = self.rule(n)
        vals = np.asarray(integrand(nodes), dtype=float)
        out = float(np.sum(m * vals))
        if not math.isfinite(out):
            raise KernelError(f"non-finite integral for kernel {self.name}")
        return out

    def moments(self) -> Moments:
        nodes, m = self.rule()
        mass = float(m.sum())
        mean = float(np.sum(m * nodes)) / mass
        if self.mapping == "cauchy_line":
            return Moments(mass, 0.0, math.inf)
        d = float(np.sum(m * nodes**2))
        return Moments(mass, mean, d)

    def is_symmetric(self, tol: float = 1e-12) -> bool:
        lo, hi = self.support
        if not math.isclose(lo, -hi, rel_tol=0, abs_tol=tol * max(1.0, abs(hi))):
            return False
        if self.kind == "atomic":
            v, w = self.atoms
            order = np.argsort(v)
            return np.allclose(v[order], -v[order][::-1], atol=tol) and np.allclose(
                w[order], w[order][::-1], atol=tol
            )
        probe = np.linspace(0.0, hi if self.bounded else 10.0, 257)
        return bool(np.allclose(self(probe), self(-probe), atol=tol, rtol=tol))

    def scaled(self, sigma: float) -> "VelocityKernel":
        """The kernel of ``sigma * V``: density ``M(v / sigma) / sigma``."""
        if not sigma > 0:
            raise KernelError("scale factor must be positive")
        lo, hi = self.support
        params = dict(self.params, scale=self.params.get("scale", 1.0) * sigma)
        bp = None if self.breakpoints is None else self.breakpoints * sigma
        if self.kind == "atomic":
            v, w = self.atoms
            return VelocityKernel(self.name, "atomic", (lo * sigma, hi * sigma),
                                  atoms=(v * sigma, w.copy()), params=params)
        base = self.density

        def dens(v):
            return base(np.asarray(v) / sigma) / sigma

        return VelocityKernel(self.name, "continuous", (lo * sigma, hi * sigma), dens,
                              params=params, breakpoints=bp, mapping=self.mapping,
                              n_nodes=self.n_nodes)

    def with_nodes(self, n: int) -> "VelocityKernel":
        return VelocityKernel(self.name, self.kind, self.support, self.density, self.atoms,
                              self.params, self.breakpoints, self.mapping, int(n))


def gauss_legendre_panels(breaks: np.ndarray, order: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(order)
    a, b = breaks[:-1, None], breaks[1:, None]
    half = 0.5 * (b - a)
    nodes = (0.5 * (a + b) + half * x[None, :]).ravel()
    weights = (half * w[None, :]).ravel()
    return nodes, weights


def _quadrature(kernel: VelocityKernel, n: int, graded: bool = False) -> tuple[np.ndarray, np.ndarray]:
    order = min(PANEL_ORDER, n)
    panels = max(1, n // order)
    if kernel.mapping == "cauchy_line":
        # v = s tan(theta) turns the heavy tails into a bounded interval.
        s = kernel.params.get("sigma", 1.0) * kernel.params.get("scale", 1.0)
        th, wt = gauss_legendre_panels(np.linspace(-math.pi / 2, math.pi / 2, panels + 1), order)
        return s * np.tan(th), wt * s / np.cos(th) ** 2
    if kernel.mapping == "gaussian_line":
        s = kernel.params.get("sigma", 1.0) * kernel.params.get("scale", 1.0)
        lo, hi = -GAUSSIAN_CUTOFF * s, GAUSSIAN_CUTOFF * s
    else:
        lo, hi = kernel.support
    breaks = np.linspace(lo, hi, panels + 1)
    if graded:
        h = breaks[-1] - breaks[-2]
        breaks = np.concatenate([breaks[:-1], hi - h * GRADING ** np.arange(1, GRADED_PANELS + 1), [hi]])
    if kernel.breakpoints is not None:
        breaks = np.union1d(breaks, kernel.breakpoints[(kernel.breakpoints >= lo) & (kernel.breakpoints <= hi)])
    return gauss_legendre_panels(breaks, order)


def _normalized(kernel: VelocityKernel) -> VelocityKernel:
    nodes, m = kernel.rule()
    mass = float(m.sum())
    if not mass > 0:
        raise KernelError(f"kernel {kernel.name} has no mass")
    base = kernel.density

    def dens(v):
        return base(v) / mass

    return VelocityKernel(kernel.name, kernel.kind, kernel.support, dens, params=kernel.params,
                          breakpoints=kernel.breakpoints, mapping=kernel.mapping,
                          n_nodes=kernel.n_nodes)


def uniform(v_max: float = 1.0, n_nodes: int = DEFAULT_NODES) -> VelocityKernel:
    if not v_max > 0:
        raise KernelError("v_max must be positive")
    h = 0.5 / v_max

    def dens(v):
        return np.full(np.shape(v), h)

    return VelocityKernel("uniform", "continuous", (-v_max, v_max), dens,
                          params={"v_max": v_max}, n_nodes=n_nodes)


def atomic(velocities, weights) -> VelocityKernel:
    v = np.asarray(velocities, dtype=float)
    w = np.asarray(weights, dtype=float)
    if v.shape != w.shape or v.ndim != 1 or v.size == 0:
        raise KernelError("atoms need matching one-dimensional velocity and weight arrays")
    if np.any(w < 0) or not w.sum() > 0:
        raise KernelError("atom weights must be nonnegative with positive total")
    order = np.argsort(v)
    v, w = v[order], w[order] / w.sum()
    return VelocityKernel("atomic", "atomic", (float(v[0]), float(v[-1])), atoms=(v, w),
                          params={"velocities": v.tolist(), "weights": w.tolist()})


def two_atom(v_max: float = 1.0) -> VelocityKernel:
    k = atomic([-v_max, v_max], [0.5, 0.5])
    return VelocityKernel("two_atom", "atomic", k.support, atoms=k.atoms, params={"v_max": v_max})


def _gauss(sigma):
    c = 1.0 / (math.sqrt(2 * math.pi) * sigma)

    def dens(v):
        v = np.asarray(v, dtype=float)
        return c * np.exp(-0.5 * (v / sigma) ** 2)

    return dens


def gaussian(sigma: float = 1.0, n_nodes: int = DEFAULT_NODES) -> VelocityKernel:
    if not sigma > 0:
        raise KernelError("sigma must be positive")
    return VelocityKernel("gaussian", "continuous", (-math.inf, math.inf), _gauss(sigma),
                          params={"sigma": sigma}, mapping="gaussian_line", n_nodes=n_nodes)


def cauchy(sigma: float = 1.0, n_nodes: int = DEFAULT_NODES) -> VelocityKernel:
    if not sigma > 0:
        raise KernelError("sigma must be positive")

    def dens(v):
        v = np.asarray(v, dtype=float)
        return sigma / (math.pi * (sigma**2 + v**2))

    return VelocityKernel("cauchy", "continuous", (-math.inf, math.inf), dens,
                          params={"sigma": sigma}, mapping="cauchy_line", n_nodes=n_nodes)


def truncated_gaussian(sigma: float = 1.0, A: float = 4.0, renormalize: bool = True,
                       n_nodes: int = DEFAULT_NODES) -> VelocityKernel:
    if not (sigma > 0 and A > 0):
        raise KernelError("sigma and A must be positive")
    base = _gauss(sigma)
    mass = erf(A / (math.sqrt(2) * sigma))
    scale = 1.0 / mass if renormalize else 1.0

    def dens(v):
        return base(v) * scale

    return VelocityKernel("truncated_gaussian", "continuous", (-A, A), dens,
                          params={"sigma": sigma, "A": A, "renormalize": renormalize},
                          n_nodes=n_nodes)


def truncated_cauchy(sigma: float = 1.0, A: float = 10.0, n_nodes: int = DEFAULT_NODES) -> VelocityKernel:
    if not (sigma > 0 and A > 0):
        raise KernelError("sigma and A must be positive")
    mass = 2.0 / math.pi * math.atan(A / sigma)

    def dens(v):
        v = np.asarray(v, dtype=float)
        return sigma / (math.pi * (sigma**2 + v**2)) / mass

    return VelocityKernel("truncated_cauchy", "continuous", (-A, A), dens,
                          params={"sigma": sigma, "A": A}, n_nodes=n_nodes)


def tabulated(v, values, n_nodes: int = DEFAULT_NODES, renormalize: bool = True) -> VelocityKernel:
    """Piecewise-linear density through the samples ``(v, values)``."""
    v = np.asarray(v, dtype=float)
    values = np.asarray(values, dtype=float)
    if v.ndim != 1 or v.shape != values.shape or v.size < 2:
        raise KernelError("tabulated kernel needs at least two matching samples")
    if np.any(np.diff(v) <= 0):
        raise KernelError("tabulated velocities must be strictly increasing")
    if np.any(values < 0) or not np.all(np.isfinite(values)):
        raise KernelError("tabulated density must be finite and nonnegative")

    def dens(x):
        return np.interp(x, v, values)

    k = VelocityKernel("tabulated", "continuous", (float(v[0]), float(v[-1])), dens,
                       params={"samples": len(v)}, breakpoints=v.copy(), n_nodes=n_nodes)
    return _normalized(k) if renormalize else k


def regularized(kernel: VelocityKernel, n: float) -> VelocityKernel:
    """``(M + 1/n) / (1 + |V|/n)``: lifts a density that vanishes at the edge."""
    if kernel.kind != "continuous" or not kernel.bounded:
        raise KernelError("regularization needs a bounded continuous kernel")
    lo, hi = kernel.support
    width = hi - lo
    base = kernel.density

    def dens(v):
        return (base(v) + 1.0 / n) / (1.0 + width / n)

    return VelocityKernel(kernel.name + "_reg", "continuous", kernel.support, dens,
                          params=dict(kernel.params, regularization=n),
                          breakpoints=kernel.breakpoints, n_nodes=kernel.n_nodes)


def truncate_renormalize(kernel: VelocityKernel, A: float, r: float) -> tuple[VelocityKernel, float]:
    """Restrict an unbounded kernel to ``[-A, A]``.

    Returns the renormalized kernel and the adjusted rate ``r_A`` for which
    ``(1 + r_A) * M_A = (1 + r) * M`` on ``[-A, A]``.
    """
    if kernel.kind != "continuous":
        raise KernelError("truncation applies to continuous kernels")
    mass = truncated_mass(kernel, A)
    if (1.0 + r) * mass <= 1.0:
        raise KernelError(
            f"truncation A={A} leaves no growth; need A > {truncation_threshold(kernel, r):.6g}"
        )
    sigma = kernel.params.get("sigma", 1.0) * kernel.params.get("scale", 1.0)
    if kernel.name == "gaussian":
        out = truncated_gaussian(sigma, A, n_nodes=kernel.n_nodes)
    elif kernel.name == "cauchy":
        out = truncated_cauchy(sigma, A, n_nodes=kernel.n_nodes)
    else:
        lo, hi = kernel.support
        if A > hi or -A < lo:
            raise KernelError("truncation window exceeds the kernel support")
        base = kernel.density

        def dens(v):
            return base(v) / mass

        out = VelocityKernel(kernel.name + "_trunc", "continuous", (-A, A), dens,
                             params=dict(kernel.params, A=A), n_nodes=kernel.n_nodes)
    return out, (1.0 + r) * mass - 1.0


def truncated_mass(kernel: VelocityKernel, A: float) -> float:
    sigma = kernel.params.get("sigma", 1.0) * kernel.params.get("scale", 1.0)
    if kernel.name == "gaussian":
        return float(erf(A / (math.sqrt(2) * sigma)))
    if kernel.name == "cauchy":
        return 2.0 / math.pi * math.atan(A / sigma)
    nodes, w = gauss_legendre_panels(np.linspace(-A, A, 33), PANEL_ORDER)
    return float(np.sum(w * kernel(nodes)))


def truncation_threshold(kernel: VelocityKernel, r: float) -> float:
    """Smallest ``A`` with ``(1 + r) * mass([-A, A]) = 1``."""
    from scipy.optimize import brentq

    if not r > 0:
        raise KernelError("rate r must be positive")
    hi = 1.0
    while (1.0 + r) * truncated_mass(kernel, hi) <= 1.0:
        hi *= 2.0
    return float(brentq(lambda A: (1.0 + r) * truncated_mass(kernel, A) - 1.0, 0.0, hi, xtol=1e-14))


def rearrange(kernel: VelocityKernel, decreasing: bool = True, cells: int = 4096) -> VelocityKernel:
    """Symmetric decreasing (or increasing) rearrangement by layer-cake sorting."""
    if kernel.kind != "continuous" or not kernel.bounded:
        raise KernelError("rearrangement needs a bounded continuous kernel")
    lo, hi = kernel.support
    if not math.isclose(lo, -hi, rel_tol=1e-12):
        raise KernelError("rearrangement needs a support symmetric about zero")
    h = (hi - lo) / cells
    mids = lo + h * (np.arange(cells) + 0.5)
    vals = np.sort(kernel(mids))
    if decreasing:
        vals = vals[::-1]
    # k-th sorted value fills |v| in [(k-1) h/2, k h/2] on both sides.
    pos = (np.arange(cells) + 0.5) * h / 2
    v = np.concatenate([-pos[::-1], pos])
    m = np.concatenate([vals[::-1], vals])
    v = np.concatenate([[lo], v, [hi]])
    m = np.concatenate([[vals[-1]], m, [vals[-1]]])
    out = tabulated(v, m, n_nodes=kernel.n_nodes)
    name = "rearranged_decreasing" if decreasing else "rearranged_increasing"
    return VelocityKernel(name, "continuous", out.support, out.density, params={"source": kernel.name},
                          breakpoints=out.breakpoints, n_nodes=out.n_nodes)


def make_kernel(spec: dict) -> VelocityKernel:
    """Build a kernel from a flat parameter dictionary (``name`` plus parameters)."""
    spec = dict(spec)
    name = spec.pop("name", None) or spec.pop("kernel", None)
    n = int(spec.pop("nodes", DEFAULT_NODES))
    f = {k: float(v) for k, v in spec.items() if k in ("v_max", "sigma", "A")}
    if name == "uniform":
        return uniform(f.get("v_max", 1.0), n)
    if name == "two_atom":
        return two_atom(f.get("v_max", 1.0))
    if name == "gaussian":
        return gaussian(f.get("sigma", 1.0), n)
    if name == "cauchy":
        return cauchy(f.get("sigma", 1.0), n)
    if name == "truncated_gaussian":
        return truncated_gaussian(f.get("sigma", 1.0), f.get("A", 4.0), n_nodes=n)
    if name == "truncated_cauchy":
        return truncated_cauchy(f.get("sigma", 1.0), f.get("A", 10.0), n)
    if name == "tabulated":
        path = spec.get("path")
        if path is None:
            raise KernelError("tabulated kernel needs a path to a two-column table")
        data = np.loadtxt(path, delimiter=",", comments="#", ndmin=2)
        return tabulated(data[:, 0], data[:, 1], n)
    if name == "atomic":
        v = [float(x) for x in str(spec["velocities"]).split()]
        w = [float(x) for x in str(spec["weights"]).split()]
        return atomic(v, w)
    raise KernelError(f"unknown kernel {name!r}")
