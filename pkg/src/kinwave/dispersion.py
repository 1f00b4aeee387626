"""Dispersion relation of the kinetic KPP front and its minimal speed.

For a kernel ``M`` and growth rate ``r`` the dispersion function is

    I(lam; c) = (1 + r) * integral of M(v) / (1 + lam (c - v)) dv,

defined for ``lam < 1 / (v_max - c)``.  A front moving at speed ``c`` with
exponential decay ``exp(-lam z)`` exists when ``I(lam; c) = 1``; the minimal
speed ``c*`` is the smallest ``c`` for which the root set is nonempty.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from . import kernels as kn

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
EDGE_DELTA = 1e-8
SCAN_STEPS = 1024


class DomainError(ValueError):
    pass


class NoRootError(ValueError):
    pass


@dataclass(eq=False)
class DispersionProblem:
    """Growth rate, kernel and the velocity rule used for every integral.

    With ``edge_correction`` the near-singular part ``M(v_max) / (1 + lam (c - v))``
    is integrated in closed form and only the smooth remainder goes through
    the rule.  Discrete schemes that must match their own node sums use
    ``edge_correction=False``.
    """

    r: float
    kernel: kn.VelocityKernel
    n_nodes: int | None = None
    edge_correction: bool = True

    def __post_init__(self):
        if not self.r > 0:
            raise DomainError("growth rate r must be positive")

    @cached_property
    def nodes(self) -> tuple[np.ndarray, np.ndarray]:
        return self.kernel.rule(self.n_nodes, graded=self.edge_correction)

    @cached_property
    def _edge(self):
        k = self.kernel
        if not self.edge_correction or k.kind != "continuous" or not k.bounded:
            return None
        m_edge = float(k(k.v_max))
        if m_edge == 0.0:
            return None
        v, m = self.nodes
        q = m / k(v)
        return m_edge, q, k.support[0], k.support[1]

    def kernel_sum(self, lam, c):
        """Integral of ``M / (1 + lam (c - v))``; broadcasts over ``lam``."""
        v, m = self.nodes
        lam = np.asarray(lam)
        den = 1.0 + lam[..., None] * (c - v)
        out = np.sum(m / den, axis=-1)
        if self._edge is not None:
            m_edge, q, lo, hi = self._edge
            approx = np.sum(q / den, axis=-1)
            with np.errstate(invalid="ignore", divide="ignore"):
                exact = np.where(lam == 0, hi - lo,
                                 (np.log(1.0 + lam * (c - lo)) - np.log(1.0 + lam * (c - hi))) / lam)
            out = out + m_edge * (exact - approx)
        return out

    @property
    def v_max(self) -> float:
        if not self.kernel.bounded:
            raise DomainError(
                f"kernel {self.kernel.name} is unbounded; truncate it before computing speeds"
            )
        return self.kernel.v_max

    def lambda_max(self, c: float) -> float:
        gap = self.v_max - c
        if gap <= 0:
            raise DomainError(f"speed c={c} is not below v_max={self.v_max}")
        return 1.0 / gap


@dataclass(frozen=True)
class DispersionRoot:
    c: float
    lam: float
    kind: str
    residual: float = 0.0
    edge: bool = False  # minimum sat on the admissible edge of lam
    notes: tuple = field(default_factory=tuple)


def eval_I(problem: DispersionProblem, lam, c: float):
    """Dispersion function, vectorized over ``lam``."""
    v, _ = problem.nodes
    lam_arr = np.asarray(lam, dtype=float)
    if np.any(1.0 + lam_arr[..., None] * (c - v) <= 0) or (
        problem.kernel.bounded and np.any(1.0 + lam_arr * (c - problem.kernel.v_max) <= 0)
    ):
        raise DomainError(f"lam outside the admissible domain lam < 1/(v_max - c) at c={c}")
    out = (1.0 + problem.r) * problem.kernel_sum(lam_arr, c)
    return float(out) if np.ndim(lam) == 0 else out


def eval_I_complex(problem: DispersionProblem, lam, c: float):
    v, _ = problem.nodes
    lam_arr = np.asarray(lam, dtype=complex)
    if np.any(np.abs(1.0 + lam_arr[..., None] * (c - v)) < 1e-300):
        raise DomainError("lam sits on a pole of the dispersion function")
    out = (1.0 + problem.r) * problem.kernel_sum(lam_arr, c)
    return complex(out) if np.ndim(lam) == 0 else out


def golden_min(f, a: float, b: float, tol: float) -> tuple[float, float]:
    """Minimize a unimodal ``f`` on ``[a, b]``; returns ``(x, f(x))``."""
    c = b - GOLDEN * (b - a)
    d = a + GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + GOLDEN * (b - a)
            fd = f(d)
    x = 0.5 * (a + b)
    fx = f(x)
    for y, fy in ((c, fc), (d, fd)):
        if fy < fx:
            x, fx = y, fy
    return x, fx


def bisect(f, a: float, b: float, tol: float, fa: float | None = None) -> float:
    """Root of ``f`` on ``[a, b]`` given a sign change."""
    fa = f(a) if fa is None else fa
    for _ in range(400):
        if b - a <= tol:
            break
        mid = 0.5 * (a + b)
        fm = f(mid)
        if fm == 0.0:
            return mid
        if (fm > 0) == (fa > 0):
            a, fa = mid, fm
        else:
            b = mid
    return 0.5 * (a + b)


def _theta(I, lam_hi: float) -> tuple[float, float, bool]:
    """Minimum of a convex ``I`` on ``[0, lam_hi]`` with edge detection."""
    delta = EDGE_DELTA
    while True:
        top = lam_hi * (1.0 - delta)
        lam, val = golden_min(I, 0.0, top, 1e-12 * top)
        at_edge = lam > top * (1.0 - 1e-9)
        if not at_edge or delta < 1e-13:
            return lam, val, at_edge
        delta *= 1e-3


def _minimal_speed(I_of, c_top: float, lam_hi_of, tol: float) -> DispersionRoot:
    """Bisection on ``theta(c) - 1`` over ``[0, c_top)``."""

    def theta(c):
        return _theta(lambda lam: I_of(lam, c), lam_hi_of(c))

    lam0, th0, _ = theta(0.0)
    if th0 <= 1.0:
        raise NoRootError("theta(0) <= 1: the growth term does not saturate (r must be positive)")
    c_hi = c_top * (1.0 - 1e-12)
    lam_hi, th_hi, edge_hi = theta(c_hi)
    if th_hi >= 1.0:
        # No admissible root below the largest speed: the front travels at v_max.
        return DispersionRoot(c_top, math.inf, "sound_speed", th_hi - 1.0, True)
    a, b = 0.0, c_hi
    while b - a > tol * max(1.0, c_top):
        mid = 0.5 * (a + b)
        if theta(mid)[1] > 1.0:
            a = mid
        else:
            b = mid
    c = 0.5 * (a + b)
    lam, val, edge = theta(c)
    return DispersionRoot(c, lam, "minimal_speed", val - 1.0, edge)


def minimal_speed(problem: DispersionProblem, tol: float = 1e-12) -> DispersionRoot:
    vmax = problem.v_max
    if vmax <= 0:
        raise DomainError("kernel support must extend to positive velocities")
    return _minimal_speed(lambda lam, c: eval_I(problem, lam, c), vmax, problem.lambda_max, tol)


def lambda_c(problem: DispersionProblem, c: float, tol: float = 1e-14) -> float:
    """Smallest decay rate ``lam`` with ``I(lam; c) = 1``."""
    lam_hi = problem.lambda_max(c)

    def f(lam):
        return eval_I(problem, lam, c) - 1.0

    step = lam_hi / SCAN_STEPS
    grid = step * np.arange(SCAN_STEPS)
    vals = eval_I(problem, grid, c) - 1.0
    below = np.nonzero(vals <= 0)[0]
    if below.size:
        k = int(below[0])
        if vals[k] == 0.0:
            return float(grid[k])
        return bisect(f, grid[k - 1], grid[k], tol * lam_hi, vals[k - 1])
    # Both roots may share one scan cell; the convex minimum separates them.
    lam_m, val, _ = _theta(lambda lam: eval_I(problem, lam, c), lam_hi)
    if val - 1.0 > 1e-12:
        raise NoRootError(f"no real decay rate at c={c}: speed is below the minimal speed")
    if val >= 1.0:
        return lam_m
    return bisect(f, 0.0, lam_m, tol * lam_hi)


def speed_for_decay(problem: DispersionProblem, lam: float, tol: float = 1e-13) -> float:
    """The unique speed ``c > v_max - 1/lam`` with ``I(lam; c) = 1``."""
    if not lam > 0:
        raise DomainError("decay rate must be positive")
    vmax = problem.v_max
    c_lo = vmax - 1.0 / lam

    def f(c):
        return eval_I(problem, lam, c) - 1.0

    lo = c_lo + 1e-13 * max(1.0, abs(c_lo), 1.0 / lam)
    if f(lo) <= 0:
        raise NoRootError(f"I(lam; c) stays below 1 on the admissible speeds for lam={lam}")
    hi = vmax + 1.0
    while f(hi) > 0:
        hi = vmax + 2.0 * (hi - vmax)
    return bisect(f, lo, hi, tol * max(1.0, abs(hi)))


def profile_F(problem: DispersionProblem, lam: float, c: float):
    """Velocity profile ``(1 + r) M(v) / (1 + lam (c - v))`` at the nodes and as a callable."""
    v, m = problem.nodes
    den = 1.0 + lam * (c - v)
    if np.any(den <= 0):
        raise DomainError("lam outside the admissible domain")
    r = problem.r

    def F(vv):
        vv = np.asarray(vv, dtype=float)
        if problem.kernel.kind == "atomic":
            raise kn.KernelError("atomic kernels are profiled at their atoms only")
        return (1.0 + r) * problem.kernel(vv) / (1.0 + lam * (c - vv))

    k = problem.kernel
    M = m if k.kind == "atomic" else k(v)
    return (1.0 + r) * M / den, F


def diffusion_limit_speed(problem: DispersionProblem, eps: float, tol: float = 1e-13) -> float:
    """Minimal speed of the parabolically rescaled dispersion function.

    ``I_eps(lam; c) = (1 + eps^2 r) * integral M / (1 + eps^2 lam (c - v / eps))``
    on speeds ``c < v_max / eps``.
    """
    if not eps > 0:
        raise DomainError("eps must be positive")
    vmax = problem.v_max
    r = problem.r
    e2 = eps * eps

    def I_eps(lam, c):
        # 1 + eps^2 lam (c - v/eps) = 1 + (eps lam)(eps c - v)
        return (1.0 + e2 * r) * float(problem.kernel_sum(eps * lam, eps * c))

    def lam_hi(c):
        return 1.0 / (eps * (vmax - eps * c))

    return _minimal_speed(I_eps, vmax / eps, lam_hi, tol).c


def regularized_minimal_speed(problem: DispersionProblem, tol: float = 1e-7, n0: float = 16.0,
                              max_doublings: int = 40) -> tuple[float, float]:
    """Limit of ``c*`` for the lifted kernels ``(M + 1/n) / (1 + |V|/n)``.

    Returns ``(limit, last_change)``.
    """
    n = n0
    prev = None
    change = math.inf
    for _ in range(max_doublings):
        lifted = DispersionProblem(problem.r, kn.regularized(problem.kernel, n), problem.n_nodes)
        c = minimal_speed(lifted).c
        if prev is not None:
            change = abs(c - prev)
            if change < tol:
                return c, change
        prev = c
        n *= 2.0
    return prev, change


@dataclass(frozen=True)
class SpeedBoundsReport:
    c_star: float
    regime: str
    bracket: tuple[float, float]
    bracket_ok: bool
    scaling: dict
    scaling_ok: bool
    rearrangement: tuple | None
    rearrangement_ok: bool | None
    notices: tuple = ()

    @property
    def ok(self) -> bool:
        flags = [self.bracket_ok, self.scaling_ok]
        if self.rearrangement_ok is not None:
            flags.append(self.rearrangement_ok)
        return all(flags)


def comparison_bracket(r: float, v_max: float, diffusivity: float) -> tuple[float, float]:
    if r < 1:
        return 2 * math.sqrt(r * diffusivity) / (1 + r), 2 * math.sqrt(r) * v_max / (1 + r)
    return math.sqrt(diffusivity), v_max


def check_speed_bounds(problem: DispersionProblem, sigmas=(0.5, 2.0), rel_tol: float = 1e-8,
                       slack: float = 1e-9) -> SpeedBoundsReport:
    """Scaling law, comparison bracket and rearrangement ordering of ``c*``."""
    root = minimal_speed(problem)
    c = root.c
    k = problem.kernel
    D = k.moments().diffusivity
    lo, hi = comparison_bracket(problem.r, problem.v_max, D)
    notices = []
    bracket_ok = lo - slack <= c <= hi + slack
    if not k.is_symmetric():
        notices.append("kernel is not symmetric; comparison bracket is informational")
    scaling = {}
    for s in sigmas:
        cs = minimal_speed(DispersionProblem(problem.r, k.scaled(s), problem.n_nodes)).c
        scaling[s] = (cs, s * c)
    scaling_ok = all(abs(a - b) <= rel_tol * abs(b) for a, b in scaling.values())
    rearr, rearr_ok = None, None
    if k.kind == "continuous" and k.is_symmetric():
        dec = minimal_speed(DispersionProblem(problem.r, kn.rearrange(k, True), problem.n_nodes)).c
        inc = minimal_speed(DispersionProblem(problem.r, kn.rearrange(k, False), problem.n_nodes)).c
        rearr = (dec, c, inc)
        rearr_ok = dec <= c + slack and c <= inc + slack
    return SpeedBoundsReport(c, "r<1" if problem.r < 1 else "r>=1", (lo, hi), bracket_ok,
                             scaling, scaling_ok, rearr, rearr_ok, tuple(notices))


@dataclass(frozen=True)
class ComplexRoot:
    lam: complex
    residual: float


def complex_scan(problem: DispersionProblem, c: float, n: int = 200, refine: bool = True) -> list:
    """Local minima of ``|I(lam; c) - 1|`` over a rectangle of complex ``lam``."""
    lam_hi = problem.lambda_max(c)
    re = np.linspace(0.0, lam_hi, n + 2)[1:-1]
    im = np.linspace(-2.0 * lam_hi, 2.0 * lam_hi, n)
    L = re[None, :] + 1j * im[:, None]
    F = np.abs(eval_I_complex(problem, L, c) - 1.0)
    pad = np.pad(F, 1, constant_values=np.inf)
    core = pad[1:-1, 1:-1]
    is_min = np.ones_like(F, dtype=bool)
    for di in (-1, 0, 1):
        for dj in (-1, 0, 1):
            if di or dj:
                is_min &= core < pad[1 + di:F.shape[0] + 1 + di, 1 + dj:F.shape[1] + 1 + dj]
    out = []
    v, m = problem.nodes
    for i, j in zip(*np.nonzero(is_min)):
        lam = complex(L[i, j])
        if refine:
            for _ in range(50):
                val = eval_I_complex(problem, lam, c) - 1.0
                d = -(1.0 + problem.r) * np.sum(m * (c - v) / (1.0 + lam * (c - v)) ** 2)
                new = lam - val / d
                if not (0 < new.real < lam_hi) or abs(new - lam) > lam_hi:
                    break
                lam = new
                if abs(val) < 1e-14:
                    break
        out.append(ComplexRoot(lam, float(abs(eval_I_complex(problem, lam, c) - 1.0))))
    out.sort(key=lambda z: z.residual)
    return out
