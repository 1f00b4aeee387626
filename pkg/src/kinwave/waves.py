"""Traveling waves by monotone relaxation between explicit barriers.

In the frame moving at speed ``c`` the scheme is iterated from an upper
barrier.  Because that barrier is an exact supersolution of the discrete
scheme (it is built from the scheme's own dispersion relation), the iterates
decrease monotonically and stay above the matching discrete subsolution.
The limit is translated so that ``rho(0) = 1/2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import dispersion as ds
from . import kernels as kn
from . import simulator as sm

STOP_RATE = 1e-6
SUBSOLUTION_GAP = 1e-3
EDGE_TOL = 1e-3


class WaveError(RuntimeError):
    pass


# Continuous barriers --------------------------------------------------------

@dataclass(frozen=True)
class Barrier:
    lam: float
    c: float
    r: float
    kernel: kn.VelocityKernel
    amplitude: float = 0.0  # subsolution correction factor
    gap: float = 0.0  # extra decay rate of the correction

    def _F(self, mu, v):
        v = np.asarray(v, dtype=float)
        if self.kernel.kind == "atomic":
            vs, ws = self.kernel.atoms
            M = np.array([ws[np.argmin(np.abs(vs - x))] for x in np.ravel(v)]).reshape(np.shape(v))
        else:
            M = self.kernel(v)
        return (1.0 + self.r) * M / (1.0 + mu * (self.c - v)), M


def supersolution(problem: ds.DispersionProblem, c: float) -> Barrier:
    lam = ds.lambda_c(problem, c)
    return Barrier(lam, c, problem.r, problem.kernel)


def upper_value(b: Barrier, z, v):
    """``min(M, exp(-lam z) F_lam)`` on broadcast ``(z, v)``."""
    F, M = b._F(b.lam, v)
    return np.minimum(M, np.exp(-b.lam * np.asarray(z)) * F)


def choose_gap(I, lam: float, gap: float = SUBSOLUTION_GAP) -> float:
    """Halve from ``lam / 2`` until ``I(lam + g) <= 1 - gap``."""
    g = 0.5 * lam
    for _ in range(200):
        try:
            if I(lam + g) <= 1.0 - gap:
                return g
        except ds.DomainError:
            pass
        g *= 0.5
    raise WaveError("no admissible gap: the speed is too close to the minimal speed")


def subsolution(problem: ds.DispersionProblem, c: float) -> Barrier:
    lam = ds.lambda_c(problem, c)
    gap = choose_gap(lambda mu: ds.eval_I(problem, mu, c), lam)
    I_hi = ds.eval_I(problem, lam + gap, c)
    v, _ = problem.nodes
    ratio = (1.0 + (lam + gap) * (c - v)) / (1.0 + lam * (c - v))
    bound = ratio ** ((lam - gap) / gap) * problem.r / (1.0 - I_hi) / (1.0 + lam * (c - v))
    A = float(np.max(bound)) ** (gap / lam)
    return Barrier(lam, c, problem.r, problem.kernel, A, gap)


def lower_value(b: Barrier, z, v):
    z = np.asarray(z)
    F1, _ = b._F(b.lam, v)
    F2, _ = b._F(b.lam + b.gap, v)
    return np.maximum(0.0, np.exp(-b.lam * z) * F1 - b.amplitude * np.exp(-(b.lam + b.gap) * z) * F2)


# Discrete barriers ----------------------------------------------------------

@dataclass(frozen=True)
class SchemeDispersion:
    """Exponential solutions ``exp(-lam z) G(v)`` of one moving-frame step."""

    v: np.ndarray
    q: np.ndarray
    M: np.ndarray
    r: float
    c: float
    dt: float
    dz: float

    @property
    def nu(self):
        return (self.v - self.c) * self.dt / self.dz

    def tau(self, lam):
        nu = self.nu
        return np.where(nu > 0, 1.0 + nu * np.expm1(lam * self.dz),
                        1.0 + np.abs(nu) * np.expm1(-lam * self.dz))

    def lam_max(self) -> float:
        nu = self.nu
        pos = nu[nu > 0]
        if pos.size == 0:
            return math.inf
        return float(np.min(np.log1p(self.dt / ((1.0 - self.dt) * pos)) / self.dz))

    def G(self, lam):
        den = 1.0 - (1.0 - self.dt) * self.tau(lam)
        if np.any(den <= 0):
            raise ds.DomainError("decay rate outside the discrete admissible range")
        return self.dt * (1.0 + self.r) * self.M / den

    def I(self, lam):
        return float(np.sum(self.q * self.tau(lam) * self.G(lam)))

    def smallest_root(self) -> float:
        top = self.lam_max()
        if not math.isfinite(top):
            raise WaveError("the frame is faster than every particle")
        hi = top * (1.0 - 1e-9)
        grid = np.linspace(0.0, hi, ds.SCAN_STEPS + 1)
        vals = np.array([self.I(x) for x in grid]) - 1.0
        below = np.nonzero(vals <= 0)[0]
        if below.size == 0:
            lam_m, val = ds.golden_min(self.I, 0.0, hi, 1e-12 * hi)
            if val > 1.0:
                raise WaveError("the scheme has no wave at this speed; refine the grid or raise c")
            return ds.bisect(lambda x: self.I(x) - 1.0, 0.0, lam_m, 1e-15 * hi)
        k = int(below[0])
        return ds.bisect(lambda x: self.I(x) - 1.0, grid[k - 1], grid[k], 1e-15 * hi, vals[k - 1])


@dataclass(frozen=True)
class DiscreteBarriers:
    lam: float
    gap: float
    amplitude: float
    G_lam: np.ndarray
    G_hi: np.ndarray
    M: np.ndarray

    def upper(self, z):
        return np.minimum(self.M[:, None], np.exp(-self.lam * z)[None, :] * self.G_lam[:, None])

    def lower(self, z):
        e1 = np.exp(-self.lam * z)[None, :] * self.G_lam[:, None]
        e2 = self.amplitude * np.exp(-(self.lam + self.gap) * z)[None, :] * self.G_hi[:, None]
        return np.maximum(0.0, e1 - e2)


def discrete_barriers(sd: SchemeDispersion) -> DiscreteBarriers:
    lam = sd.smallest_root()
    top = sd.lam_max()
    gap = choose_gap(lambda mu: sd.I(mu) if mu < top else math.inf, lam)
    G_lam, G_hi = sd.G(lam), sd.G(lam + gap)
    I_hi = sd.I(lam + gap)
    bound = ((G_lam / G_hi) ** ((lam - gap) / gap) * sd.r * sd.tau(lam) * G_lam
             / ((1.0 + sd.r) * sd.M * (1.0 - I_hi)))
    A = float(np.max(bound[sd.M > 0])) ** (gap / lam)
    return DiscreteBarriers(lam, gap, A, G_lam, G_hi, sd.M)


# Wave construction ----------------------------------------------------------

@dataclass(eq=False)
class WaveProfile:
    c: float
    r: float
    z: np.ndarray
    v: np.ndarray
    q: np.ndarray
    M: np.ndarray
    f: np.ndarray
    lam: float  # decay rate from the continuous dispersion relation
    lam_scheme: float  # decay rate of the discrete barriers
    upper: np.ndarray
    lower: np.ndarray
    left_in: np.ndarray
    right_in: np.ndarray
    dt: float
    shift: float = 0.0
    relax_time: float = 0.0
    converged: bool = False
    diagnostics: dict = field(default_factory=dict)

    @property
    def rho(self) -> np.ndarray:
        return self.q @ self.f

    @property
    def dz(self) -> float:
        return float(self.z[1] - self.z[0])

    def tail_decay(self, lo: float = 1e-9, hi: float = 1e-3) -> float:
        """Exponential rate fitted to ``log rho`` where ``lo < rho < hi`` on the right."""
        rho = self.rho
        sel = (rho > lo) & (rho < hi) & (self.z > 0)
        if sel.sum() < 3:
            raise WaveError("right tail too short to fit a decay rate")
        return float(-np.polyfit(self.z[sel], np.log(rho[sel]), 1)[0])


def default_grid(problem: ds.DispersionProblem, c: float, nz: int | None = None, nv: int = 64,
                 dz: float = 0.05) -> sm.Grid:
    lam = ds.lambda_c(problem, c)
    z_hi = math.log(1e5) / lam + 5.0 / lam
    z_lo = -max(30.0, 12.0 / min(lam, problem.r))
    if nz is None:
        nz = int(round((z_hi - z_lo) / dz)) + 1
    return sm.Grid(z_lo, z_hi, nz, nv)


def construct_wave(problem: ds.DispersionProblem, c: float, grid: sm.Grid | None = None,
                   tol: float = STOP_RATE, output_interval: float = 1.0, max_time: float = 5000.0,
                   cfl: float = sm.DEFAULT_CFL) -> WaveProfile:
    """Traveling wave of speed ``c > c*`` by relaxation from the upper barrier."""
    c_star = ds.minimal_speed(problem).c
    if c <= c_star:
        raise WaveError(f"speed c={c} must exceed the minimal speed {c_star:.10g}")
    if c >= problem.v_max:
        raise WaveError(f"speed c={c} must stay below v_max={problem.v_max}")
    lam = ds.lambda_c(problem, c)
    grid = default_grid(problem, c) if grid is None else grid
    v, q, M = problem.kernel.discrete(grid.nv)
    z = grid.x
    dz = grid.dx
    amax = float(np.max(np.abs(v - c)))
    dt = cfl * min(dz / amax, 1.0 / (1.0 + problem.r))
    sd = SchemeDispersion(v, q, M, problem.r, c, dt, dz)
    bar = discrete_barriers(sd)
    ghost = np.array([z[0] - dz, z[-1] + dz])
    edges = bar.upper(ghost)
    state = sm.KineticState(z.copy(), v, q, M, np.ascontiguousarray(bar.upper(z)), problem.r, c,
                            left_in=np.ascontiguousarray(edges[:, 0]),
                            right_in=np.ascontiguousarray(edges[:, 1]), kernel_name=problem.kernel.name)
    per = max(1, int(round(output_interval / dt)))
    h = per * dt
    increases = 0.0
    converged = False
    prev = state.g.copy()
    while state.t < max_time:
        for _ in range(per):
            sm.step(state, dt)
        diff = state.g - prev
        increases = max(increases, float(diff.max()))
        rate = float(np.abs(diff).max()) / h
        prev = state.g.copy()
        if rate < tol:
            converged = True
            break
    if not converged:
        raise WaveError(f"relaxation did not settle within t={max_time}; last rate {rate:.3g}")
    f = state.g
    upper, lower = bar.upper(z), bar.lower(z)
    rho = q @ f
    if not (rho[0] > 0.5 > rho[-1]) or rho[0] < 1.0 - EDGE_TOL or rho[-1] > EDGE_TOL:
        raise WaveError(
            f"profile does not reach 1 and 0 within {EDGE_TOL} on the window "
            f"(rho={rho[0]:.6f} .. {rho[-1]:.2e}); widen the grid"
        )
    shift = sm.front_position(rho, z, 0.5)
    prof = WaveProfile(c, problem.r, z - shift, v, q, M, f.copy(), lam, bar.lam, upper, lower,
                       state.left_in, state.right_in, dt, shift, state.t, converged)
    prof.diagnostics.update(
        max_increase=increases,
        upper_violation=float(np.max(f - upper)),
        lower_violation=float(np.max(lower - f)),
        continuous_upper_gap=float(np.max(f - upper_value(supersolution(problem, c), z[None, :], v[:, None]))),
        rho_left=float(rho[0]),
        rho_right=float(rho[-1]),
        gap=bar.gap,
        amplitude=bar.amplitude,
    )
    sup, l2 = wave_residual(prof)
    prof.diagnostics.update(residual_sup=sup, residual_l2=l2)
    return prof


def wave_residual(p: WaveProfile) -> tuple[float, float]:
    """Sup and L2 norms of the stationary equation with upwind differences."""
    a = (p.v - p.c)[:, None]
    ext = np.concatenate([p.left_in[:, None], p.f, p.right_in[:, None]], axis=1)
    back = (ext[:, 1:-1] - ext[:, :-2]) / p.dz
    fwd = (ext[:, 2:] - ext[:, 1:-1]) / p.dz
    deriv = np.where(a > 0, back, fwd)
    rho = p.rho[None, :]
    R = a * deriv - ((1.0 + p.r) * p.M[:, None] * rho - (1.0 + p.r * rho) * p.f)
    l2 = math.sqrt(float(np.sum(p.q[:, None] * R**2)) * p.dz)
    return float(np.max(np.abs(R))), l2


def minimal_wave(problem: ds.DispersionProblem, grid: sm.Grid | None = None, tol: float = 1e-3,
                 max_levels: int = 6) -> tuple[WaveProfile, list]:
    """Waves at ``c_n -> c*`` until successive translated profiles agree within ``tol``."""
    c_star = ds.minimal_speed(problem).c
    gap0 = 0.25 * (problem.v_max - c_star)
    history = []
    prev = None
    for n in range(max_levels):
        c = c_star + gap0 * 2.0**-n
        w = construct_wave(problem, c, grid)
        rho = np.interp(np.linspace(-10, 10, 401), w.z, w.rho)
        change = math.inf if prev is None else float(np.max(np.abs(rho - prev)))
        history.append((c, change))
        if change < tol:
            return w, history
        prev = rho
    return w, history
