"""Finite-volume solver for the kinetic KPP equation on a bounded window.

The unknown ``g[j, i]`` approximates the density of particles with velocity
``v[j]`` at position ``x[i]`` in a frame moving at speed ``c``:

    d_t g + (v - c) d_x g = M rho - g + r rho (M - g),   rho = sum_j q[j] g[j].

Each step is first-order upwind transport followed by an explicit reaction
update (or an exponential update of the loss term).  Under the step-size
limits both stages map ``0 <= g <= M`` into itself and preserve ordering.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import core
from .kernels import VelocityKernel

DEFAULT_CFL = 0.9


class SimulationError(RuntimeError):
    pass


class DatumError(ValueError):
    pass


@dataclass(frozen=True)
class Grid:
    x_lo: float
    x_hi: float
    nx: int
    nv: int = 64

    def __post_init__(self):
        if not self.x_hi > self.x_lo:
            raise ValueError("grid needs x_hi > x_lo")
        if self.nx < 3 or self.nv < 1:
            raise ValueError("grid needs nx >= 3 and nv >= 1")

    @property
    def x(self) -> np.ndarray:
        return np.linspace(self.x_lo, self.x_hi, self.nx)

    @property
    def dx(self) -> float:
        return (self.x_hi - self.x_lo) / (self.nx - 1)


@dataclass(eq=False)
class KineticState:
    x: np.ndarray
    v: np.ndarray
    q: np.ndarray
    M: np.ndarray
    g: np.ndarray
    r: float
    c: float = 0.0
    t: float = 0.0
    left_in: np.ndarray | None = None
    right_in: np.ndarray | None = None
    kernel_name: str = ""
    steps: int = 0

    def __post_init__(self):
        if self.left_in is None:
            self.left_in = self.M.copy()
        if self.right_in is None:
            self.right_in = np.zeros_like(self.M)
        self._rho = np.empty(self.x.size)

    @property
    def dx(self) -> float:
        return float(self.x[1] - self.x[0])

    @property
    def a(self) -> np.ndarray:
        return self.v - self.c

    @property
    def rho(self) -> np.ndarray:
        return self.q @ self.g

    def copy(self) -> "KineticState":
        return KineticState(self.x.copy(), self.v.copy(), self.q.copy(), self.M.copy(),
                            self.g.copy(), self.r, self.c, self.t, self.left_in.copy(),
                            self.right_in.copy(), self.kernel_name, self.steps)

    def max_dt(self, cfl: float = DEFAULT_CFL) -> float:
        amax = float(np.max(np.abs(self.a)))
        transport = self.dx / amax if amax > 0 else math.inf
        return cfl * min(transport, 1.0 / (1.0 + self.r))


def _datum_values(datum, x, v, M, r):
    kind = datum.get("kind", "step") if isinstance(datum, dict) else datum
    X = x[None, :]
    if callable(kind):
        return np.asarray(kind(X, v[:, None]), dtype=float) * np.ones((v.size, x.size))
    if kind == "step":
        x0 = float(datum.get("x0", 0.0)) if isinstance(datum, dict) else 0.0
        h = np.where(X < x0, 1.0, 0.0)
        h = np.where(np.abs(X - x0) <= 1e-12 * max(1.0, abs(x0)), 0.5, h)
        return M[:, None] * h
    if kind == "parabolic":
        alpha = float(datum.get("alpha", 1.0))
        h = np.where(X < 0, 1.0, np.clip(1.0 - alpha * X**2, 0.0, None))
        return M[:, None] * h
    if kind == "gaussian":
        # (1/b) Mx(x/b) M(v) e^{r a}, capped by M(v)
        sigma = float(datum.get("sigma", 1.0))
        a = float(datum.get("a", 1.0))
        b = float(datum.get("b", 1.0))
        prof = np.exp(-0.5 * (X / (b * sigma)) ** 2) / (math.sqrt(2 * math.pi) * sigma * b)
        h = prof * math.exp(r * a)
        if datum.get("cap", True):
            h = np.minimum(h, 1.0)
        return M[:, None] * h
    if kind == "array":
        return np.array(datum["g"], dtype=float)
    raise DatumError(f"unknown datum kind {kind!r}")


def init_state(kernel: VelocityKernel, r: float, grid: Grid, datum="step", c: float = 0.0,
               left_in=None, right_in=None, tol: float = 1e-12) -> KineticState:
    """Discretize ``kernel`` with ``grid.nv`` nodes and lay down the initial datum."""
    if not r > 0:
        raise DatumError("growth rate r must be positive")
    if kernel.kind == "continuous" and not kernel.bounded:
        raise DatumError(f"kernel {kernel.name} is unbounded; simulate a truncation instead")
    v, q, M = kernel.discrete(grid.nv)
    x = grid.x
    g = np.ascontiguousarray(_datum_values(datum, x, v, M, r), dtype=float)
    if g.shape != (v.size, x.size):
        raise DatumError(f"datum shape {g.shape} does not match grid {(v.size, x.size)}")
    if np.any(g < -tol) or np.any(g > M[:, None] * (1 + tol) + tol):
        raise DatumError("initial datum must satisfy 0 <= g <= M")
    li = None if left_in is None else np.ascontiguousarray(left_in, dtype=float)
    ri = None if right_in is None else np.ascontiguousarray(right_in, dtype=float)
    return KineticState(x, v, q, M, g, float(r), float(c), 0.0, li, ri, kernel.name)


def _check_dt(state: KineticState, dt: float, duhamel: bool):
    amax = float(np.max(np.abs(state.a)))
    if amax * dt > state.dx * (1 + 1e-12):
        raise SimulationError(
            f"time step {dt:.3g} violates the transport limit dx/max|v-c| = {state.dx / amax:.3g}"
        )
    if not duhamel and dt * (1.0 + state.r) > 1 + 1e-12:
        raise SimulationError(
            f"time step {dt:.3g} violates the reaction limit 1/(1+r) = {1 / (1 + state.r):.3g}"
        )


def step(state: KineticState, dt: float | None = None, scheme: str = "euler") -> KineticState:
    """Advance ``state`` in place by one step and return it."""
    duhamel = scheme == "duhamel"
    if scheme not in ("euler", "duhamel"):
        raise ValueError(f"unknown scheme {scheme!r}")
    dt = state.max_dt() if dt is None else float(dt)
    _check_dt(state, dt, duhamel)
    core.kinetic_step(state.g, np.ascontiguousarray(state.a), state.M, state.q, state.r, dt,
                      state.dx, state.left_in, state.right_in, state._rho, duhamel)
    state.t += dt
    state.steps += 1
    return state


def step_duhamel(state: KineticState, dt: float | None = None) -> KineticState:
    return step(state, dt, "duhamel")


def front_position(state_or_rho, x=None, level: float = 0.5) -> float:
    """Largest crossing of ``rho = level``, linearly interpolated."""
    if isinstance(state_or_rho, KineticState):
        rho, x = state_or_rho.rho, state_or_rho.x
    else:
        rho = np.asarray(state_or_rho)
    above = rho >= level
    idx = np.nonzero(above[:-1] & ~above[1:])[0]
    if idx.size == 0:
        raise SimulationError(f"no crossing of level {level} on the grid")
    i = int(idx[-1])
    return float(x[i] + (rho[i] - level) / (rho[i] - rho[i + 1]) * (x[i + 1] - x[i]))


@dataclass
class FrontTrace:
    levels: tuple
    frame_speed: float = 0.0
    times: list = field(default_factory=list)
    positions: dict = field(default_factory=dict)  # level -> list, frame coordinates
    snapshots: list = field(default_factory=list)  # (t, rho)

    def lab(self, level: float = 0.5) -> tuple[np.ndarray, np.ndarray]:
        t = np.asarray(self.times)
        return t, np.asarray(self.positions[level]) + self.frame_speed * t

    def speed(self, level: float = 0.5, window: tuple = (0.5, 1.0)) -> float:
        """Least-squares lab-frame speed over a fraction window of the run."""
        t, x = self.lab(level)
        if t.size < 2:
            raise SimulationError("need at least two front samples for a speed")
        span = t[-1] - t[0]
        sel = (t >= t[0] + window[0] * span) & (t <= t[0] + window[1] * span)
        if sel.sum() < 2:
            sel = slice(-2, None)
        return float(np.polyfit(t[sel], x[sel], 1)[0])


def evolve(state: KineticState, T: float, output_interval: float, levels=(0.5,),
           scheme: str = "euler", cfl: float = DEFAULT_CFL, snapshots: bool = False,
           track_exit: bool = True, margin: float = 0.02) -> tuple[KineticState, FrontTrace]:
    """Run to time ``T`` recording front positions every ``output_interval``."""
    if not (T > 0 and output_interval > 0):
        raise ValueError("T and output_interval must be positive")
    levels = tuple(levels)
    trace = FrontTrace(levels, state.c, positions={lv: [] for lv in levels})
    # A fixed step keeps the Courant number equal to ``cfl`` under grid refinement;
    # output times are rounded to whole steps.
    dt = state.max_dt(cfl)
    per = max(1, int(round(output_interval / dt)))
    n_out = max(1, int(round(T / (per * dt))))
    width = state.x[-1] - state.x[0]

    def record():
        rho = state.rho
        trace.times.append(state.t)
        for lv in levels:
            try:
                pos = front_position(rho, state.x, lv)
            except SimulationError:
                pos = math.nan
            trace.positions[lv].append(pos)
            if track_exit and math.isfinite(pos):
                speed = _recent_speed(trace, lv)
                rest = max(T - state.t, 0.0)
                if pos > state.x[-1] - margin * width:
                    need = pos + max(speed, 0.0) * rest + 2 * margin * width
                    raise SimulationError(
                        f"front at level {lv} left the window at t={state.t:.4g} (x={pos:.4g}); "
                        f"extend x_hi to about {need:.4g}"
                    )
                # Only a front that has moved towards the left edge counts as leaving it.
                if pos < state.x[0] + margin * width and pos < trace.positions[lv][0]:
                    need = pos + min(speed, 0.0) * rest - 2 * margin * width
                    raise SimulationError(
                        f"front at level {lv} left the window at t={state.t:.4g} (x={pos:.4g}); "
                        f"extend x_lo to about {need:.4g}"
                    )
        if snapshots:
            trace.snapshots.append((state.t, rho))

    record()
    for _ in range(n_out):
        for _ in range(per):
            step(state, dt, scheme)
        if not np.all(np.isfinite(state.g)):
            raise SimulationError(f"non-finite values at t={state.t:.4g}")
        record()
    return state, trace


def _recent_speed(trace: FrontTrace, level) -> float:
    t = trace.times
    x = trace.positions[level]
    if len(t) < 2 or not math.isfinite(x[-2]):
        return 0.0
    return (x[-1] - x[-2]) / (t[-1] - t[-2]) + trace.frame_speed


def scheme_speed(state: KineticState, cfl: float = DEFAULT_CFL, tol: float = 1e-13) -> tuple[float, float]:
    """Asymptotic lab-frame speed of the upwind/Euler scheme at the step ``evolve`` uses.

    Exponential data ``exp(-lam (x - c t)) G(v)`` are exact discrete solutions
    when ``1 = dt (1 + r) sum q M tau / (exp(lam c dt) - (1 - dt) tau)``, with
    ``tau`` the upwind symbol.  The speed is the minimum of ``c(lam)``.
    Returns ``(speed, lam)``.
    """
    from .dispersion import bisect, golden_min

    dt = state.max_dt(cfl)
    nu = state.v * dt / state.dx
    qM = state.q * state.M
    r = state.r

    def tau(lam):
        return np.where(nu > 0, 1.0 + nu * np.expm1(lam * state.dx),
                        1.0 + np.abs(nu) * np.expm1(-lam * state.dx))

    def speed(lam):
        t = tau(lam)
        active = qM > 0
        floor = float(np.max(np.log((1.0 - dt) * t[active]))) / (lam * dt)

        def f(c):
            den = np.exp(lam * c * dt) - (1.0 - dt) * t
            return dt * (1.0 + r) * float(np.sum(qM * t / den)) - 1.0

        lo = floor + 1e-12 * max(1.0, abs(floor))
        hi = max(lo, 0.0) + 1.0
        while f(hi) > 0:
            hi = lo + 2.0 * (hi - lo)
        while f(lo) < 0:
            lo = floor + 0.5 * (lo - floor)
        return bisect(f, lo, hi, tol)

    grid = np.geomspace(1e-3, 1e2, 200) / max(float(np.max(np.abs(state.v))), 1e-300)
    vals = np.array([speed(x) for x in grid])
    k = int(np.argmin(vals))
    lo, hi = grid[max(k - 1, 0)], grid[min(k + 1, grid.size - 1)]
    lam, c = golden_min(speed, lo, hi, 1e-10 * hi)
    return float(c), float(lam)


@dataclass(frozen=True)
class OrderingReport:
    min_gap: float
    time_of_min: float
    ordered: bool


def compare_runs(lower: KineticState, upper: KineticState, T: float, tol: float = 1e-12,
                 scheme: str = "euler", cfl: float = DEFAULT_CFL) -> OrderingReport:
    """Evolve two data in lockstep and track ``min(upper - lower)``."""
    if lower.g.shape != upper.g.shape or lower.c != upper.c or lower.r != upper.r:
        raise ValueError("runs must share grid, frame and rate")
    dt = min(lower.max_dt(cfl), upper.max_dt(cfl))
    n = max(1, math.ceil(T / dt))
    dt = T / n
    gap = float(np.min(upper.g - lower.g))
    worst, when = gap, 0.0
    for _ in range(n):
        step(lower, dt, scheme)
        step(upper, dt, scheme)
        gap = float(np.min(upper.g - lower.g))
        if gap < worst:
            worst, when = gap, lower.t
    return OrderingReport(worst, when, worst >= -tol)
