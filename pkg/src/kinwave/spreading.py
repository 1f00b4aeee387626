"""Fronts for velocity kernels with unbounded support.

Gaussian and Cauchy kernels have no minimal speed.  They are studied through
truncations to ``[-A, A]`` (each of which has a finite speed ``c*_A``), through
accelerating runs whose envelope over ``A`` is fitted by a power law, and
through explicit upper envelopes ``rho_bar(t, x) = M(x / (t + a)) exp(r (t + a))``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import dispersion as ds
from . import kernels as kn
from . import simulator as sm

FRONT_LEVEL = 0.01
FIT_SKIP = 0.2
SLOPE_WINDOW = 0.1  # trailing fraction of a run used for its late slope


class SpreadingError(ValueError):
    pass


def _density(family: str, sigma: float):
    if family == "gaussian":
        norm = 1.0 / (math.sqrt(2.0 * math.pi) * sigma)
        return lambda y: norm * np.exp(-0.5 * (np.asarray(y, dtype=float) / sigma) ** 2)
    if family == "cauchy":
        return lambda y: sigma / (math.pi * (sigma**2 + np.asarray(y, dtype=float) ** 2))
    raise SpreadingError(f"unknown family {family!r}; use 'gaussian' or 'cauchy'")


def base_kernel(family: str, sigma: float = 1.0, n_nodes: int = kn.DEFAULT_NODES) -> kn.VelocityKernel:
    if family == "gaussian":
        return kn.gaussian(sigma, n_nodes)
    if family == "cauchy":
        return kn.cauchy(sigma, n_nodes)
    raise SpreadingError(f"unknown family {family!r}; use 'gaussian' or 'cauchy'")


# ---------------------------------------------------------------- truncations

@dataclass(frozen=True)
class SweepEntry:
    A: float
    r_A: float
    c_star: float
    lam: float
    edge: bool


@dataclass
class TruncationSweep:
    r: float
    sigma: float
    entries: list

    @property
    def speeds(self) -> np.ndarray:
        return np.array([e.c_star for e in self.entries])

    @property
    def increasing(self) -> bool:
        return bool(np.all(np.diff(self.speeds) > 0))

    def pairs(self) -> list:
        return [(e.A, e.c_star) for e in self.entries]


def truncation_sweep(r: float, sigma: float, A_list, family: str = "gaussian",
                     n_nodes: int | None = None) -> TruncationSweep:
    """Minimal speed of each renormalized truncation ``[-A, A]``."""
    base = base_kernel(family, sigma)
    out = []
    for A in sorted(float(a) for a in A_list):
        kA, rA = kn.truncate_renormalize(base, A, r)
        root = ds.minimal_speed(ds.DispersionProblem(rA, kA, n_nodes=n_nodes))
        out.append(SweepEntry(A, rA, root.c, root.lam, root.edge))
    return TruncationSweep(r, sigma, out)


# ---------------------------------------------------------- accelerating runs

@dataclass
class SpreadingRun:
    A: float
    r_A: float
    c_star: float
    trace: sm.FrontTrace
    x: np.ndarray
    rho: np.ndarray  # density at the final time
    level: float = FRONT_LEVEL

    def positions(self, level: float | None = None) -> tuple[np.ndarray, np.ndarray]:
        return self.trace.lab(self.level if level is None else level)

    def late_slope(self, level: float | None = None, window: float = SLOPE_WINDOW) -> float:
        return self.trace.speed(self.level if level is None else level, (1.0 - window, 1.0))

    def decay_rate(self, lo: float = 1e-6, hi: float = 1e-2) -> float:
        """Exponential decay rate of the final density ahead of the front."""
        rho = self.rho
        i0 = int(np.argmax(rho < hi))
        sel = np.zeros(rho.size, dtype=bool)
        sel[i0:] = (rho[i0:] > lo) & (rho[i0:] < hi)
        if sel.sum() < 3:
            raise SpreadingError("front tail not resolved between the decay levels")
        return float(-np.polyfit(self.x[sel], np.log(rho[sel]), 1)[0])


def envelope_extent(sigma: float, r: float, T: float, a: float = 1.0, eps: float = 0.2) -> float:
    """Distance beyond which the Gaussian envelope forces the density to vanish."""
    return (1.0 + eps) * sigma * math.sqrt(2.0 * r) * (T + a) ** 1.5


def accelerating_run(sigma: float, r: float, A: float, T: float, datum="step", nx: int = 8000,
                     nv: int = 64, output_interval: float = 0.5, levels=(FRONT_LEVEL, 0.5),
                     x_lo: float = -20.0, x_hi: float | None = None, eps: float = 0.2,
                     family: str = "gaussian") -> SpreadingRun:
    """Lab-frame run on the truncation ``[-A, A]`` with front tracking.

    The right edge is the smaller of the envelope bound and ``1.1 c*_A T``;
    a front that still reaches it raises with the required ``x_hi``.
    """
    base = base_kernel(family, sigma, nv)
    kA, rA = kn.truncate_renormalize(base, A, r)
    c_star = ds.minimal_speed(ds.DispersionProblem(rA, kA.with_nodes(kn.DEFAULT_NODES))).c
    if x_hi is None:
        reach = 1.1 * c_star * T
        if family == "gaussian":
            reach = min(reach, envelope_extent(sigma, r, T, 1.0, eps))
        x_hi = reach + 20.0 * sigma
    state = sm.init_state(kA, rA, sm.Grid(x_lo, x_hi, nx, nv), datum)
    state, trace = sm.evolve(state, T, output_interval, levels=levels)
    return SpreadingRun(A, rA, c_star, trace, state.x.copy(), state.rho.copy(), levels[0])


def fit_power_law(traces, level: float | None = None, skip: float = FIT_SKIP,
                  t_max: float | None = None) -> tuple[float, float, float]:
    """Fit ``x = prefactor * t**exponent`` to the envelope of several fronts.

    ``traces`` holds runs (or ``(t, x)`` pairs).  The envelope is the maximum
    front position over the traces at each time of the first trace; the first
    ``skip`` fraction of samples is discarded.  Returns the exponent, the
    prefactor and the rms residual of the log-log fit.
    """
    series = []
    for tr in traces:
        if isinstance(tr, SpreadingRun):
            series.append(tr.positions(level))
        elif isinstance(tr, sm.FrontTrace):
            series.append(tr.lab(level if level is not None else tr.levels[0]))
        else:
            series.append((np.asarray(tr[0], dtype=float), np.asarray(tr[1], dtype=float)))
    if not series:
        raise SpreadingError("no traces to fit")
    t = series[0][0]
    end = min(s[0][-1] for s in series)
    if t_max is not None:
        end = min(end, t_max)
    t = t[t <= end + 1e-12]
    env = np.max([np.interp(t, s[0], s[1]) for s in series], axis=0)
    keep = np.arange(t.size) >= int(math.ceil(skip * t.size))
    t, env = t[keep], env[keep]
    if t.size < 3 or t[0] <= 0:
        raise SpreadingError("degenerate fit window: need three samples at positive times")
    if np.any(env <= 0):
        raise SpreadingError("non-positive front positions inside the fit window")
    lt, lx = np.log(t), np.log(env)
    slope, icpt = np.polyfit(lt, lx, 1)
    resid = lx - (slope * lt + icpt)
    return float(slope), float(math.exp(icpt)), float(math.sqrt(np.mean(resid**2)))


# ------------------------------------------------------------------ envelopes

@dataclass(frozen=True)
class Envelope:
    family: str
    sigma: float
    r: float
    a: float
    b: float

    def __post_init__(self):
        if self.family not in ("gaussian", "cauchy"):
            raise SpreadingError(f"unknown family {self.family!r}")
        if not (self.sigma > 0 and self.r > 0):
            raise SpreadingError("sigma and r must be positive")
        if self.family == "gaussian":
            if not self.b >= 1.0:
                raise SpreadingError(f"need b >= 1 (b = {self.b})")
            if not self.a >= self.b:
                raise SpreadingError(f"need a >= b (a = {self.a}, b = {self.b})")
        else:
            if not self.a >= 1.25:
                raise SpreadingError(f"need a >= 5/4 (a = {self.a})")
            if not self.b >= 1.0:
                raise SpreadingError(f"need b >= 1 (b = {self.b})")
            if not self.b <= self.a - 0.25:
                raise SpreadingError(f"need b <= a - 1/4 (a = {self.a}, b = {self.b})")

    @property
    def M(self):
        return _density(self.family, self.sigma)

    def __call__(self, t, x):
        t = np.asarray(t, dtype=float)
        return self.M(np.asarray(x, dtype=float) / (t + self.a)) * np.exp(self.r * (t + self.a))

    def x_level(self, t: float, threshold: float) -> float:
        """Positive ``x`` where the envelope equals ``threshold`` (0 if it never exceeds it)."""
        s = t + self.a
        if self.family == "gaussian":
            arg = self.r * s - math.log(threshold * self.sigma * math.sqrt(2.0 * math.pi))
            return s * self.sigma * math.sqrt(2.0 * arg) if arg > 0 else 0.0
        y2 = self.sigma * math.exp(self.r * s) / (math.pi * threshold) - self.sigma**2
        return s * math.sqrt(y2) if y2 > 0 else 0.0

    def datum_bound(self, x, v):
        return datum_bound(self.family, self.sigma, self.r, self.a, self.b, x, v)


def datum_bound(family: str, sigma: float, r: float, a: float, b: float, x, v):
    """``(1/b) M(x/b) M(v) exp(r a)``."""
    M = _density(family, sigma)
    return M(np.asarray(x, dtype=float) / b) / b * M(v) * math.exp(r * a)


def envelope(family: str, sigma: float = 1.0, r: float = 1.0, a: float = 1.0, b: float = 1.0) -> Envelope:
    return Envelope(family, float(sigma), float(r), float(a), float(b))


def leading_level_set(env: Envelope, t: float) -> float:
    """Leading-order growth of the envelope's level sets."""
    s = t + env.a
    if env.family == "gaussian":
        return env.sigma * math.sqrt(2.0 * env.r) * s**1.5
    return math.sqrt(env.sigma / math.pi) * s * math.exp(env.r * s / 2.0)


@dataclass
class ViolationReport:
    A: float
    times: list = field(default_factory=list)
    max_violation: list = field(default_factory=list)  # max_x rho_g - min(1, rho_bar)
    beyond_max: list = field(default_factory=list)  # max rho_g beyond the level set
    initial_ok: bool = True

    @property
    def worst(self) -> float:
        return float(max(self.max_violation))

    def ok(self, tol: float = 1e-3) -> bool:
        return self.worst <= tol


def envelope_check(env: Envelope, A: float, T: float, x_half: float = 40.0, nx: int = 4000,
                   nv: int = 64, output_interval: float = 0.25, eps: float = 0.2) -> ViolationReport:
    """Evolve the capped envelope datum on ``[-A, A]`` and compare against ``min(1, rho_bar)``."""
    base = base_kernel(env.family, env.sigma, nv)
    kA, rA = kn.truncate_renormalize(base, A, env.r)
    grid = sm.Grid(-x_half, x_half, nx, nv)
    v, q, MA = kA.discrete(nv)
    g0 = np.minimum(MA[:, None], env.datum_bound(grid.x[None, :], v[:, None]))
    if np.any(g0 > env.datum_bound(grid.x[None, :], v[:, None]) * (1 + 1e-12)):
        raise SpreadingError("datum exceeds the envelope hypothesis")
    zero = np.zeros(v.size)
    state = sm.init_state(kA, rA, grid, {"kind": "array", "g": g0}, left_in=zero, right_in=zero)
    dt = state.max_dt()
    per = max(1, int(round(output_interval / dt)))
    n_out = max(1, int(round(T / (per * dt))))
    rep = ViolationReport(A)

    def record():
        rho = state.rho
        bar = np.minimum(1.0, env(state.t, state.x))
        rep.times.append(state.t)
        rep.max_violation.append(float(np.max(rho - bar)))
        edge = (1.0 + eps) * leading_level_set(env, state.t)
        far = np.abs(state.x) >= edge
        rep.beyond_max.append(float(np.max(rho[far])) if far.any() else 0.0)

    record()
    rep.initial_ok = rep.max_violation[0] <= 1e-12
    for _ in range(n_out):
        for _ in range(per):
            sm.step(state, dt)
        record()
    return rep


# -------------------------------------------------- closed-form convolutions

def convolution_closed_form(family: str, sigma: float, x: float, t: float, s: float, a: float) -> float:
    """``int M(v) M((x - v (t - s)) / (s + a)) dv`` in closed form."""
    S, tau = s + a, t - s
    if family == "gaussian":
        q = S * S + tau * tau
        return S / math.sqrt(q) * math.exp(-x * x / (2.0 * sigma**2 * q)) / (math.sqrt(2 * math.pi) * sigma)
    if family == "cauchy":
        return sigma / math.pi * S * (t + a) / (x * x + sigma**2 * (t + a) ** 2)
    raise SpreadingError(f"unknown family {family!r}")


def _line_rule(family: str, sigma: float, centers, widths, n: int):
    """Composite Gauss-Legendre nodes on the real line covering the given bumps."""
    if family == "gaussian":
        lo = min(c - kn.GAUSSIAN_CUTOFF * w for c, w in zip(centers, widths))
        hi = max(c + kn.GAUSSIAN_CUTOFF * w for c, w in zip(centers, widths))
        return kn.gauss_legendre_panels(np.linspace(lo, hi, n + 1), kn.PANEL_ORDER)
    # v = sigma tan(theta) with extra panels around each peak in theta.
    pts = [-math.pi / 2, math.pi / 2]
    for c, w in zip(centers, widths):
        for k in (-4, -1, 0, 1, 4):
            pts.append(math.atan((c + k * w) / sigma))
    pts = np.unique(np.clip(pts, -math.pi / 2, math.pi / 2))
    brk = np.unique(np.concatenate([np.linspace(p, q, n // len(pts) + 2) for p, q in zip(pts[:-1], pts[1:])]))
    th, w = kn.gauss_legendre_panels(brk, kn.PANEL_ORDER)
    return sigma * np.tan(th), w * sigma / np.cos(th) ** 2


@dataclass(frozen=True)
class ConvolutionReport:
    family: str
    quadrature: float
    closed_form: float
    bound: float  # M(x / (t + a))

    @property
    def error(self) -> float:
        return abs(self.quadrature - self.closed_form)

    @property
    def bound_holds(self) -> bool:
        return self.closed_form <= self.bound * (1 + 1e-14)


def convolution_identity_check(family: str, sigma: float, x: float, t: float, s: float, a: float,
                               panels: int = 400) -> ConvolutionReport:
    if not (0.0 <= s <= t and a > 0):
        raise SpreadingError("need 0 <= s <= t and a > 0")
    M = _density(family, sigma)
    S, tau = s + a, t - s
    if tau == 0.0:
        quad = float(M(x / S))
    else:
        nodes, w = _line_rule(family, sigma, (0.0, x / tau), (sigma, sigma * S / tau), panels)
        quad = float(np.sum(w * M(nodes) * M((x - nodes * tau) / S)))
    return ConvolutionReport(family, quad, convolution_closed_form(family, sigma, x, t, s, a),
                             float(M(x / (t + a))))


def initial_ratio(family: str, sigma: float, r: float, a: float, b: float, t, x,
                  panels: int = 400) -> np.ndarray:
    """Free-streaming part of the envelope datum over ``rho_bar``, times ``exp((1+r) t)``.

    Values at most 1 mean the datum stays under the envelope.  The
    free-streaming integral is computed by quadrature; ``a`` and ``b`` are not
    checked so that parameter sets outside the admissible range can be probed.
    """
    t = np.atleast_1d(np.asarray(t, dtype=float))
    x = np.atleast_1d(np.asarray(x, dtype=float))
    M = _density(family, sigma)
    out = np.empty((t.size, x.size))
    for i, ti in enumerate(t):
        for j, xj in enumerate(x):
            if ti == 0.0:
                free = float(M(xj / b)) / b * math.exp(r * a)
            else:
                nodes, w = _line_rule(family, sigma, (0.0, xj / ti), (sigma, sigma * b / ti), panels)
                free = float(np.sum(w * datum_bound(family, sigma, r, a, b, xj - nodes * ti, nodes)))
            rho_bar = float(M(xj / (ti + a))) * math.exp(r * (ti + a))
            out[i, j] = free * math.exp(-ti) / rho_bar * math.exp((1.0 + r) * ti)
    return out


def initial_ratio_closed_form(family: str, sigma: float, r: float, a: float, b: float, t, x):
    """Closed form of :func:`initial_ratio` (valid for any ``a``, ``b``)."""
    t = np.asarray(t, dtype=float)
    x = np.asarray(x, dtype=float)
    if family == "gaussian":
        q = t * t + b * b
        return np.exp(-x * x / (2 * sigma**2 * (t + a) ** 2) * ((t + a) ** 2 / q - 1.0)) / np.sqrt(q)
    return (t + b) / (t + a) ** 2 * (x * x + sigma**2 * (t + a) ** 2) / (x * x + sigma**2 * (t + b) ** 2)
