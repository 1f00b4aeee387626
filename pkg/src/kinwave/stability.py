"""Weighted energy estimates for perturbations of a traveling wave.

For a wave profile ``f`` of speed ``c`` let ``D = (1 + r) M - r f``.  The local
decay rate ``Lam(z)`` is the smallest root of

    sum_j q_j D_j(z) / (1 + Lam (c - v_j)) = 1,

the growth factor ``Gam`` solves ``Gam' = 2 Lam Gam`` with ``Gam(0) = 1``, and
perturbations are measured with the weight ``Gam / D``.  In that norm the
energy of a solution of the linearized (or nonlinear) equation decreases at
least as fast as the dissipation ``sum A u^2 Gam / D``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import core
from . import dispersion as ds
from . import kernels as kn
from . import simulator as sm
from .waves import WaveProfile

# Slack of the discrete energy inequality, per unit (dt + dz) and unit energy-time.
SLACK_CONSTANT = 1.0


class StabilityError(RuntimeError):
    pass


@dataclass(eq=False)
class WeightField:
    Lam: np.ndarray
    log_Gam: np.ndarray
    D: np.ndarray  # (1 + r) M - r f
    phi: np.ndarray
    weight: np.ndarray  # exp(-2 phi) = Gam / D
    A: np.ndarray  # dissipation coefficient
    lam_c: float
    corrupted: bool = False


def scheme_lambda_c(p: WaveProfile) -> float:
    """Smallest root of the node-sum dispersion relation used by the profile."""
    problem = ds.DispersionProblem(p.r, kn.atomic(p.v, p.q * p.M))
    return ds.lambda_c(problem, p.c)


def compute_Lambda(p: WaveProfile, tol: float = 1e-15) -> tuple[np.ndarray, float]:
    lam_c = scheme_lambda_c(p)
    D = (1.0 + p.r) * p.M[:, None] - p.r * p.f
    w = (p.q[:, None] * D)
    s = (p.c - p.v)[:, None]

    def G(L):
        return np.sum(w / (1.0 + L[None, :] * s), axis=0)

    nz = p.z.size
    lo = np.zeros(nz)
    hi = np.full(nz, lam_c)
    # G(0) = 1 + r - r rho >= 1 and G(lam_c) <= 1; G is convex.
    g_hi = G(hi)
    if np.any(g_hi > 1.0 + 1e-10):
        raise StabilityError("profile exceeds M somewhere: no root below lam_c")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        above = G(mid) > 1.0
        lo = np.where(above, mid, lo)
        hi = np.where(above, hi, mid)
        if np.max(hi - lo) <= tol * lam_c:
            break
    L = 0.5 * (lo + hi)
    return np.where(G(np.zeros(nz)) <= 1.0, 0.0, L), lam_c


def compute_weight(p: WaveProfile, Lam: np.ndarray | None = None, gamma: float | None = None,
                   corrupt: bool = False) -> WeightField:
    """Weight, phase and dissipation coefficient.

    ``gamma`` switches the dissipation to the nonlinear form for data bounded
    below by ``gamma * f``.  ``corrupt`` replaces ``Gam`` by 1 (a negative control).
    """
    lam_c = None
    if Lam is None:
        Lam, lam_c = compute_Lambda(p)
    z = p.z
    cum = np.concatenate([[0.0], np.cumsum(0.5 * (Lam[1:] + Lam[:-1]) * np.diff(z))])
    log_Gam = 2.0 * (cum - np.interp(0.0, z, cum))
    if corrupt:
        log_Gam = np.zeros_like(log_Gam)
    D = (1.0 + p.r) * p.M[:, None] - p.r * p.f
    with np.errstate(divide="ignore"):
        phi = 0.5 * (np.log(D) - log_Gam[None, :])
    weight = np.exp(log_Gam[None, :]) / D
    rho = p.rho[None, :]
    if gamma is None:
        A = 0.5 * p.r * (rho + p.f / D)
    else:
        if not 0.5 < gamma <= 1.0:
            raise StabilityError("the nonlinear estimate needs gamma in (1/2, 1]")
        A = 0.5 * p.r * ((2.0 * gamma - 1.0) * rho + p.f / D)
    return WeightField(Lam, log_Gam, D, phi, weight, A,
                       lam_c if lam_c is not None else float("nan"), corrupt)


@dataclass
class EnergyTrace:
    times: list = field(default_factory=list)
    energy: list = field(default_factory=list)
    dissipated: list = field(default_factory=list)  # integral of dissipation since last sample
    slack: list = field(default_factory=list)
    comparison_min: list = field(default_factory=list)  # min(rho_u - (gamma - 1) rho_f)

    @property
    def excess(self) -> np.ndarray:
        """``E_{k+1} - E_k + dissipated - slack``; nonpositive when the estimate holds."""
        E = np.asarray(self.energy)
        return np.diff(E) + np.asarray(self.dissipated) - np.asarray(self.slack)

    @property
    def ok(self) -> bool:
        return bool(np.all(self.excess <= 0.0))


def bump(p: WaveProfile, center: float, width: float, amplitude: float = 0.1) -> np.ndarray:
    """Compactly supported perturbation ``amplitude * M(v) * cos^2`` bump in ``z``."""
    s = (p.z - center) / width
    prof = np.where(np.abs(s) < 1.0, np.cos(0.5 * math.pi * s) ** 2, 0.0)
    return amplitude * p.M[:, None] * prof[None, :]


def energy(p: WaveProfile, w: WeightField, u: np.ndarray) -> float:
    return 0.5 * p.dz * float(np.sum(p.q[:, None] * w.weight * u * u))


def dissipation(p: WaveProfile, w: WeightField, u: np.ndarray) -> float:
    return p.dz * float(np.sum(p.q[:, None] * w.A * w.weight * u * u))


def lyapunov_monitor(p: WaveProfile, w: WeightField, u0: np.ndarray, T: float,
                     output_interval: float = 0.5, mode: str = "linear", gamma: float = 0.75,
                     slack_constant: float = SLACK_CONSTANT) -> EnergyTrace:
    """Evolve a perturbation and record weighted energy against dissipation.

    ``linear`` freezes the coefficients at the wave; ``nonlinear`` evolves
    ``g = f + u`` with the full scheme and requires ``g >= gamma f`` initially.
    """
    if mode not in ("linear", "nonlinear"):
        raise ValueError(f"unknown mode {mode!r}")
    u = np.ascontiguousarray(u0, dtype=float).copy()
    if u.shape != p.f.shape:
        raise StabilityError("perturbation shape does not match the profile")
    a = np.ascontiguousarray(p.v - p.c)
    dt = p.dt
    per = max(1, int(round(output_interval / dt)))
    n_out = max(1, int(round(T / (per * dt))))
    rho_f = p.rho
    trace = EnergyTrace()
    buf = np.empty(p.z.size)
    if mode == "linear":
        loss = np.ascontiguousarray(1.0 + p.r * rho_f)
        gain = np.ascontiguousarray(w.D)
        inflow = np.zeros(p.v.size)
    else:
        g = np.ascontiguousarray(p.f + u)
        if np.any(g < gamma * p.f - 1e-14) or np.any(g > p.M[:, None] + 1e-14):
            raise StabilityError("nonlinear data must satisfy gamma f <= f + u <= M")
        state = sm.KineticState(p.z.copy(), p.v, p.q, p.M, g, p.r, p.c,
                                left_in=p.left_in, right_in=p.right_in)
        # The profile is stepped alongside so its residual drift cancels in u.
        base = sm.KineticState(p.z.copy(), p.v, p.q, p.M, np.ascontiguousarray(p.f.copy()), p.r,
                               p.c, left_in=p.left_in, right_in=p.right_in)

    def sample(diss_sum, e_int):
        trace.times.append(t)
        trace.energy.append(energy(p, w, u))
        if trace.energy[:-1]:
            trace.dissipated.append(diss_sum)
            trace.slack.append(slack_constant * (dt + p.dz) * e_int)
        if mode == "nonlinear":
            trace.comparison_min.append(float(np.min(p.q @ u - (gamma - 1.0) * rho_f)))

    t = 0.0
    sample(0.0, 0.0)
    for _ in range(n_out):
        diss_sum = 0.0
        e_int = 0.0
        for _ in range(per):
            diss_sum += dt * dissipation(p, w, u)
            e_int += dt * energy(p, w, u)
            if mode == "linear":
                core.linear_step(u, a, loss, gain, p.q, dt, p.dz, inflow, buf)
            else:
                sm.step(state, dt)
                sm.step(base, dt)
                u = state.g - base.g
            t += dt
        sample(diss_sum, e_int)
    return trace


@dataclass(frozen=True)
class EigenReport:
    z: float
    max_eigenvalue: float
    null_residual: float  # |T W| / |W| in the q-weighted norm
    W: np.ndarray


def eigen_check(p: WaveProfile, w: WeightField, index: int) -> EigenReport:
    """Assemble the symmetric velocity operator at one position and test its null vector."""
    i = int(index)
    D = w.D[:, i]
    phi = w.phi[:, i]
    f = p.f[:, i]
    rho = float(p.rho[i])
    Lam = float(w.Lam[i])
    s = p.v - p.c
    # (v - c) d_z f from the wave equation, not from differences of the profile.
    transport = rho * D - f
    dphi_flux = -0.5 * p.r * transport / D - s * Lam  # (v - c) d_z phi
    A = 0.5 * p.r * (rho + f / D)
    diag = A - (dphi_flux + 1.0 + p.r * rho)
    ephi = np.exp(phi[None, :] - phi[:, None])  # exp(phi_k - phi_j)
    kern = 0.5 * (D[:, None] * ephi + D[None, :] / ephi)
    sq = np.sqrt(p.q)
    S = np.diag(diag) + sq[:, None] * kern * sq[None, :]
    eig = float(np.max(np.linalg.eigvalsh(0.5 * (S + S.T))))
    W = np.sqrt(D * math.exp(w.log_Gam[i])) / (1.0 + Lam * (p.c - p.v))
    TW = diag * W + kern @ (p.q * W)
    norm = math.sqrt(float(np.sum(p.q * W * W)))
    res = math.sqrt(float(np.sum(p.q * TW * TW))) / norm
    return EigenReport(float(p.z[i]), eig, res, W)
