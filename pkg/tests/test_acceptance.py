"""Acceptance suite: one test per criterion, each printing a single verdict line."""

import math

import numpy as np
import pytest

from kinwave import dispersion as ds
from kinwave import kernels as kn
from kinwave import simulator as sm
from kinwave import spreading as sp
from kinwave import stability as st
from kinwave import waves as wv

import oracles


@pytest.fixture
def verdict(capsys):
    def report(number, title, ok, detail):
        with capsys.disabled():
            print(f"\n[{'PASS' if ok else 'FAIL'}] AC{number:02d} {title}: {detail}")
        assert ok, detail

    return report


def bimodal():
    v = np.linspace(-1.0, 1.0, 401)
    m = np.exp(-((v - 0.6) / 0.15) ** 2) + np.exp(-((v + 0.6) / 0.15) ** 2) + 0.05
    return kn.tabulated(v, m)


def test_ac01_two_atom_closed_form(verdict):
    worst = 0.0
    for r in (0.25, 0.5, 2.0):
        for v_max in (1.0, 3.0):
            c = ds.minimal_speed(ds.DispersionProblem(r, kn.two_atom(v_max))).c
            worst = max(worst, abs(c - oracles.two_atom_speed(r, v_max)))
    verdict(1, "two-atom closed form", worst <= 1e-8, f"max abs error {worst:.2e} (tol 1e-8)")


GRID_CASES = [
    # kernel, r, oracle integral, lambda window, c window, frozen oracle value
    (lambda: kn.uniform(1.0), 0.5, oracles.uniform_I(0.5, 1.0), (1e-3, 20.0), (0.0, 1.0), 0.6430415055250556),
    (lambda: kn.uniform(1.0), 1.0, oracles.uniform_I(1.0, 1.0), (1e-3, 20.0), (0.0, 1.0), 0.7714509263784343),
    (lambda: kn.truncated_gaussian(1.0, 4.0), 0.5, oracles.truncated_gaussian_I(0.5, 1.0, 4.0),
     (1e-3, 3.0), (0.0, 4.0), 1.5398197164307195),
    (lambda: kn.truncated_gaussian(1.0, 4.0), 1.0, oracles.truncated_gaussian_I(1.0, 1.0, 4.0),
     (1e-3, 3.0), (0.0, 4.0), 2.155657994907),
]


def test_ac02_grid_scan_oracle(verdict):
    worst = 0.0
    for make, r, I, lam_rng, c_rng, frozen in GRID_CASES:
        scanned, _ = oracles.grid_scan_speed(I, lam_rng, c_rng)
        assert scanned == pytest.approx(frozen, rel=1e-10)
        c = ds.minimal_speed(ds.DispersionProblem(r, make())).c
        worst = max(worst, abs(c - scanned) / scanned)
    verdict(2, "grid-scan oracle", worst <= 1e-6, f"max rel difference {worst:.2e} (tol 1e-6)")


def test_ac03_scaling_law(verdict):
    worst = 0.0
    for k in (kn.uniform(1.0), kn.truncated_gaussian(1.0, 4.0)):
        for r in (0.5, 2.0):
            base = ds.minimal_speed(ds.DispersionProblem(r, k)).c
            for s in (0.5, 2.0):
                c = ds.minimal_speed(ds.DispersionProblem(r, k.scaled(s))).c
                worst = max(worst, abs(c - s * base) / (s * base))
    verdict(3, "scaling law", worst <= 1e-8, f"max rel deviation {worst:.2e} (tol 1e-8)")


def test_ac04_bounds_and_rearrangement(verdict):
    failures = []
    kernels = [kn.uniform(1.0), kn.truncated_gaussian(1.0, 4.0), kn.two_atom(1.0), bimodal()]
    for k in kernels:
        for r in (0.25, 0.5, 2.0):
            p = ds.DispersionProblem(r, k)
            c = ds.minimal_speed(p).c
            D = k.moments().diffusivity
            lo, hi = ds.comparison_bracket(r, p.v_max, D)
            if not lo - 1e-9 <= c <= hi + 1e-9:
                failures.append(f"{k.name} r={r}: {c:.6g} not in [{lo:.6g}, {hi:.6g}]")
    rep = ds.check_speed_bounds(ds.DispersionProblem(0.5, bimodal()))
    dec, c, inc = rep.rearrangement
    if not rep.rearrangement_ok:
        failures.append(f"rearrangement order broken: {dec:.6g}, {c:.6g}, {inc:.6g}")
    verdict(4, "comparison bracket and rearrangement", not failures,
            "; ".join(failures) or f"12 brackets hold; {dec:.6f} <= {c:.6f} <= {inc:.6f}")


def test_ac05_diffusion_limit(verdict):
    p = ds.DispersionProblem(1.0, kn.uniform(1.0))
    D = p.kernel.moments().diffusivity
    ratios = [ds.diffusion_limit_speed(p, e) / (2.0 * math.sqrt(D)) for e in (0.1, 0.05, 0.02, 0.01)]
    errors = [abs(x - 1.0) for x in ratios]
    monotone = all(b < a for a, b in zip(errors, errors[1:]))
    ok = 0.98 <= ratios[-1] <= 1.02 and monotone
    verdict(5, "diffusion limit", ok,
            f"ratios {', '.join(f'{x:.5f}' for x in ratios)}; monotone error {monotone}")


def _front_speed(kernel, nx):
    state = sm.init_state(kernel, 0.5, sm.Grid(-20.0, 280.0, nx, 64), "step")
    state, trace = sm.evolve(state, 250.0, 1.0)
    return trace.speed(0.5), sm.scheme_speed(sm.init_state(kernel, 0.5, sm.Grid(-20.0, 280.0, nx, 64)))[0]


def test_ac06_front_speed(verdict):
    notes, ok = [], True
    for k in (kn.uniform(1.0), kn.two_atom(1.0)):
        c_star = ds.minimal_speed(ds.DispersionProblem(0.5, k)).c
        runs = {nx: _front_speed(k, nx) for nx in (2000, 4000, 8000)}
        s = {nx: v[0] for nx, v in runs.items()}
        rel = abs(s[4000] - c_star) / c_star
        order = math.log2(abs(s[2000] - s[4000]) / abs(s[4000] - s[8000]))
        # asymptotic speed of the scheme itself, free of the finite-time delay
        ratio = abs(runs[4000][1] - c_star) / abs(runs[8000][1] - c_star)
        good = rel <= 0.03 and order >= 0.75 and ratio >= 1.8
        ok &= good
        notes.append(f"{k.name} err {100 * rel:.2f}% order {order:.2f} halving ratio {ratio:.2f}")
    verdict(6, "front speed", ok, "; ".join(notes))


WAVE_CASES = [(kn.uniform(1.0), 0.5), (kn.two_atom(1.0), 0.5), (kn.truncated_gaussian(1.0, 4.0), 0.5)]


@pytest.fixture(scope="module")
def waves():
    out = []
    for k, r in WAVE_CASES:
        p = ds.DispersionProblem(r, k)
        c_star = ds.minimal_speed(p).c
        out.append(wv.construct_wave(p, c_star + 0.1 * (p.v_max - c_star)))
    return out


def test_ac07_wave_construction(verdict, waves):
    notes, ok = [], True
    for w in waves:
        d = w.diagnostics
        decay = w.tail_decay()
        good = (d["upper_violation"] <= 0 and d["lower_violation"] <= 0
                and d["residual_sup"] <= 5 * w.dz
                and abs(d["rho_left"] - 1) <= 1e-3 and d["rho_right"] <= 1e-3
                and abs(decay - w.lam) <= 0.05 * w.lam)
        ok &= good
        notes.append(f"c={w.c:.4f} residual {d['residual_sup']:.2g} decay {decay:.4f}/{w.lam:.4f}")
    verdict(7, "wave construction", ok, "; ".join(notes))


def test_ac08_lyapunov_decay(verdict, waves):
    notes, ok = [], True
    for w in waves:
        weight = st.compute_weight(w)
        bump = st.bump(w, 0.0, 2.0, 0.05)
        lin = st.lyapunov_monitor(w, weight, bump, 20.0)
        wn = st.compute_weight(w, weight.Lam, gamma=0.75)
        u = -0.25 * w.f * (np.abs(w.z - 1.0) < 3.0)[None, :]
        non = st.lyapunov_monitor(w, wn, u, 20.0, mode="nonlinear", gamma=0.75)
        bad = st.lyapunov_monitor(w, st.compute_weight(w, weight.Lam, corrupt=True), bump, 20.0)
        good = lin.ok and non.ok and not bad.ok
        ok &= good
        notes.append(f"c={w.c:.3f} linear {lin.excess.max():.1e} nonlinear {non.excess.max():.1e} "
                     f"corrupted {bad.excess.max():.1e}")
    verdict(8, "Lyapunov decay", ok, "; ".join(notes))


def test_ac09_eigen_check(verdict, waves):
    worst_eig, worst_res = -math.inf, 0.0
    for w in waves:
        weight = st.compute_weight(w)
        inside = np.nonzero((w.z > -15) & (w.z < 15))[0]
        for i in np.linspace(inside[0], inside[-1], 10).astype(int):
            rep = st.eigen_check(w, weight, i)
            worst_eig = max(worst_eig, rep.max_eigenvalue)
            worst_res = max(worst_res, rep.null_residual)
    verdict(9, "eigen-check", worst_eig <= 1e-6 and worst_res <= 1e-6,
            f"max eigenvalue {worst_eig:.2e}, max |TW|/|W| {worst_res:.2e} over 10 z per wave")


def test_ac10_truncation_sweep(verdict):
    sweep = sp.truncation_sweep(1.0, 1.0, range(2, 13))
    c = dict(sweep.pairs())
    ok = sweep.increasing and c[12.0] > 2 * c[2.0]
    verdict(10, "truncation sweep", ok,
            f"increasing {sweep.increasing}; c*_2 = {c[2.0]:.6f}, c*_12 = {c[12.0]:.6f}")


def test_ac11_accelerating_front(verdict):
    runs = [sp.accelerating_run(1.0, 1.0, A, 300.0, nx=8000) for A in range(4, 13)]
    expo, pref, resid = sp.fit_power_law(runs)
    slopes = [run.late_slope() / run.c_star for run in runs]
    worst = max(abs(s - 1.0) for s in slopes)
    ok = 1.3 <= expo <= 1.7 and worst <= 0.05
    verdict(11, "accelerating front", ok,
            f"envelope exponent {expo:.4f} (residual {resid:.2e}); worst late slope off c*_A by {100 * worst:.2f}%")


def test_ac12_envelope_dominance(verdict):
    env = sp.envelope("gaussian", 1.0, 1.0, 1.0, 1.0)
    rep = sp.envelope_check(env, 6.0, 3.0)
    g = sp.convolution_identity_check("gaussian", 1.0, 0.0, 1.0, 0.0, 1.0)
    c = sp.convolution_identity_check("cauchy", 1.0, 0.0, 1.0, 0.0, 1.0)
    ok = rep.worst <= 1e-3 and g.error <= 1e-8 and c.error <= 1e-6 and g.bound_holds and c.bound_holds
    verdict(12, "envelope dominance", ok,
            f"max violation {rep.worst:.2e}; convolution errors {g.error:.1e} (Gaussian), {c.error:.1e} (Cauchy)")


def test_ac13_comparison_principle(verdict):
    worst = math.inf
    for k in (kn.uniform(1.0), kn.two_atom(1.0), kn.truncated_gaussian(1.0, 4.0), bimodal()):
        grid = sm.Grid(-20.0, 60.0, 800, 32)
        upper = sm.init_state(k, 0.5, grid, {"kind": "step", "x0": 1.0})
        lower = sm.init_state(k, 0.5, grid, {"kind": "step", "x0": -1.0})
        lower.g *= 0.7
        rep = sm.compare_runs(lower, upper, 30.0)
        worst = min(worst, rep.min_gap)
    verdict(13, "comparison principle", worst >= -1e-12, f"min(upper - lower) = {worst:.2e} (tol -1e-12)")
