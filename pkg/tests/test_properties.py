import math

import numpy as np
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from kinwave import cli
from kinwave import dispersion as ds
from kinwave import kernels as kn
from kinwave import simulator as sm
from kinwave import spreading as sp

SLOW = settings(max_examples=25, deadline=None, suppress_health_check=[HealthCheck.too_slow])

rates = st.floats(0.05, 4.0)
scales = st.floats(0.2, 5.0)
kernels = st.sampled_from(["uniform", "two_atom", "truncated_gaussian"])


def make(name, scale=1.0):
    if name == "uniform":
        return kn.uniform(scale, n_nodes=32)
    if name == "two_atom":
        return kn.two_atom(scale)
    return kn.truncated_gaussian(scale, 4.0 * scale, n_nodes=32)


def speed(r, kernel):
    return ds.minimal_speed(ds.DispersionProblem(r, kernel)).c


keys = st.text("abcdefghij_", min_size=1, max_size=8)
values = st.one_of(st.integers(-10**6, 10**6), st.floats(allow_nan=False, allow_infinity=False),
                   st.text("abcxyz ._-", min_size=1, max_size=12).map(str.strip).filter(
                       lambda s: s and cli._coerce(s) == s))


@settings(max_examples=100, deadline=None)
@given(st.dictionaries(keys, values, max_size=5), st.dictionaries(keys, values, max_size=5))
def test_manifest_round_trip(params, grid):
    m = cli.ExperimentManifest("simulate", {"name": "uniform", "v_max": 1.0}, params, grid, "o")
    back = cli.ExperimentManifest.parse(m.serialize())
    assert back == m
    assert back.serialize() == m.serialize()


@SLOW
@given(kernels, rates, scales)
def test_speed_scales_with_velocity(name, r, s):
    base = speed(r, make(name))
    assert math.isclose(speed(r, make(name).scaled(s)), s * base, rel_tol=1e-8)


@SLOW
@given(kernels, rates, st.floats(1.05, 3.0))
def test_speed_increases_with_rate(name, r, factor):
    k = make(name)
    r2 = r * factor
    if name == "two_atom" and r2 >= 1.0:
        return  # sound-speed regime: c* sits at v_max
    assert speed(r2, k) > speed(r, k)


@SLOW
@given(kernels, rates, st.floats(0.05, 0.95))
def test_dispersion_integral_convex_in_decay(name, r, frac):
    k = make(name)
    p = ds.DispersionProblem(r, k)
    c = frac * p.v_max
    lam_hi = 1.0 / (p.v_max - c)
    lam = np.linspace(0.0, 0.98 * lam_hi, 60)
    I = np.asarray(ds.eval_I(p, lam, c))
    second = I[2:] - 2 * I[1:-1] + I[:-2]
    assert np.all(second >= -1e-9 * np.abs(I[1:-1]))


@SLOW
@given(kernels, rates, arrays(float, (8, 40), elements=st.floats(0.0, 1.0)))
def test_scheme_keeps_zero_and_maxwellian_bounds(name, r, frac):
    k = make(name)
    grid = sm.Grid(-5.0, 5.0, 40, 8)
    v, q, M = k.discrete(8)
    g = frac[: v.size] * M[:, None]
    state = sm.init_state(k, r, grid, {"kind": "array", "g": g})
    for _ in range(20):
        sm.step(state)
    assert np.all(state.g >= 0.0)
    assert np.all(state.g <= M[:, None] * (1 + 1e-12))


@SLOW
@given(kernels, rates, arrays(float, 40, elements=st.floats(0.0, 1.0)))
def test_comparison_preserves_order(name, r, gap):
    k = make(name)
    grid = sm.Grid(-5.0, 5.0, 40, 8)
    v, q, M = k.discrete(8)
    hi = np.broadcast_to(M[:, None] * 0.9, (v.size, 40)).copy()
    lo = hi * gap[None, :]
    upper = sm.init_state(k, r, grid, {"kind": "array", "g": hi})
    lower = sm.init_state(k, r, grid, {"kind": "array", "g": lo})
    assert sm.compare_runs(lower, upper, 3.0).ordered


@settings(max_examples=100, deadline=None)
@given(st.floats(0.5, 3.0), st.floats(0.1, 10.0))
def test_fit_recovers_exact_power_laws(expo, pref):
    t = np.linspace(0.0, 40.0, 201)
    e, p, resid = sp.fit_power_law([(t, pref * t**expo)])
    assert math.isclose(e, expo, rel_tol=1e-9)
    assert math.isclose(p, pref, rel_tol=1e-8)
