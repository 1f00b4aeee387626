import math

import numpy as np
import pytest

from kinwave import dispersion as ds
from kinwave import kernels as kn
from kinwave import stability as st
from kinwave import waves as wv


@pytest.fixture(scope="module")
def wave():
    p = ds.DispersionProblem(0.5, kn.two_atom(1.0))
    c_star = ds.minimal_speed(p).c
    return wv.construct_wave(p, c_star + 0.1 * (1.0 - c_star))


def test_Lambda_bounds_and_limits(wave):
    Lam, lam_c = st.compute_Lambda(wave)
    assert np.all(Lam >= 0) and np.all(Lam <= lam_c * (1 + 1e-12))
    # ahead of the front f -> 0 and Lam -> lam_c; behind it Lam -> 0
    assert Lam[-1] == pytest.approx(lam_c, rel=1e-3)
    assert Lam[0] < 1e-2 * lam_c
    # node-sum relation holds where Lam is positive
    i = wave.z.size // 2
    D = (1 + wave.r) * wave.M - wave.r * wave.f[:, i]
    assert np.sum(wave.q * D / (1 + Lam[i] * (wave.c - wave.v))) == pytest.approx(1.0, abs=1e-12)


def test_weight_in_empty_region_is_exponential(wave):
    w = st.compute_weight(wave)
    i = -1
    z = wave.z[i]
    expected = w.log_Gam[i] - np.log((1 + wave.r) * wave.M)
    np.testing.assert_allclose(np.log(w.weight[:, i]), expected, rtol=1e-3)
    slope = (w.log_Gam[-1] - w.log_Gam[-50]) / (wave.z[-1] - wave.z[-50])
    assert slope == pytest.approx(2 * w.Lam[-1], rel=1e-3)
    assert np.interp(0.0, wave.z, w.log_Gam) == pytest.approx(0.0, abs=1e-12)


def test_gamma_must_exceed_half(wave):
    with pytest.raises(st.StabilityError):
        st.compute_weight(wave, gamma=0.4)


def test_energy_decays_for_bump(wave):
    w = st.compute_weight(wave)
    trace = st.lyapunov_monitor(wave, w, st.bump(wave, 0.0, 2.0, 0.05), 10.0)
    assert trace.ok
    assert trace.energy[-1] < trace.energy[0]


def test_nonlinear_requires_comparison_data(wave):
    w = st.compute_weight(wave, gamma=0.75)
    with pytest.raises(st.StabilityError):
        st.lyapunov_monitor(wave, w, -0.5 * wave.f, 1.0, mode="nonlinear", gamma=0.75)


def test_eigen_check_null_vector(wave):
    w = st.compute_weight(wave)
    rep = st.eigen_check(wave, w, wave.z.size // 2)
    assert rep.max_eigenvalue <= 1e-10
    assert rep.null_residual <= 1e-10
