import math

import numpy as np
import pytest

from kinwave import dispersion as ds
from kinwave import kernels as kn


def uniform_problem(r=0.5):
    return ds.DispersionProblem(r, kn.uniform(1.0))


def test_eval_I_examples():
    # two atoms at +-1, r = 1, lam = 1/2, c = 0: 2 * (1/2)(1/(1/2) + 1/(3/2)) = 8/3
    p = ds.DispersionProblem(1.0, kn.two_atom(1.0))
    assert ds.eval_I(p, 0.5, 0.0) == pytest.approx(8.0 / 3.0, rel=1e-15)
    # uniform closed form
    q = uniform_problem(0.5)
    lam, c = 1.2, 0.3
    exact = 1.5 / (2 * lam) * math.log((1 + lam * (c + 1)) / (1 + lam * (c - 1)))
    assert ds.eval_I(q, lam, c) == pytest.approx(exact, rel=1e-13)


def test_eval_I_at_zero_is_one_plus_r():
    for r in (0.25, 2.0):
        assert ds.eval_I(ds.DispersionProblem(r, kn.truncated_gaussian(1.0, 3.0)), 0.0, 0.5) == \
            pytest.approx(1 + r, rel=1e-13)


def test_eval_I_rejects_outside_domain():
    with pytest.raises(ds.DomainError):
        ds.eval_I(uniform_problem(), 3.0, 0.5)  # needs lam < 1/(1 - 0.5)


def test_two_atom_speed_and_sound_speed():
    p = ds.DispersionProblem(0.5, kn.two_atom(1.0))
    root = ds.minimal_speed(p)
    assert root.c == pytest.approx(2 * math.sqrt(0.5) / 1.5, abs=1e-11)
    slow = ds.minimal_speed(ds.DispersionProblem(1.5, kn.two_atom(1.0)))
    assert slow.kind == "sound_speed" and slow.c == 1.0 and math.isinf(slow.lam)


def test_frozen_minimal_speeds():
    # frozen from the independent grid-scan oracle (tests/oracles.py)
    assert ds.minimal_speed(uniform_problem(0.5)).c == pytest.approx(0.6430415055250556, rel=1e-10)
    assert ds.minimal_speed(uniform_problem(1.0)).c == pytest.approx(0.7714509263784343, rel=1e-10)
    tg = ds.DispersionProblem(0.5, kn.truncated_gaussian(1.0, 4.0))
    assert ds.minimal_speed(tg).c == pytest.approx(1.5398197164307195, rel=1e-10)


def test_minimal_speed_is_a_double_root():
    p = uniform_problem(0.5)
    root = ds.minimal_speed(p)
    assert ds.eval_I(p, root.lam, root.c) == pytest.approx(1.0, abs=1e-10)
    h = 1e-4
    dI = (ds.eval_I(p, root.lam + h, root.c) - ds.eval_I(p, root.lam - h, root.c)) / (2 * h)
    assert abs(dI) < 1e-5


def test_lambda_c_and_speed_for_decay_are_inverse():
    p = uniform_problem(0.5)
    c_star = ds.minimal_speed(p).c
    for c in (c_star + 0.01, 0.8, 0.95):
        lam = ds.lambda_c(p, c)
        assert ds.eval_I(p, lam, c) == pytest.approx(1.0, abs=1e-12)
        assert ds.speed_for_decay(p, lam) == pytest.approx(c, abs=1e-10)


def test_lambda_c_below_minimal_speed_has_no_root():
    p = uniform_problem(0.5)
    with pytest.raises(ds.NoRootError):
        ds.lambda_c(p, 0.5)


def test_two_atom_speed_for_decay_closed_form():
    # y^2 - (1 + r) y - lam^2 = 0 with y = 1 + lam c
    for lam, r in ((1.0, 1.0), (0.3, 0.5), (2.0, 0.25)):
        y = 0.5 * ((1 + r) + math.sqrt((1 + r) ** 2 + 4 * lam * lam))
        p = ds.DispersionProblem(r, kn.two_atom(1.0))
        assert ds.speed_for_decay(p, lam) == pytest.approx((y - 1) / lam, rel=1e-12)
    # small decay rates give speeds above v_max
    assert ds.speed_for_decay(ds.DispersionProblem(1.0, kn.two_atom(1.0)), 1.0) == \
        pytest.approx(math.sqrt(2.0), rel=1e-12)


def test_profile_F_integrates_to_one():
    p = uniform_problem(0.5)
    c = 0.8
    lam = ds.lambda_c(p, c)
    vals, F = ds.profile_F(p, lam, c)
    v, q, _ = p.kernel.discrete(512)
    assert float(np.sum(q * F(v))) == pytest.approx(1.0, abs=1e-6)
    nodes, m = p.nodes
    np.testing.assert_allclose(vals, F(nodes), rtol=1e-14)
    assert F(0.2) == pytest.approx(1.5 * 0.5 / (1 + lam * (c - 0.2)))


def test_edge_correction_converges_truncated_gaussian():
    k = kn.truncated_gaussian(1.0, 4.0)
    a = ds.minimal_speed(ds.DispersionProblem(1.0, k, n_nodes=128)).c
    b = ds.minimal_speed(ds.DispersionProblem(1.0, k, n_nodes=512)).c
    assert abs(a - b) < 1e-12


def test_edge_minimum_for_wide_truncation():
    kA, rA = kn.truncate_renormalize(kn.gaussian(1.0), 12.0, 1.0)
    root = ds.minimal_speed(ds.DispersionProblem(rA, kA))
    assert root.edge
    assert root.c == pytest.approx(6.042266571333453, rel=1e-9)


def test_unbounded_kernel_has_no_speed():
    with pytest.raises(ds.DomainError, match="truncate"):
        ds.minimal_speed(ds.DispersionProblem(1.0, kn.gaussian(1.0)))


def test_regularized_limit_matches_plain_speed():
    p = uniform_problem(0.5)
    limit, change = ds.regularized_minimal_speed(p, tol=1e-8)
    assert change < 1e-8
    assert limit == pytest.approx(ds.minimal_speed(p).c, abs=1e-6)


def test_complex_scan_finds_real_root_first():
    p = uniform_problem(0.5)
    c = 0.8
    roots = ds.complex_scan(p, c, n=80)
    assert roots
    best = roots[0]
    assert best.residual < 1e-10
    real = [z for z in roots if abs(z.lam.imag) < 1e-8 and z.residual < 1e-10]
    assert any(abs(z.lam.real - ds.lambda_c(p, c)) < 1e-8 for z in real)


def test_diffusion_limit_ratio():
    p = ds.DispersionProblem(1.0, kn.uniform(1.0))
    D = 1.0 / 3.0
    assert ds.diffusion_limit_speed(p, 0.01) / (2 * math.sqrt(D)) == pytest.approx(0.99994, abs=2e-5)


def test_regularized_limit_for_kernel_vanishing_at_edge():
    v = np.linspace(-1.0, 1.0, 401)
    p = ds.DispersionProblem(0.5, kn.tabulated(v, 1.0 - np.abs(v)))
    limit, change = ds.regularized_minimal_speed(p, tol=1e-7)
    assert change < 1e-7
    assert abs(limit - ds.minimal_speed(p).c) < 1e-6
