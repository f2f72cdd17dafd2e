import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from blowuplab.errors import FitError, ParameterError, RegionError
from blowuplab.grid import ModelParams, build_grid
from blowuplab.modulation import (FitConfig, assemble_jacobian, change_vars, change_vars_inverse, coupling_J,
                                  coupling_from_zetas, fit, fit_from_json, jac_zeta_eta, projections_of,
                                  residual_of, vanishing_check)
from blowuplab.solitons import SolitonParam, eigen_F, sum_of

MP = ModelParams(3.0)
GRID = build_grid(MP, 128)


def star_mu(zeta_star, mu, p=3.0):
    """Parameter with centre zeta* and nu/(1-|d|) = mu."""
    ds = -np.tanh(zeta_star)
    nu = mu * (1 - abs(ds)) / (1 + mu * abs(ds))
    return SolitonParam(ds * (1 + nu), nu, p)


def perturbed(sp, eps, rng):
    z, eta = change_vars(sp.d, sp.nu)
    return SolitonParam.from_zeta_eta(z + eps * rng.choice([-1, 1]), eta + eps * rng.choice([-1, 1]), sp.p)


def max_param_error(fitted, true):
    return max(max(abs(a.zeta_star - b.zeta_star), abs(a.eta - b.eta)) for a, b in zip(fitted, true))


def test_change_vars_examples():
    assert change_vars(0.0, 0.0) == (0.0, 0.0)
    d, nu = change_vars_inverse(1.0, 2.0)
    np.testing.assert_allclose([d, nu], [-np.tanh(1.0), 2 * (1 - np.tanh(1.0) ** 2)], rtol=1e-15)


@settings(max_examples=60, deadline=None)
@given(d=st.floats(-0.99, 0.99), nu=st.floats(-0.5, 3.0))
def test_change_vars_roundtrip(d, nu):
    np.testing.assert_allclose(change_vars_inverse(*change_vars(d, nu)), [d, nu], rtol=1e-12, atol=1e-12)


@pytest.mark.parametrize("d,nu", [(0.0, 0.0), (0.5, 0.3), (-0.9, -0.05), (0.95, 2.0)])
def test_jacobian_of_change_of_variables(d, nu):
    J = jac_zeta_eta(d, nu)
    np.testing.assert_allclose(np.linalg.det(J), -(1 - d * d) ** 2, rtol=1e-12)
    z, eta = change_vars(d, nu)
    h = 1e-6
    fd = np.column_stack([(np.array(change_vars_inverse(z + h, eta)) - change_vars_inverse(z - h, eta)) / (2 * h),
                          (np.array(change_vars_inverse(z, eta + h)) - change_vars_inverse(z, eta - h)) / (2 * h)])
    np.testing.assert_allclose(J, fd, rtol=1e-5, atol=1e-9)


def test_coupling_examples():
    assert coupling_from_zetas([0.3], 3.0) == 0.0
    np.testing.assert_allclose(coupling_from_zetas([0.0, 2 * 2 * np.log(10)], 3.0), 1e-2, rtol=1e-13)
    g = 1.7
    np.testing.assert_allclose(coupling_from_zetas([0.0, g, 2 * g], 3.0), 2 * np.exp(-g / 2), rtol=1e-13)


@settings(max_examples=40, deadline=None)
@given(z=st.lists(st.floats(-5, 5), min_size=2, max_size=5, unique=True), k=st.integers(0, 3),
       extra=st.floats(0.01, 2))
def test_coupling_decreases_with_gaps(z, k, extra):
    z = np.sort(z)
    k = min(k, z.size - 2)
    wider = z.copy()
    wider[k + 1:] += extra
    assert coupling_from_zetas(wider, 3.0) < coupling_from_zetas(z, 3.0)


def test_vanishing():
    assert not vanishing_check(SolitonParam(0.4, 0.0, 3.0), 0.1)
    sp = SolitonParam(0.0, 9.0, 3.0)
    np.testing.assert_allclose(sp.lam, 0.1, rtol=1e-14)
    assert vanishing_check(sp, 2 * np.log(10) - 1e-9)
    assert not vanishing_check(sp, 2 * np.log(10) + 1e-6)
    flags = [vanishing_check(SolitonParam(0.3, nu, 3.0), 3.0) for nu in np.linspace(0, 40, 81)]
    assert flags == sorted(flags)


def test_jacobian_zero_entry_single_soliton():
    sp = SolitonParam(0.3, 0.0, 3.0)
    M = assemble_jacobian(MP, GRID, [sp], residual_of(MP, GRID, sum_of(MP, [sp]).evaluate(MP, GRID), [sp], -1))
    # rows (pi_1, pi_0), columns (zeta, eta): pi_0 of the eta derivative vanishes
    assert abs(M[1, 1]) < 1e-6 * np.max(np.abs(M))


def test_jacobian_matches_finite_differences():
    true = [SolitonParam(0.3, 0.1, 3.0), SolitonParam(-0.6, 0.05, 3.0)]
    true = sorted(true, key=lambda s: s.zeta_star)
    v = sum_of(MP, true, -1).evaluate(MP, GRID) + 0.01 * eigen_F(MP, 0.2, 1, GRID)
    base = [perturbed(sp, 0.02, np.random.default_rng(3)) for sp in true]
    theta = np.concatenate([change_vars(sp.d, sp.nu) for sp in base])

    def F(th):
        sps = [SolitonParam.from_zeta_eta(th[0], th[1], 3.0), SolitonParam.from_zeta_eta(th[2], th[3], 3.0)]
        return projections_of(MP, GRID, residual_of(MP, GRID, v, sps, -1), sps)

    M = assemble_jacobian(MP, GRID, base, residual_of(MP, GRID, v, base, -1), -1)
    h = 1e-6
    fd = np.column_stack([(F(theta + h * e) - F(theta - h * e)) / (2 * h) for e in np.eye(4)])
    np.testing.assert_allclose(M, fd, rtol=1e-5, atol=1e-5 * np.max(np.abs(fd)))


def test_cross_blocks_follow_coupling():
    ratios = []
    for gap in (6.0, 8.0, 10.0):
        sps = [star_mu(-gap / 2, 0.0), star_mu(gap / 2, 0.0)]
        q = residual_of(MP, GRID, sum_of(MP, sps).evaluate(MP, GRID), sps, -1)
        M = assemble_jacobian(MP, GRID, sps, q, -1)
        J = coupling_from_zetas([sp.zeta_star for sp in sps], 3.0)
        ds = sps[0].d_star
        ratios.append(np.max(np.abs(M[:2, 2:])) / (J / (1 - ds * ds)))
    assert max(ratios) < 50


def test_exact_fixed_point():
    sp = SolitonParam(0.25, 0.15, 3.0)
    v = -1 * sum_of(MP, [sp], 1).evaluate(MP, GRID)
    f = fit(MP, GRID, v, 1, [sp], FitConfig(newton_tol=1e-10), theta1=-1)
    assert f.iterations == 0 and f.converged
    assert f.residual_norm < 1e-13
    assert coupling_J(f) == 0.0


def test_two_soliton_example_recovered():
    rng = np.random.default_rng(0)
    true = sorted([SolitonParam(0.3, 0.1, 3.0), SolitonParam(-0.6, 0.05, 3.0)], key=lambda s: s.zeta_star)
    v = sum_of(MP, true, -1).evaluate(MP, GRID)
    f = fit(MP, GRID, v, 2, [perturbed(sp, 1e-3, rng) for sp in true], FitConfig(newton_tol=1e-12), -1)
    assert max_param_error(f.params, true) < 1e-9
    assert np.all(np.abs(f.projections) <= 1e-12)


@settings(max_examples=15, deadline=None)
@given(center=st.floats(-1.5, 1.5), gap=st.floats(8.0, 9.0), mu1=st.floats(-0.5, 2.0),
       mu2=st.floats(-0.5, 2.0), seed=st.integers(0, 2 ** 16))
def test_well_separated_sums_recovered(center, gap, mu1, mu2, seed):
    true = [star_mu(center - gap / 2, mu1), star_mu(center + gap / 2, mu2)]
    v = sum_of(MP, true, 1).evaluate(MP, GRID)
    rng = np.random.default_rng(seed)
    f = fit(MP, GRID, v, 2, [perturbed(sp, 1e-3, rng) for sp in true], FitConfig(newton_tol=1e-12), 1)
    assert max_param_error(f.params, true) < 1e-9


def test_quadratic_convergence():
    rng = np.random.default_rng(5)
    true = [star_mu(-4.0, 0.5), star_mu(4.0, -0.3)]
    v = sum_of(MP, true, -1).evaluate(MP, GRID)
    f = fit(MP, GRID, v, 2, [perturbed(sp, 1e-2, rng) for sp in true], FitConfig(newton_tol=1e-14), -1)
    e = np.array(f.history)
    e = e[e > 1e-13]
    assert e.size >= 3
    C = e[1:] / e[:-1] ** 2
    assert np.all(C[-2:] < 1e3)


def test_displacement_linear_in_perturbation():
    sp = SolitonParam(0.3, 0.2, 3.0)
    factors = []
    for eps in (1e-3, 1e-4):
        v = sum_of(MP, [sp], -1).evaluate(MP, GRID) + eps * eigen_F(MP, sp.d_star, 0, GRID)
        f = fit(MP, GRID, v, 1, [sp], FitConfig(newton_tol=1e-13), -1)
        q = f.params[0]
        factors.append((abs(q.zeta_star - sp.zeta_star) + abs(q.eta - sp.eta)) / eps)
        assert f.residual_norm <= 10 * eps
    np.testing.assert_allclose(factors[0], factors[1], rtol=1e-2)


def test_reflection_gauge():
    true = sorted([SolitonParam(0.3, 0.1, 3.0), SolitonParam(-0.6, 0.05, 3.0)], key=lambda s: s.zeta_star)
    v = sum_of(MP, true, -1).evaluate(MP, GRID)
    init = [SolitonParam(-sp.d, sp.nu, 3.0) for sp in true]
    f = fit(MP, GRID, v.reflect(), 2, init, FitConfig(newton_tol=1e-12), theta1=1)
    mirrored = sorted([SolitonParam(-sp.d, sp.nu, 3.0) for sp in true], key=lambda s: s.zeta_star)
    assert max_param_error(f.params, mirrored) < 1e-9


def test_fit_errors():
    sp = SolitonParam(0.3, 0.2, 3.0)
    v = sum_of(MP, [sp], -1).evaluate(MP, GRID)
    with pytest.raises(ParameterError):
        fit(MP, GRID, v, 2, [sp])
    with pytest.raises(FitError) as exc:
        fit(MP, GRID, v, 1, [SolitonParam(0.0, 0.0, 3.0)], FitConfig(max_iter=1, newton_tol=1e-14))
    assert exc.value.best is not None
    close = [star_mu(0.0, 0.0), star_mu(0.1, 0.0)]
    with pytest.raises(RegionError):
        fit(MP, GRID, v, 2, close, FitConfig(E_gap_min=0.5))
    with pytest.raises(ParameterError):
        FitConfig(newton_tol=0.0)


def test_fit_json_roundtrip():
    sp = SolitonParam(0.25, 0.15, 3.0)
    f = fit(MP, GRID, sum_of(MP, [sp], -1).evaluate(MP, GRID), 1, [sp])
    data = json.loads(f.to_json())
    assert {"m", "params", "residual_norm", "projections", "J_m", "iterations", "converged"} <= set(data)
    assert set(data["params"][0]) == {"d", "nu", "d_star", "zeta_star", "eta", "lambda"}
    back = fit_from_json(f.to_json(), 3.0)
    assert back[0].d == sp.d and back[0].nu == sp.nu
