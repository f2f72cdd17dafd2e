import json
from types import SimpleNamespace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import exp1, expn, gamma as gamma_fn, gammaincc

from blowuplab.analysis import (CHARACTERISTIC, REGULAR, UNDECIDED, DecompositionTrace, LawFit, blowup_speed,
                                classify_point, corner_law, count_solitons, energy_plateau, gap_law,
                                initial_guess, local_slope, slope_vs_profile, trusted_tau_min, zeta_law,
                                zeta_slope_targets)
from blowuplab.functionals import energy_kappa0
from blowuplab.grid import FieldPair, ModelParams, build_grid
from blowuplab.modulation import ModulationFit
from blowuplab.solitons import SolitonParam, kappa
from blowuplab.wave_solver import BlowupCurve, SimilarityTrace

P3 = ModelParams(3.0)
E0 = energy_kappa0(P3)


def fake_fit(zetas, residual_norm=1e-10, p=3.0):
    sps = [SolitonParam(float(-np.tanh(z)), 0.0, p) for z in zetas]
    return ModulationFit(params=sps, theta1=1, residual=FieldPair.zeros(1), residual_norm=residual_norm,
                         projections=np.zeros(2 * len(sps)), J_m=0.0, iterations=0, converged=True)


def law_dec(s, slopes, offsets, residuals=None):
    z = np.outer(np.log(s), slopes) + offsets
    res = residuals if residuals is not None else np.full(s.size, 1e-10)
    return DecompositionTrace(s_values=s, fits=[fake_fit(row, r) for row, r in zip(z, res)],
                              energies=np.full(s.size, 2 * E0), k=len(slopes), theta1=1)


def two_soliton_trace(s, a=0.5, b=1.2, n=96):
    """theta1 (kappa(d1) - kappa(d2)) with zeta_i(s) = -+(a log s + b)."""
    grid = build_grid(P3, n)
    states = []
    for si in s:
        z = a * np.log(si) + b
        states.append(FieldPair(kappa(P3, np.tanh(z), grid) - kappa(P3, -np.tanh(z), grid), np.zeros(n)))
    return SimilarityTrace(x0=0.0, T_x0=1.0, s_values=np.asarray(s, float), states=states,
                           y_max=np.ones(len(s)), grid=grid)


class FixedEnergyTrace(SimilarityTrace):
    def __init__(self, E, grid):
        E = np.asarray(E, float)
        super().__init__(x0=0.0, T_x0=1.0, s_values=np.arange(1.0, E.size + 1), y_max=np.ones(E.size),
                         states=[FieldPair.zeros(grid.n) for _ in E], grid=grid)
        self._E = E

    def energies(self):
        return self._E


# ----------------------------------------------------------------------------
# soliton-centre laws


def test_zeta_targets():
    np.testing.assert_allclose(zeta_slope_targets(3.0, 2), [-0.5, 0.5])
    np.testing.assert_allclose(zeta_slope_targets(5.0, 3), [-2.0, 0.0, 2.0])


@settings(max_examples=30, deadline=None)
@given(a=st.floats(0.2, 1.5), b=st.floats(-1, 1), k=st.integers(2, 4))
def test_zeta_law_recovers_synthetic_slopes(a, b, k):
    s = np.geomspace(2, 20, 25)
    slopes = a * (np.arange(1, k + 1) - (k + 1) / 2)
    dec = law_dec(s, slopes, b + np.arange(k) - (k - 1) / 2)
    lf = zeta_law(dec, 3.0, tol=0.02, targets=slopes)
    assert lf.passed
    fitted = [lf.constants[f"a_{i + 1}"] for i in range(k)]
    np.testing.assert_allclose(fitted, slopes, atol=1e-6)


def test_zeta_law_wrong_slopes_fail_and_short_range_undecided():
    s = np.geomspace(2, 40, 25)
    assert zeta_law(law_dec(s, [-1.0, 1.0], [0.0, 1.0]), 3.0).verdict == "fail"
    short = np.linspace(5, 10, 20)
    assert zeta_law(law_dec(short, [-0.5, 0.5], [0.0, 1.0]), 3.0).verdict == UNDECIDED
    assert zeta_law(law_dec(s, [0.0], [0.0]), 3.0).verdict == UNDECIDED


@settings(max_examples=30, deadline=None)
@given(g=st.floats(0.3, 4.0), noise=st.floats(0, 1e-3), seed=st.integers(0, 1000))
def test_gap_law_synthetic(g, noise, seed):
    s = np.geomspace(2, 40, 30)
    rng = np.random.default_rng(seed)
    dec = law_dec(s, [-g / 2, g / 2], [0.0, 1.0])
    for f in dec.fits:
        f.params[1] = SolitonParam(float(np.tanh(-(f.params[1].zeta + noise * rng.normal()))), 0.0, 3.0)
    lf = gap_law(dec, g, tol=0.02)
    assert lf.passed
    assert lf.constants["increase_1"] > 0


def test_gap_law_decreasing_gap_fails():
    s = np.geomspace(2, 40, 30)
    lf = gap_law(law_dec(s, [0.5, -0.5], [0.0, 10.0]), -1.0)
    assert lf.verdict == "fail"


# ----------------------------------------------------------------------------
# corner law


def corner_curve(gamma, C=0.7, T0=1.0, lo=1e-9, hi=1e-2, n=200):
    """T(x) = T0 - |x| + C int_0^|x| |log r|^-gamma dr: T' + sign is exactly C |log|x||^-gamma."""
    r = np.geomspace(lo, hi, n)
    L = -np.log(r)
    if gamma < 1:
        Gi = gammaincc(1 - gamma, L) * gamma_fn(1 - gamma)
    elif gamma == 1:
        Gi = exp1(L)
    else:
        Gi = L ** (1 - gamma) * expn(int(gamma), L)
    Gr = C * Gi
    x = np.concatenate([-r[::-1], r])
    return BlowupCurve(x=x, T=T0 - np.abs(x) + np.concatenate([Gr[::-1], Gr]), err=np.zeros(x.size))


@pytest.mark.parametrize("k,p", [(2, 3.0), (3, 3.0), (2, 2.0), (2, 5.0)])
def test_corner_law_recovers_exponent(k, p):
    gamma = (k - 1) * (p - 1) / 2
    lf = corner_law(corner_curve(gamma), 0.0, k, p, T0=1.0, tol=0.02)
    assert lf.passed
    np.testing.assert_allclose(lf.constants["exponent"], gamma, rtol=0.02)
    assert np.isfinite(lf.constants["C_upper"]) and np.isfinite(lf.constants["C_lower"])


def test_corner_law_regular_and_degenerate_cases():
    x = np.linspace(-0.1, 0.1, 41)
    straight = BlowupCurve(x=x, T=1 + 0.3 * x, err=np.zeros(x.size))
    lf = corner_law(straight, 0.0, 1, 3.0, T0=1.0)
    assert lf.verdict == UNDECIDED and lf.constants["slope_mean"] == pytest.approx(0.3)
    assert corner_law(corner_curve(1.0), 0.0, 2, 3.0).verdict == UNDECIDED
    noisy = corner_curve(1.0)
    noisy.err[:] = 1.0
    assert "noise" in corner_law(noisy, 0.0, 2, 3.0, T0=1.0).reason
    narrow = corner_law(corner_curve(1.0, lo=1e-3, hi=1e-2), 0.0, 2, 3.0, T0=1.0)
    assert narrow.verdict == UNDECIDED


def test_local_slope():
    x = np.linspace(-0.5, 0.5, 21)
    slope, se = local_slope(BlowupCurve(x=x, T=1 + 0.3 * x, err=np.zeros(21)))
    assert slope == pytest.approx(0.3) and se < 1e-12


# ----------------------------------------------------------------------------
# blow-up speed


def synthetic_run(k, p=3.0, taus=np.geomspace(1e-5, 0.5, 60)):
    a = 2 / (p - 1)
    x = np.linspace(-1, 1, 201)
    snaps = []
    for tau in taus:
        amp = ModelParams(p).kappa0 * tau ** -a * np.abs(np.log(tau)) ** ((k - 1) / 2)
        u = amp * np.exp(-(x / 2) ** 2)
        snaps.append(SimpleNamespace(t=1.0 - tau, x=x, u=u, mask=np.zeros(x.size, bool), valid=(-1.0, 1.0)))
    return SimpleNamespace(snapshots=snaps)


@pytest.mark.parametrize("k", [1, 2, 3])
def test_blowup_speed_band(k):
    lf = blowup_speed(synthetic_run(k), 0.0, 1.0, k, 3.0)
    assert lf.passed
    assert lf.residuals["band_ratio"] < 1.01
    np.testing.assert_allclose(lf.constants["log_exponent"], (k - 1) / 2, atol=1e-2)


def test_blowup_speed_wrong_k_and_short_range():
    assert blowup_speed(synthetic_run(1), 0.0, 1.0, 3, 3.0, band=1.5).verdict == "fail"
    short = synthetic_run(2, taus=np.geomspace(0.1, 0.5, 10))
    assert blowup_speed(short, 0.0, 1.0, 2, 3.0).verdict == UNDECIDED
    assert trusted_tau_min(14.0) == pytest.approx(np.exp(-11.5))


# ----------------------------------------------------------------------------
# classification and counting


@settings(max_examples=40, deadline=None)
@given(E=st.lists(st.floats(0.5, 4.0), min_size=5, max_size=12))
def test_classifier_never_regular_above_two_solitons(E):
    grid = build_grid(P3, 16)
    E = np.array(E) * E0
    c = classify_point(FixedEnergyTrace(E, grid))
    if E.min() > 2 * E0:
        assert c.label != REGULAR
    if E.min() < 1.95 * E0:
        assert c.label == REGULAR


def test_classifier_short_trace_undecided():
    c = classify_point(FixedEnergyTrace(np.full(3, E0), build_grid(P3, 16)))
    assert c.label == UNDECIDED and "slices" in c.reason


def test_synthetic_two_soliton_state():
    s = np.geomspace(2, 40, 12)
    tr = two_soliton_trace(s)
    k, dec = count_solitons(tr, k_max=3)
    assert k == 2 and dec.theta1 in (-1, 1)
    z = dec.zetas
    np.testing.assert_allclose(z[:, 1], -z[:, 0], atol=1e-8)
    lf = zeta_law(dec, 3.0, tol=0.02)
    assert lf.passed
    np.testing.assert_allclose([lf.constants["a_1"], lf.constants["a_2"]], [-0.5, 0.5], atol=1e-6)
    # energy quantization and alternating signs
    assert abs(energy_plateau(tr) / E0 - k) < 0.5
    assert all(f.soliton_sum.signs == [dec.theta1, -dec.theta1] for f in dec.fits if f is not None)
    c = classify_point(tr)
    assert c.label == CHARACTERISTIC and c.k == 2


def test_single_soliton_counts_one():
    grid = build_grid(P3, 96)
    states = [FieldPair(kappa(P3, 0.3, grid), np.zeros(grid.n)) for _ in range(6)]
    tr = SimilarityTrace(x0=0.0, T_x0=1.0, s_values=np.arange(1.0, 7.0), states=states, y_max=np.ones(6), grid=grid)
    k, dec = count_solitons(tr)
    assert k == 1
    np.testing.assert_allclose(dec.d_values[:, 0], 0.3, atol=1e-9)
    assert classify_point(tr).label == REGULAR
    lf = slope_vs_profile(dec, 0.3)
    assert lf.passed
    assert slope_vs_profile(dec, 0.5).verdict == "fail"


def test_initial_guess_finds_alternating_centres():
    tr = two_soliton_trace([10.0])
    init, theta1 = initial_guess(tr, tr.states[0], 2, 3.0)
    z = sorted(sp.zeta for sp in init)
    assert z[0] < 0 < z[1] and theta1 == 1


def test_slope_vs_profile_residual_decay():
    s = np.linspace(1, 8, 15)
    dec = law_dec(s, [0.0], [np.arctanh(-0.2)], residuals=0.5 * np.exp(-0.8 * s))
    lf = slope_vs_profile(dec, 0.2, residual_floor=1e-6)
    assert lf.passed and lf.constants["residual_log_slope"] == pytest.approx(-0.8)
    grow = law_dec(s, [0.0], [np.arctanh(-0.2)], residuals=0.05 * np.exp(0.3 * s))
    assert slope_vs_profile(grow, 0.2).verdict == "fail"


# ----------------------------------------------------------------------------
# reports


def test_lawfit_outputs(tmp_path):
    s = np.geomspace(2, 40, 25)
    lf = zeta_law(law_dec(s, [-0.5, 0.5], [0.0, 1.0]), 3.0)
    paths = lf.write(tmp_path)
    assert sorted(p.name for p in paths) == ["zeta_law.csv", "zeta_law.json", "zeta_law.svg"]
    data = json.loads((tmp_path / "zeta_law.json").read_text())
    assert {"law", "constants", "residuals", "verdict", "inputs"} <= set(data)
    assert "a_1=-0.5" in (tmp_path / "zeta_law.svg").read_text()
    first = {p.name: p.read_bytes() for p in paths}
    again = lf.write(tmp_path / "again")
    assert {p.name: p.read_bytes() for p in again} == first
    dec = law_dec(s, [-0.5, 0.5], [0.0, 1.0])
    dec.to_csv(tmp_path / "dec.csv")
    assert (tmp_path / "dec.csv").read_text().splitlines()[0] == "s,energy,residual,zeta_1,zeta_2"
    assert isinstance(LawFit("x", {}, {}, "pass").to_json(), str)
