import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from blowuplab.errors import ConfigurationError, ParameterError, ScheduleError, TruncationError, WindowError
from blowuplab.functionals import energy_kappa0
from blowuplab.grid import FieldPair, ModelParams
from blowuplab.solitons import SolitonParam, kappa, kappa_star
from blowuplab.wave_solver import (BlowupCurve, SolveConfig, SolverConfig, WaveState, center_map,
                                   discrete_energy, estimate_T, evolve, levine_energy, local_time_to_blowup,
                                   make_preset, ode_solution, ode_time_to_blowup, parse_kv, richardson,
                                   schedule, soliton_profile, to_similarity, transform_center, uniform_state,
                                   window_inequalities, window_y1)
from blowuplab.wave_solver.transform import S_of, gammas, nu_bar

P3 = ModelParams(3.0)


def energy_series(run):
    return np.array([discrete_energy(WaveState(x=s.x, u=s.u, ut=s.ut, t=s.t, dx=s.dx), 3.0)
                     for s in run.snapshots])


# ----------------------------------------------------------------------------
# time stepping


def test_zero_data_stays_zero():
    st0 = uniform_state(-1, 1, 101, np.zeros_like, np.zeros_like)
    run = evolve(st0, 2.0, SolverConfig(p=3.0))
    assert np.all(run.state.u == 0) and np.all(run.state.ut == 0)
    assert not run.state.mask.any()
    np.testing.assert_allclose(run.state.t, 2.0)


def test_ode_blowup_time_frozen():
    # T = int_1^inf du / sqrt((u^4 - 1)/2) = sqrt(2) K(1/sqrt 2)/sqrt 2 ... evaluated once by mpmath
    np.testing.assert_allclose(ode_time_to_blowup(3.0, 1.0, 0.0), 1.8540746773013719, rtol=1e-12)


def test_space_independent_data_follows_ode():
    st0 = uniform_state(0, 1, 11, np.ones_like, np.zeros_like)
    T = float(ode_time_to_blowup(3.0, 1.0, 0.0))
    times = np.linspace(0.1, T, 60)
    u_ex, _, _ = ode_solution(3.0, 1.0, times)
    times, u_ex = times[u_ex < 1e3][:40], u_ex[u_ex < 1e3][:40]
    run = evolve(st0, times[-1], SolverConfig(p=3.0, ode_fraction=6e-5, mask_ratio=1e-6), record_times=times)
    u_num = np.array([sn.u[5] for sn in run.snapshots])
    np.testing.assert_allclose(u_num, u_ex, rtol=1e-6)
    assert all(np.ptp(sn.u) == 0 for sn in run.snapshots)


def test_energy_drift_small_data():
    pr = make_preset("gaussian", P3, A=0.5, sigma=0.5)
    run = evolve(uniform_state(-6, 6, 2401, pr.u0, pr.u1), 3.0, SolverConfig(p=3.0),
                 record_times=np.linspace(0, 3, 13))
    E = energy_series(run)
    t = np.array([s.t for s in run.snapshots])
    assert np.max(np.abs(E[1:] - E[0]) / t[1:]) < 1e-4


def test_energy_error_second_order_before_blowup():
    pr = make_preset("gaussian", P3, A=3.0, sigma=0.5)
    errs = []
    for n in (1201, 2401, 4801):
        run = evolve(uniform_state(-6, 6, n, pr.u0, pr.u1), 0.6, SolverConfig(p=3.0),
                     record_times=np.linspace(0, 0.6, 7))
        E = energy_series(run)
        assert not run.state.mask.any()
        errs.append(np.max(np.abs(E - E[0])))
    rates = np.log2(np.array(errs[:-1]) / errs[1:])
    assert np.all(rates > 1.8)


def test_finite_speed_of_propagation():
    pr = make_preset("gaussian", P3, A=3.0, sigma=0.5)
    bump = lambda x: 0.1 * np.exp(-((x - 4.0) / 0.3) ** 2)
    runs = []
    for extra in (0.0, 1.0):
        st0 = uniform_state(-6, 6, 1201, lambda x: pr.u0(x) + extra * bump(x), pr.u1)
        runs.append(evolve(st0, 1.2, SolverConfig(p=3.0)))
    a, b = runs[0].state, runs[1].state
    assert a.mask.any()
    # the discrete cone widens by the CFL factor
    inside = np.abs(a.x) < 4.0 - 2.0 - 1.2 / 0.9
    np.testing.assert_array_equal(a.u[inside], b.u[inside])
    np.testing.assert_array_equal(a.mask[inside], b.mask[inside])


def test_masked_node_masks_its_forward_cone():
    st0 = uniform_state(-1, 1, 201, np.zeros_like, np.zeros_like)
    st0.mask[100] = True
    st0.t_blow[100] = 0.0
    run = evolve(st0, 0.5, SolverConfig(p=3.0))
    s = run.state
    inside = np.abs(s.x) <= 0.5 - 1e-9
    assert np.all(s.mask[inside]) and not s.mask[np.abs(s.x) > 0.5 + s.dx].any()
    cone = s.mask & (s.kind == 2)
    np.testing.assert_allclose(s.t_blow[cone], np.abs(s.x[cone]), atol=1e-12)
    assert np.all(s.t_blow[cone] <= s.t)


def test_local_time_exact_for_solitons():
    for d in (-0.6, 0.0, 0.3, 0.9):
        sol = make_preset("exact-soliton", P3, d=d, T=1.0).exact
        x = np.linspace(-0.5, 0.5, 11)
        u, ut = sol(x, 0.4)
        np.testing.assert_allclose(local_time_to_blowup(P3, u, ut), 1.0 + d * x - 0.4, rtol=1e-12)


def test_exact_soliton_second_order():
    pr = make_preset("exact-soliton", P3, d=0.3, T=1.0)
    errs = []
    for n in (201, 401, 801):
        cfg = SolverConfig(p=3.0, boundary="exact", boundary_fn=pr.exact)
        run = evolve(uniform_state(-1, 1, n, pr.u0, pr.u1), 0.6, cfg)
        live = ~run.state.mask
        errs.append(np.max(np.abs(run.state.u - pr.exact(run.state.x, 0.6)[0])[live]))
    rates = np.log2(np.array(errs[:-1]) / errs[1:])
    assert np.all(np.abs(rates - 2) < 0.2)


def test_solver_config_errors():
    with pytest.raises(ConfigurationError):
        SolverConfig(cfl=1.5)
    with pytest.raises(ConfigurationError):
        SolverConfig(boundary="exact")
    with pytest.raises(ParameterError):
        SolverConfig(p=0.5)
    st0 = uniform_state(-1, 1, 11, np.zeros_like, np.zeros_like)
    st0.dt = 0.5
    with pytest.raises(ConfigurationError):
        evolve(st0, 1.0, SolverConfig())


# ----------------------------------------------------------------------------
# blow-up curves


def test_levine_data_blows_up_everywhere():
    pr = make_preset("gaussian", P3, A=5.0, sigma=0.5)
    x = np.linspace(-4, 4, 4001)
    assert levine_energy(P3, x, pr.u0(x), pr.u1(x)) < 0
    curve = estimate_T(SolveConfig(preset="gaussian", A=5.0, sigma=0.5, x_min=-4, x_max=4, nx=321, levels=3))
    m = np.abs(curve.x) <= 2
    assert np.all(np.isfinite(curve.T[m]))
    assert curve.is_lipschitz()


def test_exact_soliton_curve():
    curve = estimate_T(SolveConfig(preset="exact-soliton", d=0.3, nx=101, levels=3))
    ok = np.isfinite(curve.T) & (np.abs(curve.x) <= 0.5)
    assert ok.sum() > 20
    dev = np.abs(curve.T[ok] - (1 + 0.3 * curve.x[ok]))
    assert np.all(dev <= 2 * curve.err[ok] + 1e-12)
    assert curve.is_lipschitz()


@pytest.mark.parametrize("q", [1.0, 2.0, 3.0])
def test_richardson_recovers_limit(q):
    h = np.array([0.1, 0.05, 0.025])
    vals = [2.5 + 0.7 * hh ** q for hh in h]
    ext, err, order = richardson(vals)
    np.testing.assert_allclose(order, q, rtol=1e-10)
    np.testing.assert_allclose(ext, 2.5, atol=1e-12)
    ext2, err2, _ = richardson(vals[1:], order=q)
    np.testing.assert_allclose(ext2, 2.5, atol=1e-12)
    with pytest.raises(ConfigurationError):
        richardson(vals[:1])


def test_curve_csv_roundtrip(tmp_path):
    x = np.linspace(-1, 1, 21)
    c = BlowupCurve(x=x, T=1 - np.abs(x) + 0.1 * x ** 2, err=np.full(21, 1e-4))
    c.to_csv(tmp_path / "c.csv")
    assert (tmp_path / "c.csv").read_text().splitlines()[0] == "x,T,err,slope_left,slope_right"
    back = BlowupCurve.from_csv(tmp_path / "c.csv")
    np.testing.assert_array_equal(back.T, c.T)
    np.testing.assert_array_equal(back.x, c.x)
    assert c.x0_candidates() == [0.0]


@settings(max_examples=40, deadline=None)
@given(slopes=st.lists(st.floats(-1.5, 1.5), min_size=3, max_size=30))
def test_lipschitz_flag(slopes):
    x = np.arange(len(slopes) + 1) * 0.1
    T = np.concatenate([[1.0], 1.0 + np.cumsum(np.array(slopes) * 0.1)])
    c = BlowupCurve(x=x, T=T, err=np.zeros(x.size))
    assert c.is_lipschitz() == bool(np.all(np.abs(slopes) <= 1 + 1e-9))


# ----------------------------------------------------------------------------
# configuration


def test_parse_kv():
    text = "# run\np = 3\n\npreset = odd   # antisymmetric\nzoom-s-max=12\n"
    assert parse_kv(text) == {"p": "3", "preset": "odd", "zoom_s_max": "12"}
    with pytest.raises(ConfigurationError):
        parse_kv("p 3")


def test_solve_config_roundtrip_and_errors():
    cfg = SolveConfig.from_text("p = 5\nnx = 201\nsigma = 0.25\n")
    assert cfg.p == 5.0 and cfg.nx == 201 and cfg.sigma == 0.25
    back = SolveConfig.from_text(cfg.to_text())
    assert back == cfg and back.digest() == cfg.digest()
    with pytest.raises(ConfigurationError):
        SolveConfig.from_text("colour = red\n")
    with pytest.raises(ConfigurationError):
        SolveConfig.from_text("p = 1\n")
    with pytest.raises(ConfigurationError):
        make_preset("square", P3)


# ----------------------------------------------------------------------------
# similarity variables


def test_ode_trace_converges_to_constant_profile():
    T = float(ode_time_to_blowup(3.0, 1.0, 0.0))
    ss = [1.0, 2.0, 3.0, 4.0]
    run = evolve(uniform_state(-3, 3, 301, np.ones_like, np.zeros_like), T,
                 SolverConfig(p=3.0, ode_fraction=1e-3, mask_ratio=1e-4), record_times=[T - np.exp(-s) for s in ss])
    tr = to_similarity(run, 0.0, T, ss, n=64)
    dev = [np.max(np.abs(w.q1 - P3.kappa0)) for w in tr.states]
    dsw = [np.max(np.abs(w.q2)) for w in tr.states]
    assert dev[-1] < dev[0] / 10 and dsw[-1] < dsw[0] / 10
    assert dev[-1] < 1e-4


def test_truncated_trace_is_flagged():
    T = float(ode_time_to_blowup(3.0, 1.0, 0.0))
    run = evolve(uniform_state(-1, 1, 201, np.ones_like, np.zeros_like), T,
                 SolverConfig(p=3.0, ode_fraction=1e-3, mask_ratio=1e-4), record_times=[T - np.exp(-3.0)])
    with pytest.raises(TruncationError):
        to_similarity(run, 0.0, T, [3.0], n=64)


def test_exact_soliton_trace():
    pr = make_preset("exact-soliton", P3, d=0.3, T=1.0)
    ref = lambda y: FieldPair(kappa(P3, 0.3, y), 0 * y)
    ss = [0.5, 1.0, 1.5]
    dist = []
    for n in (201, 401):
        cfg = SolverConfig(p=3.0, boundary="exact", boundary_fn=pr.exact)
        run = evolve(uniform_state(-1, 1, n, pr.u0, pr.u1), 0.9, cfg, record_times=[1 - np.exp(-s) for s in ss])
        tr = to_similarity(run, 0.0, 1.0, ss)
        dist.append([tr.restricted_distance(i, ref) for i in range(len(ss))])
        E = tr.energies()
        assert np.all(np.diff(E) <= 1e-3 * np.diff(tr.s_values))
        np.testing.assert_allclose(E, energy_kappa0(P3), atol=1e-3)
    rates = np.log2(np.array(dist[0]) / np.array(dist[1]))
    assert np.all(rates > 1.5)


# ----------------------------------------------------------------------------
# change of centre


def test_center_map_identity_limit():
    y = np.linspace(-0.9, 0.9, 7)
    cm = center_map(P3, -1e-14, 0.0, 1.0, y)
    np.testing.assert_allclose(cm.Y, y, atol=1e-12)
    np.testing.assert_allclose([cm.S, cm.Lam], [1.0, 1.0], atol=1e-12)


@settings(max_examples=40, deadline=None)
@given(d=st.floats(-0.8, 0.8), b=st.floats(0.05, 0.6), lx=st.floats(-8, -3), s=st.floats(0.5, 4.0))
def test_transform_of_soliton(d, b, lx, s):
    x = -np.exp(lx)
    y = np.linspace(-0.999, 0.999, 61)
    w, inside = transform_center(P3, soliton_profile(P3, d), x, b, s, y)
    nu = (b - (1 - d)) * x * np.exp(s)
    k = kappa_star(P3, SolitonParam(d, nu, 3.0), y[inside])
    np.testing.assert_allclose(w.q1[inside], k.q1, rtol=1e-10)
    np.testing.assert_allclose(w.q2[inside], k.q2, rtol=1e-10, atol=1e-10 * np.max(np.abs(k.q1)))


def test_transform_errors():
    with pytest.raises(ParameterError):
        transform_center(P3, soliton_profile(P3, 0.0), 0.1, 0.2, 1.0, np.zeros(3))
    with pytest.raises(WindowError):
        transform_center(P3, soliton_profile(P3, 0.0), -0.5, 0.2, 3.0, np.array([-0.99]))


@settings(max_examples=60, deadline=None)
@given(lx=st.floats(-12, -2), b=st.floats(0.01, 0.9), L=st.floats(0.0, 3.0), frac=st.floats(0.0, 1.0))
def test_window_inequalities_hold(lx, b, L, frac):
    x = -np.exp(lx)
    # |x| e^s <= e^L, and y1(s) < 1 so that the window is not empty
    s = min(np.log(np.exp(L) / abs(x)), np.log(1.9 / (2 * b * abs(x)))) * frac
    y1 = window_y1(x, b, s)
    y = np.linspace(max(y1, -1 + 1e-12), 1 - 1e-12, 201)
    slack = window_inequalities(x, b, s, y, L)
    assert min(slack.values()) >= -1e-12


def test_schedule_examples():
    np.testing.assert_allclose(gammas(P3, 2), [1.0, -1.0])
    x, b = -1e-6, 1e-3
    sch = schedule(P3, x, b, 2, [0.5, 1.0, 2.0])
    assert sch.k_hat == 1 and sch.s[3] == 2.0 and sch.ordered()
    assert schedule(P3, -1e-4, b, 2, [0.5, 1.0, 2.0]).s[3] == 2.0
    for s in (3.0, 8.0):
        d1 = sch.d_bar(1, s)
        np.testing.assert_allclose(sch.nu_bar(1, s), (b - (1 - d1)) * x * np.exp(s), rtol=1e-14)
    np.testing.assert_allclose(S_of(x, b, 5.0), -np.log(abs(x) * (1 - b) + np.exp(-5.0)))
    np.testing.assert_allclose(nu_bar(x, b, 0.5, 1.0), (b - 0.5) * x * np.e)
    with pytest.raises(ParameterError):
        schedule(P3, 0.1, b, 2, [0.5, 1.0, 2.0])
    with pytest.raises(ParameterError):
        schedule(P3, x, b, 2, [0.5, 1.0])
    with pytest.raises(ScheduleError):
        schedule(P3, -0.5, b, 2, [0.0, 0.0, 5.0])
