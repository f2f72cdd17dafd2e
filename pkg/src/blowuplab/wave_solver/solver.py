"""Explicit Stormer-Verlet solver for u_tt = u_xx + |u|^(p-1) u on a uniform grid.

Nodes whose local ODE blow-up time (kappa0/|u|)^((p-1)/2) drops below a
fraction of dx (or with |u| above ``u_max``) are masked.  Their blow-up time
is completed with the exact time-to-blow-up of the spatially constant ODE
starting from the node's current (u, u_t).  A masked node masks its forward
light cone: node i is removed at t >= T_j + |x_i - x_j|.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np
from scipy.interpolate import CubicSpline

from ..errors import ConfigurationError, ParameterError
from ..grid import ModelParams

NOT_MASKED, SELF, CONE, INHERITED = 0, 1, 2, 3

# r = 1 - z^2 on z in (0, 1): removes the turning-point singularity at r = 1 when u_t = 0
_GL_Z, _GL_W = np.polynomial.legendre.leggauss(64)
_GL_Z = 0.5 * (_GL_Z + 1.0)
_GL_R = 1.0 - _GL_Z ** 2
_GL_W = _GL_W * _GL_Z


@dataclass
class SolverConfig:
    p: float = 3.0
    cfl: float = 0.9
    u_max: float = 1e8
    mask_ratio: float = 8.0      # mask when the local time to blow-up < mask_ratio * dx
    ode_fraction: float = 0.2    # dt <= ode_fraction * smallest local ODE time
    boundary: str = "outflow"    # or "exact" together with ``boundary_fn``
    boundary_fn: Callable | None = None

    def __post_init__(self):
        if not 0 < self.cfl <= 1:
            raise ConfigurationError(f"cfl must lie in (0, 1], got {self.cfl}")
        if self.boundary not in ("outflow", "exact"):
            raise ConfigurationError(f"unknown boundary mode {self.boundary!r}")
        if self.boundary == "exact" and self.boundary_fn is None:
            raise ConfigurationError("boundary='exact' needs boundary_fn(x, t) -> (u, ut)")
        if self.mask_ratio <= 0 or self.ode_fraction <= 0 or self.u_max <= 0:
            raise ConfigurationError("mask_ratio, ode_fraction and u_max must be positive")
        ModelParams(self.p)


@dataclass
class WaveState:
    x: np.ndarray
    u: np.ndarray
    ut: np.ndarray
    t: float
    dx: float
    dt: float = 0.0
    mask: np.ndarray | None = None
    t_blow: np.ndarray | None = None
    kind: np.ndarray | None = None
    t_start: float = 0.0          # time at which the current grid was created
    edge_lo: float | None = None  # outer edges of the trusted region at t_start
    edge_hi: float | None = None

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        n = self.x.size
        self.u = np.array(self.u, dtype=float)
        self.ut = np.array(self.ut, dtype=float)
        if self.u.shape != (n,) or self.ut.shape != (n,):
            raise ParameterError("x, u and ut must be 1-d arrays of equal length")
        if self.mask is None:
            self.mask = np.zeros(n, dtype=bool)
        if self.t_blow is None:
            self.t_blow = np.full(n, np.nan)
        if self.kind is None:
            self.kind = np.zeros(n, dtype=np.int8)
        if self.edge_lo is None:
            self.edge_lo = float(self.x[0])
        if self.edge_hi is None:
            self.edge_hi = float(self.x[-1])

    @property
    def n(self) -> int:
        return self.x.size

    def valid_interval(self, cfg: SolverConfig) -> tuple[float, float]:
        """Region not reached by information from outflow edges."""
        if cfg.boundary == "exact":
            return self.edge_lo, self.edge_hi
        el = self.t - self.t_start
        return self.edge_lo + el + 2 * self.dx, self.edge_hi - el - 2 * self.dx

    def copy(self) -> "WaveState":
        return replace(self, x=self.x.copy(), u=self.u.copy(), ut=self.ut.copy(),
                       mask=self.mask.copy(), t_blow=self.t_blow.copy(), kind=self.kind.copy())


def uniform_state(x_min: float, x_max: float, n: int, u0, u1, t0: float = 0.0) -> WaveState:
    if n < 3 or not x_max > x_min:
        raise ConfigurationError("need n >= 3 nodes on a non-empty interval")
    x = np.linspace(x_min, x_max, int(n))
    return WaveState(x=x, u=np.asarray(u0(x), float), ut=np.asarray(u1(x), float),
                     t=t0, dx=float(x[1] - x[0]))


# ----------------------------------------------------------------------------
# the spatially constant ODE  u'' = |u|^(p-1) u


def ode_time_to_blowup(p: float, u, v) -> np.ndarray:
    """Time left before u'' = |u|^(p-1) u blows up, from (u, u') with u v >= 0.

    Substituting u(r) = u0 r^(-m), m = 2/(p-1), in the energy relation turns
    the remaining time into int_0^1 |u| m dr / sqrt(2 e r^(m(p+1)) + 2|u|^(p+1)/(p+1)),
    evaluated by Gauss-Legendre after r = 1 - z^2.
    """
    u = np.abs(np.asarray(u, dtype=float))
    v = np.abs(np.asarray(v, dtype=float))
    m = 2.0 / (p - 1.0)
    e = 0.5 * v * v - u ** (p + 1) / (p + 1)
    r = _GL_R.reshape((-1,) + (1,) * u.ndim)
    w = _GL_W.reshape((-1,) + (1,) * u.ndim)
    den = np.sqrt(np.maximum(2 * e * r ** (m * (p + 1)) + 2 * u ** (p + 1) / (p + 1), 0.0))
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.sum(w * u * m / den, axis=0)
    return out


def ode_solution(p: float, c: float, t):
    """u'' = u^p, u(0) = c > 0, u'(0) = 0, returned as (u, u_t, T) with quadrature inversion.

    The blow-up time is T = ode_time_to_blowup(p, c, 0); the solution is
    recovered from t = int_c^u dU / sqrt(2(U^(p+1) - c^(p+1))/(p+1)).
    """
    from scipy.integrate import quad
    from scipy.optimize import brentq

    T = float(ode_time_to_blowup(p, c, 0.0))
    k = 2.0 / (p + 1)

    def elapsed(u):
        # substitution U = c + (u - c) z^2 removes the square-root singularity at c
        if u <= c:
            return 0.0
        # U^(p+1) - c^(p+1) written with expm1/log1p to avoid cancellation near U = c
        f = lambda z: 2 * (u - c) / np.sqrt(k * c ** (p + 1) * np.expm1((p + 1) * np.log1p((u - c) * z * z / c)) / (z * z)) if z > 0 \
            else 2 * (u - c) / np.sqrt(k * c ** p * (p + 1) * (u - c))
        return quad(f, 0, 1, epsabs=1e-15, epsrel=1e-13, limit=200)[0]

    ts = np.atleast_1d(np.asarray(t, dtype=float))
    us = np.empty_like(ts)
    for i, ti in enumerate(ts):
        if ti <= 0:
            us[i] = c
            continue
        if ti >= T:
            us[i] = np.inf
            continue
        # remaining time approximation gives a bracket
        hi = c * 2.0
        while elapsed(hi) < ti:
            hi *= 2.0
        us[i] = brentq(lambda u: elapsed(u) - ti, c, hi, xtol=1e-15 * hi, rtol=1e-15, maxiter=500)
    uts = np.sqrt(k * (us ** (p + 1) - c ** (p + 1)))
    return us, uts, T


# ----------------------------------------------------------------------------
# stepping


def _local_ode_time(params: ModelParams, u):
    with np.errstate(divide="ignore"):
        return (params.kappa0 / np.abs(u)) ** ((params.p - 1) / 2)


def local_time_to_blowup(params: ModelParams, u, ut):
    """Remaining time (2/(p-1)) u/u_t, exact for every travelling soliton.

    For u = c (T - t + d x)^(-a) one has u_t/u = a/(T(x) - t) whatever d is,
    while the spatially constant ODE time misses the u_xx contribution and
    overestimates the remaining time by (1-d^2)^(-1/2).  Infinite where u
    is not growing in modulus.
    """
    a = params.alpha
    u = np.asarray(u, dtype=float)
    ut = np.asarray(ut, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        r = a * u / ut
    return np.where((u * ut > 0) & np.isfinite(r), r, np.inf)


def _front_ghost(u_i, u_next, a):
    """Ghost value beyond a blow-up front from two live nodes.

    Near a regular blow-up point the solution is locally a travelling
    soliton c (T - t + d x)^(-a), for which |u|^(-1/a) is linear in x.  The
    ghost extrapolates that quantity linearly; where it does not apply
    (sign change, zero values, the ghost would itself be singular) the
    fallback is linear extrapolation of u, i.e. u_xx = 0.
    """
    ghost = 2 * u_i - u_next
    same = (u_i * u_next > 0)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        v_i = np.abs(u_i) ** (-1.0 / a)
        v_n = np.abs(u_next) ** (-1.0 / a)
        v_g = 2 * v_i - v_n
        ok = same & np.isfinite(v_i) & np.isfinite(v_n) & (v_g > 0.25 * v_i)
        prof = np.sign(u_i) * np.where(ok, v_g, 1.0) ** (-a)
    return np.where(ok, prof, ghost)


def _acceleration(state: WaveState, p: float) -> np.ndarray:
    u, mask = state.u, state.mask
    a = 2.0 / (p - 1.0)
    n = u.size
    lap = np.zeros_like(u)
    lap[1:-1] = (u[2:] - 2 * u[1:-1] + u[:-2]) / state.dx ** 2
    live = ~mask
    # fronts: a live node with a masked neighbour gets a ghost value on that side
    left = np.zeros(n, dtype=bool)
    left[1:] = mask[:-1]
    right = np.zeros(n, dtype=bool)
    right[:-1] = mask[1:]
    both = live & left & right
    lf = np.nonzero(live & left & ~right)[0]
    lf = lf[lf + 1 < n]
    if lf.size:
        g = _front_ghost(u[lf], u[lf + 1], a)
        lap[lf] = (u[lf + 1] - 2 * u[lf] + g) / state.dx ** 2
    rf = np.nonzero(live & right & ~left)[0]
    rf = rf[rf - 1 >= 0]
    if rf.size:
        g = _front_ghost(u[rf], u[rf - 1], a)
        lap[rf] = (u[rf - 1] - 2 * u[rf] + g) / state.dx ** 2
    lap[both] = 0.0
    # outer edges: linear extrapolation (u_xx = 0)
    lap[0] = lap[-1] = 0.0
    acc = lap + np.abs(u) ** (p - 1) * u
    acc[mask] = 0.0
    return acc


def light_cone_times(x: np.ndarray, mask: np.ndarray, t_blow: np.ndarray) -> np.ndarray:
    """min over masked j of t_blow_j + |x_i - x_j| (inf where no masked node)."""
    tm = np.where(mask & np.isfinite(t_blow), t_blow, np.inf)
    fwd = np.minimum.accumulate(tm - x) + x
    bwd = (np.minimum.accumulate((tm + x)[::-1]))[::-1] - x
    return np.minimum(fwd, bwd)


def _apply_boundary(state: WaveState, cfg: SolverConfig):
    if cfg.boundary != "exact":
        return
    xe = np.array([state.x[0], state.x[-1]])
    ue, ute = cfg.boundary_fn(xe, state.t)
    for k, i in enumerate((0, -1)):
        if not state.mask[i]:
            state.u[i] = ue[k]
            state.ut[i] = ute[k]


def _update_mask(state: WaveState, params: ModelParams, cfg: SolverConfig) -> bool:
    """Mask newly blown-up nodes and their light cones; return True if anything changed."""
    live = ~state.mask
    rem = local_time_to_blowup(params, state.u, state.ut)
    # the ODE time guards against tiny |u| with an even tinier u_t
    near = _local_ode_time(params, state.u) < 1e3 * cfg.mask_ratio * state.dx
    bad = live & ((near & (rem < cfg.mask_ratio * state.dx)) | (np.abs(state.u) > cfg.u_max)
                  | ~np.isfinite(state.u) | ~np.isfinite(state.ut))
    changed = False
    if bad.any():
        state.t_blow[bad] = state.t + np.nan_to_num(rem[bad], nan=0.0, posinf=0.0)
        state.kind[bad] = SELF
        state.mask[bad] = True
        changed = True
    if state.mask.any():
        cone = light_cone_times(state.x, state.mask, state.t_blow)
        hit = ~state.mask & (cone <= state.t)
        if hit.any():
            state.t_blow[hit] = cone[hit]
            state.kind[hit] = CONE
            state.mask[hit] = True
            changed = True
    if changed:
        state.u[state.mask] = 0.0
        state.ut[state.mask] = 0.0
    return changed


def choose_dt(state: WaveState, params: ModelParams, cfg: SolverConfig) -> float:
    live = ~state.mask
    dt = cfg.cfl * state.dx
    if live.any():
        umax = float(np.max(np.abs(state.u[live])))
        if umax > 0:
            dt = min(dt, cfg.ode_fraction * float(_local_ode_time(params, umax)))
    return dt


@dataclass
class Snapshot:
    t: float
    x: np.ndarray
    u: np.ndarray
    ut: np.ndarray
    mask: np.ndarray
    valid: tuple
    dx: float


def snapshot(state: WaveState, cfg: SolverConfig) -> Snapshot:
    return Snapshot(state.t, state.x.copy(), state.u.copy(), state.ut.copy(),
                    state.mask.copy(), state.valid_interval(cfg), state.dx)


@dataclass
class Run:
    """Final state plus recorded snapshots of a run."""
    state: WaveState
    config: SolverConfig
    snapshots: list = field(default_factory=list)
    steps: int = 0
    ended_early: bool = False
    blowup_records: list = field(default_factory=list)  # (x, T, dx, kind) from finished grids

    def blowup_table(self) -> np.ndarray:
        """Rows (x, T, dx, kind) of every masked node, including the final grid."""
        rows = list(self.blowup_records)
        s = self.state
        for i in np.nonzero(s.mask & (s.kind != INHERITED))[0]:
            rows.append((s.x[i], s.t_blow[i], s.dx, s.kind[i]))
        if not rows:
            return np.zeros((0, 4))
        arr = np.array(rows, dtype=float)
        return arr[np.argsort(arr[:, 0], kind="stable")]


def evolve(state: WaveState, t_end: float, cfg: SolverConfig | None = None,
           record_times=None, stop_fn: Callable | None = None, max_steps: int = 10_000_000) -> Run:
    """Advance ``state`` (a copy is made) to ``t_end``.

    Snapshots are taken exactly at ``record_times``.  The run stops early when
    every node is masked or ``stop_fn(state)`` returns True.
    """
    cfg = cfg or SolverConfig()
    params = ModelParams(cfg.p)
    st = state.copy()
    if st.dt and st.dt > cfg.cfl * st.dx * (1 + 1e-12):
        raise ConfigurationError(f"dt/dx = {st.dt / st.dx:.3g} exceeds the CFL factor {cfg.cfl}")
    rec = sorted(float(r) for r in (record_times if record_times is not None else []))
    rec = [r for r in rec if r >= st.t]
    run = Run(state=st, config=cfg)
    _apply_boundary(st, cfg)
    _update_mask(st, params, cfg)
    while rec and rec[0] <= st.t:
        run.snapshots.append(snapshot(st, cfg))
        rec.pop(0)
    acc = _acceleration(st, cfg.p)
    p = cfg.p
    while st.t < t_end and run.steps < max_steps:
        if st.mask.all():
            run.ended_early = True
            break
        dt = min(choose_dt(st, params, cfg), t_end - st.t)
        if rec:
            dt = min(dt, rec[0] - st.t)
        live = ~st.mask
        st.ut += 0.5 * dt * acc
        st.u += dt * st.ut
        st.u[~live] = 0.0
        st.t += dt
        st.dt = dt
        if abs(st.t - t_end) < 1e-14 * max(1.0, abs(t_end)):
            st.t = t_end
        _apply_boundary(st, cfg)
        with np.errstate(over="ignore", invalid="ignore"):
            acc = _acceleration(st, p)
        st.ut += 0.5 * dt * acc
        _apply_boundary(st, cfg)
        run.steps += 1
        if _update_mask(st, params, cfg):
            acc = _acceleration(st, p)
        while rec and rec[0] <= st.t + 1e-14:
            run.snapshots.append(snapshot(st, cfg))
            rec.pop(0)
        if stop_fn is not None and stop_fn(st):
            break
    if st.mask.all() and st.t < t_end:
        run.ended_early = True
    return run


def discrete_energy(state: WaveState, p: float) -> float:
    """Conserved-to-O(dt^2) energy of the semi-discrete system."""
    dx = state.dx
    kin = 0.5 * np.sum(state.ut ** 2) * dx
    grad = 0.5 * np.sum(np.diff(state.u) ** 2) / dx
    pot = np.sum(np.abs(state.u) ** (p + 1)) / (p + 1) * dx
    return float(kin + grad - pot)


# ----------------------------------------------------------------------------
# nested refinement around one point


@dataclass
class ZoomConfig:
    n_nodes: int = 4001           # nodes per refined grid
    half_width: float = 2.5       # refined grid spans x0 +- half_width * tau_est
    snapshot_ds: float = 0.05     # snapshot each time -log(tau_est) grows by this
    s_max: float = 10.0           # stop refining once tau_est < exp(-s_max)
    max_levels: int = 40


def _segment_around(mask: np.ndarray, i0: int) -> tuple[int, int]:
    lo = i0
    while lo > 0 and not mask[lo - 1]:
        lo -= 1
    hi = i0
    while hi < mask.size - 1 and not mask[hi + 1]:
        hi += 1
    return lo, hi


def tau_estimate(state: WaveState, params: ModelParams, x0: float) -> float:
    """Upper estimate of T(x0) - t from |u(x0)| and the distance to the nearest front."""
    i0 = int(np.argmin(np.abs(state.x - x0)))
    if state.mask[i0]:
        return 0.0
    tau_u = float(_local_ode_time(params, state.u[i0])) if state.u[i0] != 0 else np.inf
    if state.mask.any():
        front = float(np.min(np.abs(state.x[state.mask] - x0)))
    else:
        front = np.inf
    return min(tau_u, front)


def _refine(state: WaveState, x0: float, tau: float, zc: ZoomConfig, cfg: SolverConfig) -> WaveState:
    dx_new = state.dx / 2
    K = (zc.n_nodes - 1) // 2
    lo_v, hi_v = state.valid_interval(cfg)
    R = min(K * dx_new, x0 - lo_v, hi_v - x0)
    K = int(np.floor(R / dx_new))
    x_new = x0 + dx_new * np.arange(-K, K + 1)
    i0 = int(np.argmin(np.abs(state.x - x0)))
    lo, hi = _segment_around(state.mask, i0)
    xs = state.x[lo:hi + 1]
    inside = (x_new >= xs[0]) & (x_new <= xs[-1])
    u_new = np.zeros_like(x_new)
    ut_new = np.zeros_like(x_new)
    if xs.size >= 4:
        u_new[inside] = CubicSpline(xs, state.u[lo:hi + 1])(x_new[inside])
        ut_new[inside] = CubicSpline(xs, state.ut[lo:hi + 1])(x_new[inside])
    else:
        u_new[inside] = np.interp(x_new[inside], xs, state.u[lo:hi + 1])
        ut_new[inside] = np.interp(x_new[inside], xs, state.ut[lo:hi + 1])
    mask = ~inside
    # carry blow-up times of masked neighbours so the light-cone rule stays active
    t_blow = np.full(x_new.size, np.nan)
    if mask.any():
        idx = np.clip(np.searchsorted(state.x, x_new[mask]), 0, state.n - 1)
        t_blow[mask] = state.t_blow[idx]
    kind = np.where(mask, INHERITED, NOT_MASKED).astype(np.int8)
    edge_lo, edge_hi = (state.edge_lo, state.edge_hi) if cfg.boundary == "exact" else (x_new[0], x_new[-1])
    return WaveState(x=x_new, u=u_new, ut=ut_new, t=state.t, dx=dx_new, mask=mask,
                     t_blow=t_blow, kind=kind, t_start=state.t, edge_lo=edge_lo, edge_hi=edge_hi)


@dataclass
class ZoomRun(Run):
    x0: float = 0.0
    T0: float = np.nan
    levels: list = field(default_factory=list)   # (t, dx, x_lo, x_hi) at each refinement


def evolve_zoom(state: WaveState, x0: float, t_end: float, cfg: SolverConfig | None = None,
                zoom: ZoomConfig | None = None) -> ZoomRun:
    """Run with nested refinement around ``x0`` until x0 itself is masked.

    The grid is halved whenever fewer than n_nodes/2 nodes would cover
    [x0 - half_width*tau, x0 + half_width*tau].  Snapshots are stored each
    time the estimated -log(T(x0) - t) advances by ``snapshot_ds``.
    """
    cfg = cfg or SolverConfig()
    zc = zoom or ZoomConfig()
    if cfg.boundary == "exact":
        cfg = replace(cfg, boundary="outflow", boundary_fn=None)
    params = ModelParams(cfg.p)
    run = ZoomRun(state=state.copy(), config=cfg, x0=x0)
    st = run.state
    if np.min(np.abs(st.x - x0)) > 1e-12 * max(1.0, abs(x0)):
        raise ConfigurationError("x0 must be a grid node")
    last_snap = [np.inf]
    refining = [True]

    def hook(s: WaveState) -> bool:
        tau = tau_estimate(s, params, x0)
        if tau == 0.0:
            return True
        if tau <= last_snap[0] * np.exp(-zc.snapshot_ds):
            run.snapshots.append(snapshot(s, cfg))
            last_snap[0] = tau
        if refining[0] and 2 * zc.half_width * tau / s.dx < zc.n_nodes / 2:
            if tau < np.exp(-zc.s_max) or len(run.levels) >= zc.max_levels:
                refining[0] = False
                return False
            return True
        return False

    while st.t < t_end:
        sub = evolve(st, t_end, cfg, stop_fn=hook)
        run.steps += sub.steps
        st = sub.state
        i0 = int(np.argmin(np.abs(st.x - x0)))
        if st.mask[i0] or st.mask.all() or st.t >= t_end:
            break
        tau = tau_estimate(st, params, x0)
        for i in np.nonzero(st.mask & (st.kind != INHERITED))[0]:
            run.blowup_records.append((st.x[i], st.t_blow[i], st.dx, st.kind[i]))
        st = _refine(st, x0, tau, zc, cfg)
        run.levels.append((st.t, st.dx, float(st.x[0]), float(st.x[-1])))
        run.snapshots.append(snapshot(st, cfg))
    run.state = st
    i0 = int(np.argmin(np.abs(st.x - x0)))
    if st.mask[i0]:
        run.T0 = float(st.t_blow[i0])
    else:
        run.ended_early = False
    return run
