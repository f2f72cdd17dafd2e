"""Similarity variables w_x0(y, s) = (T(x0) - t)^(2/(p-1)) u(x0 + y(T(x0) - t), t)."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.interpolate import CubicSpline

from ..errors import TruncationError
from ..functionals import energy, norm_H
from ..grid import FieldPair, ModelParams, WeightedGrid, build_grid, build_window_grid, check_aligned
from .solver import Run, Snapshot


@dataclass
class SimilarityTrace:
    x0: float
    T_x0: float
    s_values: np.ndarray
    states: list
    y_max: np.ndarray
    grid: WeightedGrid
    snapshots: list = field(default_factory=list, repr=False)

    @property
    def p(self) -> float:
        return self.grid.p

    def complete(self, i: int) -> bool:
        return self.states[i].is_finite()

    def energies(self) -> np.ndarray:
        params = ModelParams(self.p)
        return np.array([energy(params, self.grid, w) if w.is_finite() else np.nan
                         for w in self.states])

    def window_state(self, i: int, a: float, n: int = 96) -> tuple[WeightedGrid, FieldPair]:
        """(w, d_s w) at slice i resampled on a Gauss-Legendre grid over |y| <= a."""
        if a > self.y_max[i]:
            raise TruncationError(f"window |y| <= {a} exceeds resolved y_max = {self.y_max[i]:.3g}")
        wg = build_window_grid(ModelParams(self.p), a, n)
        return wg, sample_snapshot(self.snapshots[i], self.x0, self.T_x0, wg, self.p)

    def restricted_distance(self, i: int, ref, a: float = 0.9, n: int = 96) -> float:
        """||w(s_i) - ref||_H on |y| <= a; ``ref(y) -> FieldPair`` gives the comparison profile."""
        wg, w = self.window_state(i, a, n)
        return norm_H(wg, w - ref(wg.nodes))

    def write(self, directory) -> Path:
        """One CSV per s-slice (y, w, w_s) plus a JSON manifest."""
        out = Path(directory)
        out.mkdir(parents=True, exist_ok=True)
        files = []
        for i, (s, st) in enumerate(zip(self.s_values, self.states)):
            name = f"slice_{i:04d}.csv"
            with open(out / name, "w") as fh:
                fh.write("y,w,w_s\n")
                for y, a, b in zip(self.grid.nodes, st.q1, st.q2):
                    fh.write(f"{y:.17g},{a:.17g},{b:.17g}\n")
            files.append({"file": name, "s": float(f"{s:.17g}"), "y_max": float(f"{self.y_max[i]:.17g}")})
        manifest = {"x0": self.x0, "T_x0": self.T_x0, "p": self.p, "grid_n": self.grid.n, "slices": files}
        path = out / "trace.json"
        path.write_text(json.dumps(manifest, indent=2))
        return path


def _segment_spline(snap: Snapshot, x0: float):
    i0 = int(np.argmin(np.abs(snap.x - x0)))
    if snap.mask[i0]:
        raise TruncationError("x0 is already masked in this snapshot")
    lo = i0
    while lo > 0 and not snap.mask[lo - 1]:
        lo -= 1
    hi = i0
    while hi < snap.x.size - 1 and not snap.mask[hi + 1]:
        hi += 1
    # drop the node next to a front or edge: its Laplacian was extrapolated
    lo2 = lo + 1 if lo > 0 else lo
    hi2 = hi - 1 if hi < snap.x.size - 1 else hi
    xs = snap.x[lo2:hi2 + 1]
    if xs.size < 4:
        raise TruncationError("too few live nodes around x0")
    return xs, CubicSpline(xs, snap.u[lo2:hi2 + 1]), CubicSpline(xs, snap.ut[lo2:hi2 + 1])


def resolved_y_max(snap: Snapshot, x0: float, tau: float) -> float:
    xs, _, _ = _segment_spline(snap, x0)
    lo = max(xs[0], snap.valid[0])
    hi = min(xs[-1], snap.valid[1])
    ym = float(min(x0 - lo, hi - x0) / tau)
    if ym <= 0:
        raise TruncationError("x0 lies outside the region resolved by this snapshot")
    return ym


def sample_snapshot(snap: Snapshot, x0: float, T_x0: float, grid: WeightedGrid, p: float,
                    y_max: float | None = None) -> FieldPair:
    """(w, d_s w) on the grid nodes; NaN where |y| exceeds the resolved window."""
    tau = T_x0 - snap.t
    if tau <= 0:
        raise TruncationError("snapshot lies after T(x0)")
    a = 2.0 / (p - 1.0)
    xs, su, sut = _segment_spline(snap, x0)
    if y_max is None:
        y_max = resolved_y_max(snap, x0, tau)
    y = grid.nodes
    ok = np.abs(y) <= y_max
    x = x0 + tau * y[ok]
    w1 = np.full(y.size, np.nan)
    w2 = np.full(y.size, np.nan)
    w1[ok] = tau ** a * su(x)
    w2[ok] = -a * w1[ok] + tau ** (a + 1) * (sut(x) - y[ok] * su(x, 1))
    return FieldPair(w1, w2)


def to_similarity(run: Run, x0: float, T_x0: float, s_grid=None, grid: WeightedGrid | None = None,
                  n: int = 160, s_tol: float = 0.05) -> SimilarityTrace:
    """Resample the run's snapshots in similarity variables around (x0, T_x0).

    With ``s_grid`` given, the snapshot closest in s to each requested value
    is used (within ``s_tol``); otherwise every snapshot before T_x0 is.
    """
    p = run.config.p
    grid = grid or build_grid(ModelParams(p), n)
    snaps = [sn for sn in run.snapshots if sn.t < T_x0]
    live = []
    for sn in snaps:
        i0 = int(np.argmin(np.abs(sn.x - x0)))
        if not sn.mask[i0]:
            live.append(sn)
    if not live:
        raise TruncationError("no snapshot resolves x0 before T(x0)")
    s_snap = np.array([-np.log(T_x0 - sn.t) for sn in live])
    if s_grid is None:
        chosen = list(range(len(live)))
    else:
        chosen = []
        for s in np.atleast_1d(s_grid):
            j = int(np.argmin(np.abs(s_snap - s)))
            if abs(s_snap[j] - s) > s_tol:
                raise TruncationError(f"s = {s:.4g} is not resolved by the run (nearest {s_snap[j]:.4g})")
            chosen.append(j)
    # keep s strictly increasing
    uniq = []
    for j in chosen:
        if not uniq or s_snap[j] > s_snap[uniq[-1]]:
            uniq.append(j)
    states, ymax, svals, used = [], [], [], []
    for j in uniq:
        sn = live[j]
        tau = T_x0 - sn.t
        try:
            ym = resolved_y_max(sn, x0, tau)
            st = sample_snapshot(sn, x0, T_x0, grid, p, ym)
        except TruncationError:
            continue
        states.append(st)
        ymax.append(min(ym, 1.0))
        svals.append(s_snap[j])
        used.append(sn)
    if not states:
        raise TruncationError("no snapshot could be resampled")
    return SimilarityTrace(x0=float(x0), T_x0=float(T_x0), s_values=np.array(svals), states=states,
                           y_max=np.array(ymax), grid=grid, snapshots=used)


def trace_profile(trace: SimilarityTrace):
    """Profile callable (Y, S) -> (W, W_S, W_Y) interpolating a trace in s and y.

    W and W_S are taken from the nearest slices (linear in s); W_Y is the
    spectral derivative on the trace grid evaluated by barycentric interpolation.
    """
    from ..grid import derivative
    S = trace.s_values

    def prof(Y, s):
        Y = np.atleast_1d(np.asarray(Y, float))
        j = int(np.clip(np.searchsorted(S, s) - 1, 0, len(S) - 2)) if len(S) > 1 else 0
        th = 0.0 if len(S) == 1 else float(np.clip((s - S[j]) / (S[j + 1] - S[j]), 0, 1))
        out = []
        for k in ((j, j + 1) if len(S) > 1 else (j,)):
            st = trace.states[k]
            w = trace.grid.interpolate(st.q1, Y)
            ws = trace.grid.interpolate(st.q2, Y)
            wy = trace.grid.interpolate(derivative(trace.grid, check_aligned(trace.grid, st.q1)), Y)
            out.append((w, ws, wy))
        if len(out) == 1:
            return out[0]
        return tuple((1 - th) * a + th * b for a, b in zip(*out))

    return prof
