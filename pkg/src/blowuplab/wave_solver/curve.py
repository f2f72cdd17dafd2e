"""Blow-up curves x -> T(x) from nested resolutions with Richardson extrapolation."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import ConfigurationError
from ..grid import ModelParams
from .config import SolveConfig
from .presets import make_preset
from .solver import INHERITED, SolverConfig, ZoomConfig, evolve, evolve_zoom, uniform_state


@dataclass
class BlowupCurve:
    x: np.ndarray
    T: np.ndarray            # NaN where no blow-up was detected
    err: np.ndarray
    order: float = np.nan
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.x = np.asarray(self.x, float)
        self.T = np.asarray(self.T, float)
        self.err = np.asarray(self.err, float)

    @property
    def no_blowup(self) -> np.ndarray:
        return ~np.isfinite(self.T)

    @property
    def samples(self) -> list:
        return list(zip(self.x.tolist(), self.T.tolist(), self.err.tolist()))

    @property
    def slope_left(self) -> np.ndarray:
        s = np.full(self.x.size, np.nan)
        s[1:] = np.diff(self.T) / np.diff(self.x)
        return s

    @property
    def slope_right(self) -> np.ndarray:
        s = np.full(self.x.size, np.nan)
        s[:-1] = np.diff(self.T) / np.diff(self.x)
        return s

    def lipschitz_excess(self) -> np.ndarray:
        """|dT| - |dx| - 2 (err_i + err_j) between neighbours; positive entries violate 1-Lipschitz."""
        dT = np.abs(np.diff(self.T))
        return dT - np.abs(np.diff(self.x)) - 2 * (self.err[1:] + self.err[:-1])

    def is_lipschitz(self) -> bool:
        ex = self.lipschitz_excess()
        ex = ex[np.isfinite(ex)]
        return bool(np.all(ex <= 1e-12))

    def x0_candidates(self, tol: float = 0.3) -> list:
        """Local maxima of T where both one-sided slopes are within ``tol`` of +-1."""
        sl, sr = self.slope_left, self.slope_right
        out = []
        for i in range(1, self.x.size - 1):
            if not (np.isfinite(sl[i]) and np.isfinite(sr[i])):
                continue
            if sl[i] > 1 - tol and sr[i] < -(1 - tol):
                out.append(float(self.x[i]))
        return out

    def to_csv(self, path) -> None:
        sl, sr = self.slope_left, self.slope_right
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["x", "T", "err", "slope_left", "slope_right"])
            for row in zip(self.x, self.T, self.err, sl, sr):
                wr.writerow([f"{v:.17g}" for v in row])

    @classmethod
    def from_csv(cls, path) -> "BlowupCurve":
        data = np.genfromtxt(Path(path), delimiter=",", skip_header=1, ndmin=2)
        return cls(x=data[:, 0], T=data[:, 1], err=data[:, 2])


def richardson(values: list, order: float | None = None, ratio: float = 2.0):
    """Extrapolate a sequence of coarse-to-fine estimates to zero spacing.

    Returns (extrapolated, error bar, order).  The order is the median
    observed one unless fixed; the error bar is the correction plus the
    spread between the extrapolations from the two finest pairs.
    """
    v = [np.asarray(a, float) for a in values]
    if len(v) < 2:
        raise ConfigurationError("Richardson extrapolation needs at least two resolutions")
    if len(v) == 2:
        q = 1.0 if order is None else float(order)
        corr = (v[1] - v[0]) / (ratio ** q - 1)
        return v[1] + corr, np.abs(corr), q
    d1 = v[-2] - v[-3]
    d2 = v[-1] - v[-2]
    if order is None:
        with np.errstate(divide="ignore", invalid="ignore"):
            r = np.abs(d1) / np.abs(d2)
        r = r[np.isfinite(r) & (r > 0)]
        q = float(np.clip(np.log(np.median(r)) / np.log(ratio), 0.5, 4.0)) if r.size else 1.0
    else:
        q = float(order)
    f = ratio ** q - 1
    ext = v[-1] + d2 / f
    ext_prev = v[-2] + d1 / f
    err = np.abs(d2) / f + np.abs(ext - ext_prev)
    return ext, err, q


def solver_config(cfg: SolveConfig, preset) -> SolverConfig:
    exact = preset.exact is not None
    return SolverConfig(p=cfg.p, cfl=cfg.cfl, u_max=cfg.u_max, mask_ratio=cfg.mask_ratio,
                        boundary="exact" if exact else "outflow",
                        boundary_fn=preset.exact if exact else None)


def _node_times(run, n_coarse: int, step: int) -> np.ndarray:
    s = run.state
    T = np.where(s.mask & (s.kind != INHERITED), s.t_blow, np.nan)
    return T[::step][:n_coarse]


def estimate_T(cfg: SolveConfig, order: float | None = None) -> BlowupCurve:
    """Blow-up times on the coarse nodes from ``cfg.levels`` nested uniform grids."""
    params = ModelParams(cfg.p)
    preset = make_preset(cfg.preset, params, **cfg.preset_kwargs())
    scfg = solver_config(cfg, preset)
    n0 = cfg.nx
    per_level = []
    x = None
    for lev in range(cfg.levels):
        step = 2 ** lev
        n = (n0 - 1) * step + 1
        st = uniform_state(cfg.x_min, cfg.x_max, n, preset.u0, preset.u1)
        run = evolve(st, cfg.t_max, scfg)
        if x is None:
            x = run.state.x[::step]
        per_level.append(_node_times(run, n0, step))
    if len(per_level) == 1:
        T, err, q = per_level[0], np.full(n0, np.nan), np.nan
    else:
        T, err, q = richardson(per_level, order)
    # outflow edges: keep samples whose backward cone stays inside the domain
    if scfg.boundary == "outflow":
        far = (x - cfg.x_min > T) & (cfg.x_max - x > T)
        T = np.where(far, T, np.nan)
    return BlowupCurve(x=x, T=T, err=err, order=q,
                       meta={"levels": [np.asarray(a) for a in per_level], "preset": cfg.preset})


def curve_from_zoom(runs: list, x0: float, n_samples: int = 200, x_min: float | None = None,
                    x_max: float | None = None, order: float | None = 1.0) -> BlowupCurve:
    """Curve on geometrically spaced |x - x0| from zoom runs of increasing resolution.

    Each run's blow-up records are interpolated (separately on each side of
    x0) to the common sample points; several runs are combined by Richardson
    extrapolation in the refinement ratio 2.
    """
    tabs = [r.blowup_table() for r in runs]
    lo_abs = x_min if x_min is not None else max(np.min(np.abs(t[t[:, 0] != x0, 0] - x0)) for t in tabs) * 10
    hi_abs = x_max if x_max is not None else 0.5 * min(np.max(np.abs(t[:, 0] - x0)) for t in tabs)
    r = np.geomspace(lo_abs, hi_abs, n_samples // 2)
    xs = np.concatenate([x0 - r[::-1], x0 + r])
    vals = []
    for t in tabs:
        v = np.full(xs.size, np.nan)
        for side in (-1, 1):
            m = (np.sign(t[:, 0] - x0) == side)
            xx, tt = t[m, 0], t[m, 1]
            o = np.argsort(xx)
            sel = np.sign(xs - x0) == side
            v[sel] = np.interp(xs[sel], xx[o], tt[o], left=np.nan, right=np.nan)
        vals.append(v)
    if len(vals) == 1:
        return BlowupCurve(x=xs, T=vals[0], err=np.zeros(xs.size), meta={"x0": x0})
    T, err, q = richardson(vals, order)
    return BlowupCurve(x=xs, T=T, err=err, order=q, meta={"x0": x0})


def zoom_runs(cfg: SolveConfig, x0: float | None = None, resolutions=(2001, 4001)) -> list:
    """Refinement runs around x0 at several node counts (coarse to fine)."""
    params = ModelParams(cfg.p)
    preset = make_preset(cfg.preset, params, **cfg.preset_kwargs())
    scfg = solver_config(cfg, preset)
    x0 = cfg.x0 if x0 is None else x0
    out = []
    for nn in resolutions:
        st = uniform_state(cfg.x_min, cfg.x_max, cfg.nx, preset.u0, preset.u1)
        out.append(evolve_zoom(st, x0, cfg.t_max, scfg, ZoomConfig(n_nodes=nn, s_max=cfg.zoom_s_max)))
    return out
