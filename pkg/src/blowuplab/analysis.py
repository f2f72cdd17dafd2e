"""Measurable laws at a blow-up point: classification, soliton counting,
soliton-centre drift, the corner of the blow-up curve and the blow-up speed."""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DomainError, FitError, ParameterError, RegionError
from .functionals import energy_kappa0, norm_H
from .grid import FieldPair, ModelParams, chart_xi
from .modulation import FitConfig, ModulationFit, _fmt17, fit
from .solitons import SolitonParam
from .wave_solver.curve import BlowupCurve
from .wave_solver.similarity import SimilarityTrace

REGULAR = "regular"
CHARACTERISTIC = "characteristic_candidate"
UNDECIDED = "undecided"


@dataclass
class LawFit:
    law: str
    constants: dict
    residuals: dict
    verdict: str                 # "pass", "fail" or "undecided"
    target: dict = field(default_factory=dict)
    tolerance: float | None = None
    inputs: dict = field(default_factory=dict)
    reason: str = ""
    series: dict = field(default_factory=dict, repr=False)

    @property
    def passed(self) -> bool:
        return self.verdict == "pass"

    def to_dict(self) -> dict:
        return _fmt17({"law": self.law, "constants": _plain(self.constants),
                       "residuals": _plain(self.residuals), "verdict": self.verdict,
                       "target": _plain(self.target), "tolerance": self.tolerance,
                       "inputs": _plain(self.inputs), "reason": self.reason})

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def write(self, directory, plot: bool = True) -> list[Path]:
        """JSON report, CSV of the fitted series and (optionally) an SVG plot."""
        out = Path(directory)
        out.mkdir(parents=True, exist_ok=True)
        paths = [out / f"{self.law}.json"]
        paths[0].write_text(self.to_json())
        if self.series:
            keys = list(self.series)
            cols = [np.asarray(self.series[k], float) for k in keys]
            n = max(c.size for c in cols)
            p = out / f"{self.law}.csv"
            with open(p, "w", newline="") as fh:
                wr = csv.writer(fh)
                wr.writerow(keys)
                for i in range(n):
                    wr.writerow([f"{c[i]:.17g}" if i < c.size else "" for c in cols])
            paths.append(p)
            if plot:
                paths.append(self._plot(out / f"{self.law}.svg"))
        return paths

    def _plot(self, path: Path) -> Path:
        import matplotlib
        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
        keys = list(self.series)
        x = np.asarray(self.series[keys[0]], float)
        with plt.rc_context({"svg.hashsalt": self.law}):
            self._draw(plt, path, keys, x)
        return path

    def _draw(self, plt, path, keys, x):
        fig, ax = plt.subplots(figsize=(6, 4))
        for k in keys[1:]:
            ax.plot(x, np.asarray(self.series[k], float), label=k)
        ax.set_xlabel(keys[0])
        ttl = ", ".join(f"{k}={v:.4g}" for k, v in self.target.items() if isinstance(v, (int, float)))
        ax.set_title(f"{self.law} ({self.verdict}); target {ttl}", fontsize=9)
        ax.legend(fontsize=8)
        fig.tight_layout()
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    return obj


def _linfit(x, y):
    """Least squares y = a x + b; returns (a, b, rms residual, standard error of a)."""
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    A = np.vstack([x, np.ones_like(x)]).T
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    res = y - A @ coef
    dof = max(x.size - 2, 1)
    s2 = float(res @ res) / dof
    try:
        cov = s2 * np.linalg.inv(A.T @ A)
        se = float(np.sqrt(max(cov[0, 0], 0.0)))
    except np.linalg.LinAlgError:
        se = np.inf
    return float(coef[0]), float(coef[1]), float(np.sqrt(np.mean(res ** 2))), se


# ----------------------------------------------------------------------------
# energy-based classification and soliton counting


def energy_plateau(trace: SimilarityTrace, tail: float = 0.25) -> float:
    """Median energy over the last ``tail`` fraction of the s range (finite states only)."""
    E = trace.energies()
    s = trace.s_values
    ok = np.isfinite(E)
    if not ok.any():
        return np.nan
    s0 = s[ok][-1] - tail * (s[ok][-1] - s[ok][0])
    return float(np.median(E[ok & (s >= s0)]))


@dataclass
class DecompositionTrace:
    s_values: np.ndarray
    fits: list                  # ModulationFit or None per s
    energies: np.ndarray
    k: int
    theta1: int

    @property
    def zetas(self) -> np.ndarray:
        """zeta_i(s) = -argth d_i(s), one column per soliton (NaN where the fit failed)."""
        z = np.full((self.s_values.size, self.k), np.nan)
        for j, f in enumerate(self.fits):
            if f is not None:
                z[j] = [sp.zeta for sp in f.params]
        return z

    @property
    def residual_norms(self) -> np.ndarray:
        return np.array([f.residual_norm if f is not None else np.nan for f in self.fits])

    @property
    def d_values(self) -> np.ndarray:
        d = np.full((self.s_values.size, self.k), np.nan)
        for j, f in enumerate(self.fits):
            if f is not None:
                d[j] = [sp.d for sp in f.params]
        return d

    def to_csv(self, path) -> None:
        z = self.zetas
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["s", "energy", "residual"] + [f"zeta_{i + 1}" for i in range(self.k)])
            for j, s in enumerate(self.s_values):
                wr.writerow([f"{v:.17g}" for v in [s, self.energies[j], self.residual_norms[j], *z[j]]])


def initial_guess(trace_or_grid, w: FieldPair, k: int, p: float):
    """Soliton centres and overall sign from the extrema of w(1-y^2)^(1/(p-1)) in the xi chart."""
    grid = trace_or_grid.grid if isinstance(trace_or_grid, SimilarityTrace) else trace_or_grid
    params = ModelParams(p)
    wb = chart_xi(grid, w.q1, "bar")
    xi = grid.xi_nodes
    ext = []
    for i in range(1, wb.size - 1):
        if (wb[i] >= wb[i - 1] and wb[i] >= wb[i + 1] and wb[i] > 0) or \
           (wb[i] <= wb[i - 1] and wb[i] <= wb[i + 1] and wb[i] < 0):
            ext.append(i)
    # merge neighbours of equal sign, keeping the larger one
    merged = []
    for i in ext:
        if merged and np.sign(wb[merged[-1]]) == np.sign(wb[i]):
            if abs(wb[i]) > abs(wb[merged[-1]]):
                merged[-1] = i
        else:
            merged.append(i)
    floor = 0.15 * params.kappa0
    merged = [i for i in merged if abs(wb[i]) > floor]
    if len(merged) > k:
        # keep the k strongest while preserving alternation as far as possible
        order = sorted(sorted(merged, key=lambda i: -abs(wb[i]))[:k])
        merged = order
    if len(merged) < k:
        # fall back to centres spread symmetrically around the strongest extremum
        c = xi[int(np.argmax(np.abs(wb)))]
        z = c + 1.5 * (np.arange(k) - (k - 1) / 2)
        i1 = int(np.argmin(np.abs(xi - z[0])))
        theta1 = int(np.sign(wb[i1])) or 1
        return [SolitonParam(float(-np.tanh(zz)), 0.0, p) for zz in z], theta1
    zs = [float(xi[i]) for i in merged]
    theta1 = int(np.sign(wb[merged[0]]))
    return [SolitonParam(float(-np.tanh(z)), 0.0, p) for z in zs], theta1


def _fit_state(params, grid, w, k, init, theta1, cfg):
    try:
        return fit(params, grid, w, k, init, cfg, theta1)
    except FitError as exc:
        best = exc.best if isinstance(exc.best, ModulationFit) else None
        return best
    except (RegionError, DomainError, ParameterError, np.linalg.LinAlgError):
        return None


def count_solitons(trace: SimilarityTrace, k_max: int = 3, rel_threshold: float = 0.2,
                   s_index: int | None = None, cfg: FitConfig | None = None,
                   continuation: bool = True, stride: int = 1):
    """Smallest k whose fit at the last resolved slice has ||q||_H <= rel_threshold ||w||_H.

    Returns (k, DecompositionTrace); the trace is refitted at every
    ``stride``-th slice by parameter continuation from the end.  Raises
    FitError with the residual table when no k qualifies.
    """
    params = ModelParams(trace.p)
    cfg = cfg or FitConfig(newton_tol=1e-9, max_iter=40)
    finite = [i for i, st in enumerate(trace.states) if st.is_finite()]
    if not finite:
        raise FitError("no fully resolved slice in the trace")
    j_end = finite[-1] if s_index is None else s_index
    w_end = trace.states[j_end]
    wn = norm_H(trace.grid, w_end)
    table = {}
    chosen = None
    for k in range(1, k_max + 1):
        init, theta1 = initial_guess(trace, w_end, k, trace.p)
        f = _fit_state(params, trace.grid, w_end, k, init, theta1, cfg)
        if f is None:
            table[k] = np.inf
            continue
        table[k] = f.residual_norm / wn
        if f.converged and table[k] <= rel_threshold:
            chosen = (k, f)
            break
    if chosen is None:
        raise FitError(f"no soliton count up to {k_max} fits; relative residuals {table}", best=table)
    k, f_end = chosen
    idx = [j for j in finite if j <= j_end][::-1]
    if not continuation:
        idx = [j_end]
    idx = idx[::stride] if stride > 1 else idx
    fits = {j_end: f_end}
    prev = f_end
    for j in idx:
        if j == j_end:
            continue
        init = prev.params if prev is not None else initial_guess(trace, trace.states[j], k, trace.p)[0]
        fj = _fit_state(params, trace.grid, trace.states[j], k, init, f_end.theta1, cfg)
        if fj is not None and fj.converged:
            fits[j] = fj
            prev = fj
        else:
            fits[j] = None
    order = sorted(fits)
    E = trace.energies()
    dec = DecompositionTrace(s_values=trace.s_values[order], fits=[fits[j] for j in order],
                             energies=E[order], k=k, theta1=f_end.theta1)
    return k, dec


@dataclass
class Classification:
    label: str
    reason: str
    E_min: float
    E_plateau: float
    k: int | None = None


def classify_point(trace: SimilarityTrace, margin: float = 0.05, k_max: int = 3,
                   min_slices: int = 5, fit_kwargs: dict | None = None) -> Classification:
    """regular / characteristic_candidate / undecided from the energy levels and a k >= 2 fit."""
    E0 = energy_kappa0(ModelParams(trace.p))
    E = trace.energies()
    ok = np.isfinite(E)
    if ok.sum() < min_slices:
        return Classification(UNDECIDED, f"only {int(ok.sum())} resolved slices", np.nan, np.nan)
    Emin = float(np.min(E[ok]))
    Ep = energy_plateau(trace)
    if Emin < 2 * E0 - margin * E0:
        return Classification(REGULAR, f"min energy {Emin:.6g} < 2E(kappa0) - margin", Emin, Ep, 1)
    try:
        k, _ = count_solitons(trace, k_max=k_max, continuation=False, **(fit_kwargs or {}))
    except FitError as exc:
        return Classification(UNDECIDED, f"energy plateau {Ep:.6g} but no soliton fit: {exc}", Emin, Ep)
    if k >= 2:
        return Classification(CHARACTERISTIC, f"energy plateau {Ep:.6g} >= 2E(kappa0) and a k={k} fit",
                              Emin, Ep, k)
    return Classification(UNDECIDED, f"energy plateau {Ep:.6g} but only k={k} fits", Emin, Ep, k)


# ----------------------------------------------------------------------------
# laws


def zeta_slope_targets(p: float, k: int) -> np.ndarray:
    """Log-law slopes (i - (k+1)/2)(p-1)/2 of the soliton centres, i = 1..k."""
    return (np.arange(1, k + 1) - (k + 1) / 2) * (p - 1) / 2


def zeta_law(dec: DecompositionTrace, p: float, tol: float = 0.3, window: tuple | None = None,
             targets: Sequence[float] | None = None) -> LawFit:
    """Fit zeta_i(s) = a_i log s + b_i and compare a_i with the targets."""
    if dec.k < 2:
        return LawFit("zeta_law", {}, {}, UNDECIDED, reason="needs k >= 2")
    s = dec.s_values
    z = dec.zetas
    sel = np.all(np.isfinite(z), axis=1) & (s > 0)
    if window is not None:
        sel &= (s >= window[0]) & (s <= window[1])
    if sel.sum() < 4 or s[sel].max() < 4 * s[sel].min():
        return LawFit("zeta_law", {}, {}, UNDECIDED, tolerance=tol,
                      reason="s range does not span a factor 4")
    tg = np.asarray(targets if targets is not None else zeta_slope_targets(p, dec.k), float)
    ls = np.log(s[sel])
    consts, res = {}, {}
    ok = True
    for i in range(dec.k):
        a, b, rms, se = _linfit(ls, z[sel, i])
        consts[f"a_{i + 1}"], consts[f"b_{i + 1}"] = a, b
        res[f"rms_{i + 1}"], res[f"se_a_{i + 1}"] = rms, se
        if tg[i] != 0:
            ok &= abs(a - tg[i]) <= tol * abs(tg[i])
        else:
            ok &= abs(a) <= tol
    series = {"log_s": ls}
    for i in range(dec.k):
        series[f"zeta_{i + 1}"] = z[sel, i]
    return LawFit("zeta_law", consts, res, "pass" if ok else "fail",
                  target={f"a_{i + 1}": float(t) for i, t in enumerate(tg)}, tolerance=tol,
                  inputs={"s_min": float(s[sel].min()), "s_max": float(s[sel].max()), "k": dec.k},
                  series=series)


def gap_law(dec: DecompositionTrace, target: float, tol: float = 0.3, window: tuple | None = None) -> LawFit:
    """Fit zeta_{i+1} - zeta_i against log s for every neighbouring pair; also checks growth."""
    if dec.k < 2:
        return LawFit("gap_law", {}, {}, UNDECIDED, reason="needs k >= 2")
    s = dec.s_values
    z = dec.zetas
    sel = np.all(np.isfinite(z), axis=1) & (s > 0)
    if window is not None:
        sel &= (s >= window[0]) & (s <= window[1])
    if sel.sum() < 4:
        return LawFit("gap_law", {}, {}, UNDECIDED, tolerance=tol, reason="too few fitted slices")
    ls = np.log(s[sel])
    gaps = np.diff(z[sel], axis=1)
    consts, res = {}, {}
    ok = True
    for i in range(gaps.shape[1]):
        a, b, rms, se = _linfit(ls, gaps[:, i])
        consts[f"slope_{i + 1}"] = a
        consts[f"increase_{i + 1}"] = float(gaps[-1, i] - gaps[0, i])
        res[f"rms_{i + 1}"], res[f"se_{i + 1}"] = rms, se
        ok &= gaps[-1, i] > gaps[0, i] and abs(a - target) <= tol * abs(target)
    return LawFit("gap_law", consts, res, "pass" if ok else "fail", target={"slope": target},
                  tolerance=tol, inputs={"s_min": float(s[sel].min()), "s_max": float(s[sel].max())},
                  series={"log_s": ls, **{f"gap_{i + 1}": gaps[:, i] for i in range(gaps.shape[1])}})


def corner_law(curve: BlowupCurve, x0: float, k: int, p: float, T0: float | None = None,
               tol: float = 0.3, window: tuple | None = None, min_decades: float = 2.0) -> LawFit:
    """Exponent of |T'(x) + sign(x - x0)| against |log|x - x0||, and the integrated bounds.

    T' is taken from centred differences of the curve in log |x - x0| on each
    side.  The integrated quantity G = T(x) - T(x0) + |x - x0| must be
    positive and G |log|x-x0||^gamma/|x-x0| bounded above and below.
    """
    gamma = (k - 1) * (p - 1) / 2
    x = curve.x
    T = curve.T
    err = curve.err
    r = np.abs(x - x0)
    if T0 is None:
        T0 = curve.meta.get("T0")
    if T0 is None:
        return LawFit("corner_law", {}, {}, UNDECIDED, reason="T(x0) unknown")
    sel = np.isfinite(T) & (r > 0)
    if window is not None:
        sel &= (r >= window[0]) & (r <= window[1])
    if gamma == 0:
        sl = np.gradient(T[sel], x[sel])
        return LawFit("corner_law", {"slope_mean": float(np.mean(sl))}, {}, UNDECIDED,
                      target={"gamma": 0.0}, reason="k = 1: regular slope, corner law not applicable")
    G_all = T - T0 + r
    lg_all = np.abs(np.log(r))
    gs, ls, Gs, rs = [], [], [], []
    for side in (-1, 1):
        m = sel & (np.sign(x - x0) == side)
        if m.sum() < 5:
            continue
        o = np.argsort(r[m])
        rr = r[m][o]
        TT = T[m][o]
        # T'(x) + sign(x - x0) = side * dG/dr along this side
        dG = np.gradient(TT - T0 + rr, rr)
        gs.append(np.abs(dG))
        ls.append(np.abs(np.log(rr)))
        Gs.append(G_all[m][o])
        rs.append(rr)
    if not gs:
        return LawFit("corner_law", {}, {}, UNDECIDED, reason="too few samples on either side")
    g = np.concatenate(gs)
    L = np.concatenate(ls)
    G = np.concatenate(Gs)
    rr = np.concatenate(rs)
    noise = float(np.nanmedian(err[sel])) if np.any(np.isfinite(err[sel])) else 0.0
    good = (g > 0) & np.isfinite(g) & (G > 2 * noise)
    if good.sum() < 5:
        return LawFit("corner_law", {}, {"noise_floor": noise}, UNDECIDED,
                      reason=f"signal below the noise floor {noise:.3g}")
    decades = np.log10(rr[good].max() / rr[good].min())
    if decades < min_decades:
        return LawFit("corner_law", {}, {"decades": decades}, UNDECIDED,
                      reason=f"window spans only {decades:.2f} decades")
    a, b, rms, se = _linfit(np.log(L[good]), np.log(g[good]))
    expo = -a
    band = G[good] * L[good] ** gamma / rr[good]
    pos = bool(np.all(G[good] > 0))
    C_up = float(band.max())
    C_lo = float(1 / band.min()) if band.min() > 0 else np.inf
    ok = abs(expo - gamma) <= tol * gamma and pos and np.isfinite(C_up) and np.isfinite(C_lo)
    return LawFit("corner_law", {"exponent": expo, "log_C": b, "C_upper": C_up, "C_lower": C_lo},
                  {"rms": rms, "se_exponent": se, "noise_floor": noise, "decades": float(decades)},
                  "pass" if ok else "fail", target={"gamma": gamma}, tolerance=tol,
                  inputs={"x0": x0, "T0": T0, "k": k, "n": int(good.sum())},
                  series={"log_abs_log_r": np.log(L[good]), "log_g": np.log(g[good])})


def cone_sup_series(run, x0: float, T_x0: float):
    """(tau, sup |u| over |x - x0| < tau) from the run's snapshots."""
    taus, sups = [], []
    for sn in run.snapshots:
        tau = T_x0 - sn.t
        if tau <= 0:
            continue
        m = np.abs(sn.x - x0) < tau
        if not m.any() or sn.mask[m].any():
            continue
        lo, hi = sn.valid
        if x0 - tau < lo or x0 + tau > hi:
            continue
        taus.append(tau)
        sups.append(float(np.max(np.abs(sn.u[m]))))
    o = np.argsort(taus)[::-1]
    return np.asarray(taus)[o], np.asarray(sups)[o]


def trusted_tau_min(s_max: float, margin: float = 2.5) -> float:
    """Smallest T - t to trust in a zoom run refined up to s_max (T(x0) error takes over below)."""
    return float(np.exp(-(s_max - margin)))


def blowup_speed(run, x0: float, T_x0: float, k: int, p: float, band: float = 4.0,
                 tau_range: tuple | None = None) -> LawFit:
    """Band test of S(t) (T-t)^(2/(p-1)) / |log(T-t)|^((k-1)/2) over the resolved range.

    For zoom runs pass ``tau_range=(trusted_tau_min(s_max), ...)``: closer to
    T(x0) the error in T(x0) itself dominates T - t.
    """
    a = 2.0 / (p - 1)
    tau, S = cone_sup_series(run, x0, T_x0)
    if tau_range is not None:
        m = (tau >= tau_range[0]) & (tau <= tau_range[1])
        tau, S = tau[m], S[m]
    m = tau < 1
    tau, S = tau[m], S[m]
    if tau.size < 5:
        return LawFit("blowup_speed", {}, {}, UNDECIDED, reason="too few resolved times")
    if np.log10(tau.max() / tau.min()) < 1:
        return LawFit("blowup_speed", {}, {}, UNDECIDED, reason="less than one decade resolved")
    R = S * tau ** a
    L = np.abs(np.log(tau))
    Q = R / L ** ((k - 1) / 2)
    ratio = float(Q.max() / Q.min())
    expo, c, rms, se = _linfit(np.log(L), np.log(R))
    ok = ratio <= band
    return LawFit("blowup_speed", {"Q_min": float(Q.min()), "Q_max": float(Q.max()), "log_exponent": expo},
                  {"rms": rms, "band_ratio": ratio}, "pass" if ok else "fail",
                  target={"log_exponent": (k - 1) / 2, "band": band}, tolerance=band,
                  inputs={"x0": x0, "T0": T_x0, "k": k, "tau_min": float(tau.min()), "tau_max": float(tau.max())},
                  series={"log_tau": np.log(tau), "scaled_sup": R, "band_quantity": Q})


def local_slope(curve: BlowupCurve, x0: float | None = None) -> tuple[float, float]:
    """Least-squares slope of T over the finite samples and its standard error."""
    ok = np.isfinite(curve.T)
    if ok.sum() < 3:
        raise FitError("too few curve samples for a slope")
    a, _, _, se = _linfit(curve.x[ok], curve.T[ok])
    return a, se


def slope_vs_profile(dec: DecompositionTrace, slope: float, slope_err: float = 0.0,
                     tail: int = 5, atol: float = 1e-3, residual_floor: float = 1e-2) -> LawFit:
    """Single-soliton fit: d(s) converges to T'(x0) and the residual decays exponentially.

    A residual that stays below ``residual_floor`` counts as decayed: it is
    then at the discretisation level and its trend carries no information.
    """
    if dec.k != 1:
        return LawFit("slope_vs_profile", {}, {}, UNDECIDED, reason=f"needs k = 1, got {dec.k}")
    d = dec.d_values[:, 0]
    s = dec.s_values
    res = dec.residual_norms
    ok = np.isfinite(d) & np.isfinite(res) & (res > 0)
    if ok.sum() < max(tail, 4):
        return LawFit("slope_vs_profile", {}, {}, UNDECIDED, reason="too few converged fits")
    dd = d[ok]
    z_end = float(np.arctanh(dd[-1]))
    z_spread = float(np.std(np.arctanh(dd[-tail:])))
    z_T = float(np.arctanh(np.clip(slope, -1 + 1e-15, 1 - 1e-15)))
    z_T_err = slope_err / max(1 - slope * slope, 1e-300)
    dev = abs(z_end - z_T)
    allowed = 2 * (z_spread + z_T_err) + atol
    a, b, rms, se = _linfit(s[ok], np.log(res[ok]))
    decays = a < 0 or float(np.max(res[ok])) <= residual_floor
    verdict = "pass" if (dev <= allowed and decays) else "fail"
    return LawFit("slope_vs_profile",
                  {"d_end": float(dd[-1]), "argth_d_end": z_end, "residual_log_slope": a},
                  {"argth_deviation": dev, "allowed": allowed, "rms_log_residual": rms},
                  verdict, target={"argth_slope": z_T}, tolerance=allowed,
                  series={"s": s[ok], "d": dd, "log_residual": np.log(res[ok])})
