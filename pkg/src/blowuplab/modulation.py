"""Fit signed sums of generalized solitons by Newton iteration on the 2m
orthogonality conditions pi_l^{d_i*}(q) = 0, l = 0, 1.

Unknowns are (zeta_i, eta_i) = (-argth d_i, nu_i/(1-d_i^2)); the Jacobian is
assembled from the closed-form derivatives of kappa* and of W_l.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DomainError, FitError, ParameterError, RegionError
from .functionals import norm_H, project, project_dd
from .grid import FieldPair, ModelParams, WeightedGrid
from .solitons import SolitonParam, SolitonSum, kappa_star, kappa_star_derivs


# ----------------------------------------------------------------------------
# changes of variables


def change_vars(d: float, nu: float) -> tuple[float, float]:
    if abs(d) >= 1:
        raise ParameterError(f"|d| must be < 1, got {d}")
    return float(-np.arctanh(d)), float(nu / (1 - d * d))


def change_vars_inverse(zeta: float, eta: float) -> tuple[float, float]:
    t = np.tanh(zeta)
    return float(-t), float(eta * (1 - t * t))


def jac_zeta_eta(d: float, nu: float) -> np.ndarray:
    """Jacobian of (d, nu) with respect to (zeta, eta); rows d, nu."""
    om = 1 - d * d
    return om * np.array([[-1.0, 0.0], [2 * nu * d / om, 1.0]])


def jac_star_lambda(p: float, d: float, nu: float) -> np.ndarray:
    """Jacobian of (zeta*, lambda) with respect to (d, nu)."""
    from .solitons import lambda_factor
    lam = lambda_factor(p, d, nu)
    D = (1 + nu) ** 2 - d * d
    return np.array([
        [-(1 + nu), d],
        [2 * d * lam ** (2 - p) * (1 - (1 + nu) ** 2) / ((p - 1) * D),
         -2 * (1 + nu) * lam ** (2 - p) * (1 - d * d) / ((p - 1) * D)],
    ]) / D


def jac_star_lambda_inverse(p: float, d: float, nu: float) -> np.ndarray:
    from .solitons import lambda_factor
    lam = lambda_factor(p, d, nu)
    D = (1 + nu) ** 2 - d * d
    return -np.array([
        [(1 + nu) * (1 - d * d), d * lam ** (p - 2) * (p - 1) / 2 * D],
        [d * (1 - (1 + nu) ** 2), (1 + nu) * lam ** (p - 2) * (p - 1) / 2 * D],
    ])


def dstar_derivs(d: float, nu: float) -> tuple[float, float]:
    """(d d*/d zeta, d d*/d eta) for d* = d/(1+nu)."""
    J = jac_zeta_eta(d, nu)
    g = np.array([1 / (1 + nu), -d / (1 + nu) ** 2])
    return float(g @ J[:, 0]), float(g @ J[:, 1])


def kappa_star_zeta_eta(params: ModelParams, sp: SolitonParam, where) -> tuple[FieldPair, FieldPair]:
    """(d_zeta kappa*, d_eta kappa*) by the chain rule through (jac)."""
    kd, kn = kappa_star_derivs(params, sp, where)
    J = jac_zeta_eta(sp.d, sp.nu)
    return kd * J[0, 0] + kn * J[1, 0], kd * J[0, 1] + kn * J[1, 1]


# ----------------------------------------------------------------------------
# fit results


@dataclass
class FitConfig:
    newton_tol: float = 1e-10
    max_iter: int = 50
    damping: float = 1.0
    A_bound: float = 10.0
    E_gap_min: float = 0.25

    def __post_init__(self):
        if self.newton_tol <= 0 or self.max_iter < 0 or not 0 < self.damping <= 1:
            raise ParameterError("invalid fit configuration")
        if self.A_bound < 1:
            raise ParameterError("A_bound must be >= 1")


@dataclass
class ModulationFit:
    params: list
    theta1: int
    residual: FieldPair
    residual_norm: float
    projections: np.ndarray
    J_m: float
    iterations: int
    converged: bool
    history: list = field(default_factory=list)

    @property
    def m(self) -> int:
        return len(self.params)

    @property
    def zeta_star(self) -> np.ndarray:
        return np.array([sp.zeta_star for sp in self.params])

    @property
    def soliton_sum(self) -> SolitonSum:
        return SolitonSum(tuple(self.params), self.theta1)

    def to_dict(self) -> dict:
        return {
            "m": self.m,
            "theta1": self.theta1,
            "params": [sp.as_dict() for sp in self.params],
            "residual_norm": self.residual_norm,
            "projections": [float(x) for x in self.projections],
            "J_m": self.J_m,
            "iterations": self.iterations,
            "converged": self.converged,
        }

    def to_json(self) -> str:
        return json.dumps(_fmt17(self.to_dict()), indent=2)


def _fmt17(obj):
    # fixed 17-digit floats so repeated runs give byte-identical files
    if isinstance(obj, float):
        return float(f"{obj:.17g}")
    if isinstance(obj, dict):
        return {k: _fmt17(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_fmt17(v) for v in obj]
    return obj


def coupling_from_zetas(zetas: Sequence[float], p: float) -> float:
    z = np.asarray(zetas, dtype=float)
    if z.size < 2:
        return 0.0
    return float(np.sum(np.exp(-np.diff(z) / (p - 1))))


def coupling_J(fit: ModulationFit) -> float:
    if not fit.params:
        return 0.0
    return coupling_from_zetas(fit.zeta_star, fit.params[0].p)


def vanishing_check(sp: SolitonParam, L: float) -> bool:
    return bool(sp.lam <= np.exp(-L / (sp.p - 1)))


# ----------------------------------------------------------------------------
# Newton solve


def _signs(m: int, theta1: int) -> np.ndarray:
    return np.array([theta1 * (-1) ** i for i in range(m)], dtype=float)


def residual_of(params: ModelParams, grid: WeightedGrid, v: FieldPair,
                sps: Sequence[SolitonParam], theta1: int) -> FieldPair:
    q = v
    for s, sp in zip(_signs(len(sps), theta1), sps):
        q = q - s * kappa_star(params, sp, grid)
    return q


def projections_of(params: ModelParams, grid: WeightedGrid, q: FieldPair,
                   sps: Sequence[SolitonParam]) -> np.ndarray:
    out = []
    for sp in sps:
        ds = sp.d_star
        out.append(project(params, grid, ds, 1, q))
        out.append(project(params, grid, ds, 0, q))
    return np.array(out)


def assemble_jacobian(params: ModelParams, grid: WeightedGrid, sps: Sequence[SolitonParam],
                      q: FieldPair, theta1: int = -1) -> np.ndarray:
    """d Psi / d(zeta_j, eta_j), rows ordered (pi_1, pi_0) per soliton."""
    m = len(sps)
    signs = _signs(m, theta1)
    M = np.zeros((2 * m, 2 * m))
    dz = [kappa_star_zeta_eta(params, sp, grid) for sp in sps]
    for i, spi in enumerate(sps):
        di = spi.d_star
        for r, l in enumerate((1, 0)):
            row = 2 * i + r
            for j in range(m):
                kz, ke = dz[j]
                M[row, 2 * j] = -signs[j] * project(params, grid, di, l, kz)
                M[row, 2 * j + 1] = -signs[j] * project(params, grid, di, l, ke)
            gz, ge = dstar_derivs(spi.d, spi.nu)
            corr = project_dd(params, grid, di, l, q)
            M[row, 2 * i] += gz * corr
            M[row, 2 * i + 1] += ge * corr
    return M


def _admissible(sps, cfg: FitConfig) -> str | None:
    A = cfg.A_bound
    for sp in sps:
        mu = sp.mu_ratio
        if not (-1 + 1 / (2 * A) <= mu <= A + 1):
            return f"nu/(1-|d|) = {mu:.4g} outside [-1+1/(2A), A+1]"
    z = [sp.zeta_star for sp in sps]
    gaps = np.diff(z)
    if gaps.size and gaps.min() < cfg.E_gap_min:
        return f"soliton centres too close (minimal gap {gaps.min():.4g})"
    return None


def _params_from_theta(theta: np.ndarray, p: float):
    out = []
    for i in range(theta.size // 2):
        out.append(SolitonParam.from_zeta_eta(theta[2 * i], theta[2 * i + 1], p))
    return out


def _theta_from_params(sps) -> np.ndarray:
    th = []
    for sp in sps:
        th.extend(change_vars(sp.d, sp.nu))
    return np.array(th)


def fit(params: ModelParams, grid: WeightedGrid, v: FieldPair, m: int,
        init: Sequence[SolitonParam], cfg: FitConfig | None = None,
        theta1: int = -1) -> ModulationFit:
    """Newton solve of the orthogonality conditions starting from ``init``."""
    cfg = cfg or FitConfig()
    if len(init) != m:
        raise ParameterError(f"need {m} initial parameters, got {len(init)}")
    sps = sorted(init, key=lambda sp: sp.zeta_star)
    why = _admissible(sps, cfg)
    if why:
        raise RegionError(f"initial guess not admissible: {why}")
    theta = _theta_from_params(sps)
    q = residual_of(params, grid, v, sps, theta1)
    F = projections_of(params, grid, q, sps)
    err = float(np.max(np.abs(F)))
    history = [err]
    it = 0
    while err > cfg.newton_tol and it < cfg.max_iter:
        J = assemble_jacobian(params, grid, sps, q, theta1)
        try:
            step = -np.linalg.solve(J, F)
        except np.linalg.LinAlgError:
            gap = float(np.min(np.diff([sp.zeta_star for sp in sps]))) if m > 1 else None
            raise FitError("singular modulation Jacobian", best=sps, min_gap=gap)
        t = cfg.damping
        accepted = False
        last_reason = None
        for _ in range(40):
            try:
                cand = _params_from_theta(theta + t * step, params.p)
            except (DomainError, ParameterError) as exc:
                last_reason = str(exc)
                t *= 0.5
                continue
            why = _admissible(cand, cfg)
            if why is None and all(a.zeta_star < b.zeta_star for a, b in zip(cand, cand[1:])):
                qc = residual_of(params, grid, v, cand, theta1)
                Fc = projections_of(params, grid, qc, cand)
                ec = float(np.max(np.abs(Fc)))
                if np.isfinite(ec) and (ec < err or ec <= cfg.newton_tol or t < 1e-3):
                    accepted = True
                    break
            last_reason = why or "step does not decrease the projections"
            t *= 0.5
        if not accepted:
            if last_reason and "close" in last_reason:
                raise RegionError(f"fit left the admissible region: {last_reason}")
            raise FitError(f"line search failed: {last_reason}", best=sps)
        theta = theta + t * step
        sps, q, F, err = cand, qc, Fc, ec
        it += 1
        history.append(err)
    res = ModulationFit(params=list(sps), theta1=theta1, residual=q,
                        residual_norm=norm_H(grid, q), projections=F,
                        J_m=coupling_from_zetas([sp.zeta_star for sp in sps], params.p),
                        iterations=it, converged=err <= cfg.newton_tol, history=history)
    if not res.converged:
        raise FitError(f"no convergence after {it} iterations (max |pi| = {err:.3g})", best=res)
    return res


def fit_from_json(text: str, p: float) -> list[SolitonParam]:
    """Initial parameters from a JSON list of {d, nu} objects (or {"params": [...]})."""
    data = json.loads(text)
    if isinstance(data, dict):
        data = data.get("params", [])
    return [SolitonParam(float(e["d"]), float(e.get("nu", 0.0)), p) for e in data]
