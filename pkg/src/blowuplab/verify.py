"""Brute-force oracle suite: closed-form identities and inequalities of the
soliton calculus recomputed by independent quadrature or finite differences.

Every check returns a CheckReport made of items (name, deviation, tolerance).
The report's worst deviation is the largest deviation/tolerance ratio, so the
verdict is "pass" exactly when it is <= 1.  Empirical constants (C*, C(A),
...) are reported, not asserted.
"""
from __future__ import annotations

import csv
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
import scipy.integrate as sint
from scipy.special import beta as beta_fn

from .functionals import (dual_norm_H, energy, energy_kappa0, energy_kappa_star_closed, norm_H,
                          phi_with_dual, project, solve_dual_W1)
from .grid import FieldPair, ModelParams, build_grid, flat_chart_norm
from .modulation import (_fmt17, change_vars_inverse, jac_star_lambda, jac_star_lambda_inverse,
                         jac_zeta_eta)
from .solitons import (SolitonParam, dual_rhs_times, dual_W2_parts, eigen_F, kappa, kappa_star,
                       kappa_star_derivs, lambda_factor)

DEFAULT_D = (0.0, 0.3, -0.3, 0.6, -0.6, 0.9, -0.9)
DEFAULT_MU = (-0.9, -0.5, 0.0, 1.0, 3.0)


@dataclass
class CheckReport:
    check: str
    inputs: dict
    items: list = field(default_factory=list)       # dicts: name, deviation, tolerance
    constants: dict = field(default_factory=dict)
    tolerance: float = 1.0

    def add(self, name: str, deviation: float, tolerance: float, **extra) -> None:
        dev = float(deviation)
        self.items.append({"name": name, "deviation": dev if np.isfinite(dev) else float("inf"),
                           "tolerance": float(tolerance), **extra})

    @property
    def worst_deviation(self) -> float:
        if not self.items:
            return float("inf")
        return max(it["deviation"] / it["tolerance"] for it in self.items)

    @property
    def worst_item(self) -> str:
        if not self.items:
            return ""
        return max(self.items, key=lambda it: it["deviation"] / it["tolerance"])["name"]

    @property
    def verdict(self) -> str:
        return "pass" if self.worst_deviation <= self.tolerance else "fail"

    @property
    def passed(self) -> bool:
        return self.verdict == "pass"

    def to_dict(self) -> dict:
        return _fmt17({"check": self.check, "verdict": self.verdict,
                       "worst_deviation": self.worst_deviation, "worst_item": self.worst_item,
                       "tolerance": self.tolerance, "inputs": _listify(self.inputs),
                       "constants": _listify(self.constants), "items": _listify(self.items)})

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def _listify(obj):
    if isinstance(obj, dict):
        return {str(k): _listify(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [_listify(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    return obj


def mu_lattice(d_values=DEFAULT_D, mu_values=DEFAULT_MU) -> list:
    """(d, nu) with nu/(1-|d|) on the mu lattice."""
    return [(float(d), float(m * (1 - abs(d)))) for d in d_values for m in mu_values]


# ----------------------------------------------------------------------------
# Beta-function identity and the weighted inequality behind it


def _moment(alpha: float, weight=None) -> float:
    """int_{-1}^1 Y^2 (1-Y^2)^alpha w(Y) dY by adaptive quadrature with algebraic weight."""
    f = (lambda Y: Y * Y) if weight is None else (lambda Y: Y * Y * weight(Y))
    val, _ = sint.quad(f, -1.0, 1.0, weight="alg", wvar=(alpha, alpha), epsabs=0.0,
                       epsrel=1e-13, limit=400)
    return float(val)


def check_beta_identity(params: ModelParams, xd_values=None) -> CheckReport:
    p = params.p
    a = params.alpha
    xd = np.linspace(0.0, 0.99, 12) if xd_values is None else np.asarray(xd_values, float)
    rep = CheckReport("beta_identity", {"p": p, "xd": xd})
    num, den = _moment(a), _moment(a - 1)
    ratio = num / den
    rep.add("ratio_vs_4/(3p+1)", abs(ratio - 4 / (3 * p + 1)), 1e-10, value=ratio)
    rep.add("moment_vs_beta", abs(num - beta_fn(1.5, a + 1)), 1e-10)
    worst = -np.inf
    for t in xd:
        lhs = _moment(a, lambda Y, t=t: 1.0 / (1 - t * t * Y * Y))
        rhs = 4 / ((3 * p + 1) * (1 - t * t)) * den
        worst = max(worst, lhs - rhs)
    rep.add("weighted_inequality", max(worst, 0.0), 1e-12, max_lhs_minus_rhs=worst)
    rep.constants["ratio"] = ratio
    return rep


# ----------------------------------------------------------------------------
# orthogonality of the dual directions and the eigenfunctions


def check_orth(params: ModelParams, d_values=(0.0, 0.5, -0.5, 0.9, -0.9), n: int = 256) -> CheckReport:
    """phi(F_m(d), W_l(d)) = delta_ml, computed twice: weak form and solved W_{l,1}."""
    grid = build_grid(params, n)
    rep = CheckReport("orth", {"p": params.p, "d": list(d_values), "n": n})
    sup_norms = 0.0
    for d in d_values:
        for l in (0, 1):
            dual = solve_dual_W1(params, d, l, grid)
            sup_norms = max(sup_norms, dual_norm_H(grid, dual))
            for m in (0, 1):
                F = eigen_F(params, d, m, grid)
                target = 1.0 if m == l else 0.0
                rep.add(f"weak d={d} l={l} m={m}", abs(project(params, grid, d, l, F) - target), 1e-6)
                rep.add(f"dual d={d} l={l} m={m}", abs(phi_with_dual(grid, dual, F) - target), 1e-6)
    rep.constants["sup_norm_W"] = sup_norms
    return rep


def check_normw(params: ModelParams, d_values=(0.0, 0.5, -0.5, 0.9, -0.9, 0.97), n: int = 128,
                h: float = 1e-4) -> CheckReport:
    """Boundedness of ||W_l|| + (1-d^2)||d_d W_l|| + ||F_l|| in H, as an empirical constant."""
    grid = build_grid(params, n)
    rep = CheckReport("normw", {"p": params.p, "d": list(d_values), "n": n})
    vals = []
    for d in d_values:
        for l in (0, 1):
            W = solve_dual_W1(params, d, l, grid)
            Wp = solve_dual_W1(params, d + h, l, grid).pair()
            Wm = solve_dual_W1(params, d - h, l, grid).pair()
            dW = (Wp - Wm) / (2 * h)
            # the FD quotient is measured in the weak H norm of its components
            q = dual_norm_H(grid, W) + (1 - d * d) * norm_H(grid, dW) + norm_H(grid, eigen_F(params, d, l, grid))
            vals.append(q)
    vals = np.array(vals)
    rep.constants["C"] = float(vals.max())
    rep.add("finite", 0.0 if np.all(np.isfinite(vals)) else np.inf, 1.0)
    # boundedness as d -> 1: the last value may not exceed the d = 0 value by more than a factor 10
    rep.add("growth_to_edge", max(vals[-2:].max() / vals[:2].max() - 1, 0.0), 9.0)
    return rep


# ----------------------------------------------------------------------------
# energies


def check_kappa_energy(params: ModelParams, d_values=(0.0, 0.5, -0.5, 0.9, -0.9), n: int = 128) -> CheckReport:
    grid = build_grid(params, n)
    E0 = energy_kappa0(params)
    rep = CheckReport("kappa_energy", {"p": params.p, "d": list(d_values), "n": n})
    for d in d_values:
        k = kappa(params, d, grid)
        for sgn in (1, -1):
            E = energy(params, grid, FieldPair(sgn * k, np.zeros_like(k)))
            rep.add(f"E({'+' if sgn > 0 else '-'}kappa({d}))", abs(E - E0), 1e-8)
    rep.constants["E_kappa0"] = E0
    return rep


def _h12_norm(params: ModelParams, V: Callable, y_lo: float) -> float:
    """(int_{y_lo}^1 (V1^2 + V1'^2 (1-y^2) + V2^2) rho dy)^(1/2) by adaptive quadrature."""
    a = params.alpha

    def f(y):
        v1, v1y, v2 = V(y)
        return v1 * v1 + v1y * v1y * (1 - y * y) + v2 * v2

    # rho = (1-y^2)^a = (1-y)^a (1+y)^a; the (1-y)^a factor goes into the weight
    val, _ = sint.quad(lambda y: f(y) * (1 + y) ** a, y_lo, 1.0, weight="alg", wvar=(0.0, a),
                       epsabs=0.0, epsrel=1e-10, limit=400)
    return float(np.sqrt(max(val, 0.0)))


def _kstar_diff_fn(params: ModelParams, s1: SolitonParam, s2: SolitonParam):
    a, k0 = params.alpha, params.kappa0

    def comps(sp, y):
        G = (1 - sp.d ** 2) ** (a / 2)
        B = 1 + sp.nu + sp.d * y
        return (k0 * G * B ** (-a), -a * k0 * G * sp.d * B ** (-a - 1), -a * k0 * sp.nu * G * B ** (-a - 1))

    def V(y):
        u, v = comps(s1, y), comps(s2, y)
        return u[0] - v[0], u[1] - v[1], u[2] - v[2]
    return V


def check_lemA2(params: ModelParams, lattice=None, n: int = 160, A: float = 3.0,
                deltas=(1e-2, 1e-3), orbit_mu=(0.5, 1.0, 2.0)) -> CheckReport:
    """Energy of kappa*(d, nu): closed form vs quadrature, <= E(kappa0), the two-sided
    Lipschitz bounds on nearby pairs and monotonicity along heteroclinic orbits."""
    p = params.p
    grid = build_grid(params, n)
    lattice = mu_lattice() if lattice is None else lattice
    E0 = energy_kappa0(params)
    rep = CheckReport("lemA2", {"p": p, "n": n, "lattice": lattice, "A": A, "deltas": list(deltas)})
    worst_cf, worst_above = 0.0, -np.inf
    for d, nu in lattice:
        sp = SolitonParam(d, nu, p)
        Eq = energy(params, grid, kappa_star(params, sp, grid))
        Ec = energy_kappa_star_closed(params, sp)
        # the closed form is a difference of terms of size E0 lambda^(p+1): compare on that scale
        scale = max(1.0, sp.lam ** (p + 1), sp.lam ** 2)
        worst_cf = max(worst_cf, abs(Eq - Ec) / scale)
        worst_above = max(worst_above, Ec - E0)
    rep.add("closed_form_vs_quadrature", worst_cf, 1e-8)
    rep.add("below_E_kappa0", max(worst_above, 0.0), 1e-12, max_E_minus_E0=worst_above)
    sp0 = SolitonParam(0.0, 0.0, p)
    rep.add("equality_at_origin", abs(energy_kappa_star_closed(params, sp0) - E0), 1e-12)

    # Lipschitz estimate (upper) and its inverse on the half-line window (lower)
    ups, lows = {}, {}
    for delta in deltas:
        up, low = 0.0, 0.0
        for d, nu in lattice:
            mu = nu / (1 - abs(d))
            if not (-1 + 1 / A <= mu <= A) or abs(d) > 0.6:
                continue
            s1 = SolitonParam(d, nu, p)
            z2 = np.arctanh(d) + delta
            d2 = float(np.tanh(z2))
            nu2 = float((mu + delta) * (1 - abs(d2)))
            s2 = SolitonParam(d2, nu2, p)
            dist = abs(mu - nu2 / (1 - abs(d2))) + abs(np.arctanh(d) - np.arctanh(d2))
            diff = norm_H(grid, kappa_star(params, s1, grid) - kappa_star(params, s2, grid))
            ylo = float(np.tanh(np.arctanh(max(-s1.d_star, -s2.d_star)) + A))
            h12 = _h12_norm(params, _kstar_diff_fn(params, s1, s2), ylo)
            up = max(up, diff / dist)
            low = max(low, dist / h12 if h12 > 0 else np.inf)
        ups[delta], lows[delta] = up, low
    rep.constants["C_upper"] = {str(k): v for k, v in ups.items()}
    rep.constants["C_lower"] = {str(k): v for k, v in lows.items()}
    d0, d1 = deltas[0], deltas[-1]
    rep.add("upper_constant_stable", abs(ups[d1] / ups[d0] - 1), 0.5)
    rep.add("lower_constant_stable", abs(lows[d1] / lows[d0] - 1), 0.5)
    rep.add("constants_finite", 0.0 if np.isfinite(ups[d1]) and np.isfinite(lows[d1]) else np.inf, 1.0)

    # monotonicity of E along kappa*(d, mu e^s), mu > 0
    worst_inc = -np.inf
    for d in (0.0, 0.5, -0.8):
        for mu in orbit_mu:
            s = np.linspace(-8, 4, 200)
            E = [energy_kappa_star_closed(params, SolitonParam(d, float(mu * np.exp(t)), p)) for t in s]
            worst_inc = max(worst_inc, float(np.max(np.diff(E))))
    rep.add("orbit_nonincreasing", max(worst_inc, 0.0), 1e-12, max_increment=worst_inc)
    return rep


# ----------------------------------------------------------------------------
# projections of the derivatives of kappa*


def _diag_entries(params: ModelParams, grid, d: float, nu: float):
    sp = SolitonParam(d, nu, params.p)
    ds = sp.d_star
    kd, kn = kappa_star_derivs(params, sp, grid)
    return (project(params, grid, ds, 0, kn), project(params, grid, ds, 1, kn),
            project(params, grid, ds, 1, kd), project(params, grid, ds, 0, kd), ds)


def check_claim22(params: ModelParams, lattice=None, n: int = 192,
                  gaps=(4.0, 6.0, 8.0, 10.0)) -> CheckReport:
    """Diagonal sign brackets of the modulation matrix and decay of the cross terms."""
    p = params.p
    grid = build_grid(params, n)
    lattice = mu_lattice() if lattice is None else lattice
    rep = CheckReport("claim22", {"p": p, "n": n, "lattice": lattice, "gaps": list(gaps)})
    zero, C = 0.0, 1.0
    sign_viol = -np.inf
    for d, nu in lattice:
        p0n, p1n, p1d, p0d, ds = _diag_entries(params, grid, d, nu)
        om = 1 - ds * ds
        zero = max(zero, abs(p0n))
        a1, a2, a3 = p1n * om, p1d * om, p0d * om
        sign_viol = max(sign_viol, a1, a3)   # both must be strictly negative
        C = max(C, -1 / a1 if a1 < 0 else np.inf, -a1, abs(a2), -a3, -1 / a3 if a3 < 0 else np.inf)
    rep.add("pi0_dnu_zero", zero, 1e-6)
    rep.add("negative_brackets", 0.0 if sign_viol < 0 else np.inf, 1.0, max_bracket=sign_viol)
    rep.constants["C_star"] = C

    # cross terms for a two-soliton configuration at increasing centre gaps
    meas = []
    for g in gaps:
        zs = (-g / 2, g / 2)
        sps = [SolitonParam(float(-np.tanh(z)), 0.0, p) for z in zs]
        tot = 0.0
        for i in range(2):
            j = 1 - i
            kd, kn = kappa_star_derivs(params, sps[j], grid)
            for l in (0, 1):
                tot += (abs(project(params, grid, sps[i].d_star, l, kn))
                        + abs(project(params, grid, sps[i].d_star, l, kd))) * (1 - sps[j].d_star ** 2)
        meas.append(tot)
    meas = np.array(meas)
    g = np.asarray(gaps)
    J = np.exp(-g / (p - 1))
    rep.constants["cross_over_J"] = (meas / J).tolist()
    rep.add("cross_bounded_by_J", max(np.max(meas / J) - C * 10, 0.0), 1.0)
    # rate: log(meas/g) against g should have slope -2/(p-1)
    slope = np.polyfit(g, np.log(meas / g), 1)[0]
    rep.constants["cross_decay_rate"] = -slope
    rep.add("cross_decay_rate", abs(-slope - 2 / (p - 1)) / (2 / (p - 1)), 0.1)
    return rep


def check_claimA3(params: ModelParams, n: int = 160, lattice=None, seed: int = 0) -> CheckReport:
    """Equivalence of ||r||_H and the flat chart norm of (rbar_1, rhat_2)."""
    p = params.p
    grid = build_grid(params, n)
    lattice = mu_lattice() if lattice is None else lattice
    rng = np.random.default_rng(seed)
    ratios = []
    for d, nu in lattice:
        v = kappa_star(params, SolitonParam(d, nu, p), grid)
        ratios.append(flat_chart_norm(grid, v.q1, v.q2) / norm_H(grid, v))
    y = grid.nodes
    for _ in range(20):
        c = rng.normal(size=6)
        f1 = np.polynomial.chebyshev.chebval(y, c) * (1 - y * y) ** 0.25
        f2 = np.polynomial.chebyshev.chebval(y, rng.normal(size=6))
        v = FieldPair(f1, f2)
        ratios.append(flat_chart_norm(grid, v.q1, v.q2) / norm_H(grid, v))
    r = np.array(ratios)
    rep = CheckReport("claimA3", {"p": p, "n": n, "seed": seed, "samples": r.size})
    C0 = float(max(r.max(), 1 / r.min()))
    rep.constants.update({"ratio_min": float(r.min()), "ratio_max": float(r.max()), "C0": C0})
    rep.add("finite_positive", 0.0 if np.all(np.isfinite(r) & (r > 0)) else np.inf, 1.0)
    rep.add("equivalence_constant", C0, 10.0)
    return rep


def check_fani(params: ModelParams, d_values=DEFAULT_D, lattice=None) -> CheckReport:
    """Pointwise bounds (|W_l2| + |L W_l1 - W_l1|)(1-y^2)/kappa and
    (|d_nu kappa*| + |d_d kappa*|)(1-d*^2)/kappa(d*) on node lattices approaching y = +-1."""
    p = params.p
    lattice = mu_lattice() if lattice is None else lattice
    rep = CheckReport("fani", {"p": p, "d": list(d_values), "lattice": lattice})
    sups = {}
    for X in (8.0, 14.0):
        y = np.tanh(np.linspace(-X, X, 801))
        s1 = 0.0
        for d in d_values:
            kap = kappa(params, d, y)
            for l in (0, 1):
                W2 = dual_W2_parts(params, d, l, y)[0]
                R = dual_rhs_times(params, d, l, y)      # (1-y^2) (W_l1 - L W_l1)
                s1 = max(s1, float(np.max((np.abs(W2) * (1 - y * y) + np.abs(R)) / kap)))
        s2 = 0.0
        for d, nu in lattice:
            sp = SolitonParam(d, nu, p)
            kd, kn = kappa_star_derivs(params, sp, y)
            ks = kappa(params, sp.d_star, y)
            tot = np.abs(kd.q1) + np.abs(kd.q2) + np.abs(kn.q1) + np.abs(kn.q2)
            s2 = max(s2, float(np.max(tot * (1 - sp.d_star ** 2) / ks)))
        sups[X] = (s1, s2)
    rep.constants["C_fani"] = sups[14.0][0]
    rep.constants["C_bordev"] = sups[14.0][1]
    # bounded: pushing the lattice towards the edges does not increase the supremum
    rep.add("fani_bounded", abs(sups[14.0][0] / sups[8.0][0] - 1), 0.05)
    rep.add("bordev_bounded", abs(sups[14.0][1] / sups[8.0][1] - 1), 0.05)
    return rep


# ----------------------------------------------------------------------------
# interaction integral


def interaction_integral(params: ModelParams, alpha: float, beta: float, zi: float, zj: float) -> float:
    """int kappa(d_j)^alpha kappa(d_i)^beta (1-y^2)^((alpha+beta)/(p-1)-1) dy, d = -tanh(zeta),
    evaluated in xi = argth y where it reads int kbar0(xi-zj)^alpha kbar0(xi-zi)^beta dxi."""
    a = params.alpha
    k0 = params.kappa0

    def sech(t):
        e = np.exp(-abs(t))
        return 2 * e / (1 + e * e)

    def f(xi):
        return k0 ** (alpha + beta) * sech(xi - zj) ** (a * alpha) * sech(xi - zi) ** (a * beta)

    lo, hi = min(zi, zj), max(zi, zj)
    tot = 0.0
    edges = [-np.inf, lo, hi, np.inf] if hi > lo else [-np.inf, lo, np.inf]
    for u, v in zip(edges[:-1], edges[1:]):
        val, _ = sint.quad(f, u, v, epsabs=0.0, epsrel=1e-12, limit=400)
        tot += val
    return float(tot)


def check_lemE1(params: ModelParams, branches=((1.0, 1.0), (1.0, 2.0)), gaps=(6.0, 8.0, 10.0)) -> CheckReport:
    a = params.alpha
    rep = CheckReport("lemE1", {"p": params.p, "branches": [list(b) for b in branches], "gaps": list(gaps)})
    for al, be in branches:
        ratios = []
        for g in gaps:
            I = interaction_integral(params, al, be, -g / 2, g / 2)
            if al == be:
                ratios.append(I / (g * np.exp(-a * be * g)))
            else:
                ratios.append(I / np.exp(-a * min(al, be) * g))
        ratios = np.array(ratios)
        rep.constants[f"ratios_{al}_{be}"] = ratios.tolist()
        rep.add(f"stable alpha={al} beta={be}", abs(ratios[-1] / ratios[-2] - 1), 0.05)
    # continuity at zero gap: the interaction integral tends to the single-profile integral
    al, be = branches[0]
    single, _ = sint.quad(lambda y: kappa(params, 0.0, y) ** (al + be) * (1 - y * y) ** ((al + be) / (params.p - 1) - 1),
                          -1, 1, epsabs=0.0, epsrel=1e-12, limit=400)
    near = interaction_integral(params, al, be, -1e-7, 1e-7)
    rep.add("continuity_at_zero_gap", abs(near - single) / single, 1e-6)
    return rep


# ----------------------------------------------------------------------------
# Jacobians of the parameter changes


def _fd_jac(f, x, h=1e-6):
    x = np.asarray(x, float)
    cols = []
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        cols.append((np.asarray(f(x + e)) - np.asarray(f(x - e))) / (2 * h))
    return np.array(cols).T


def check_jacobians(params: ModelParams, lattice=None, A: float = 3.0, n_random: int = 30,
                    seed: int = 0) -> CheckReport:
    p = params.p
    rng = np.random.default_rng(seed)
    lattice = [(d, nu) for d, nu in (mu_lattice() if lattice is None else lattice)
               if -1 + 1 / A <= nu / (1 - abs(d)) <= A and -1 + 1 / A <= nu / (1 - d * d) <= A]
    for _ in range(n_random):
        d = float(rng.uniform(-0.95, 0.95))
        mu = float(rng.uniform(-1 + 1 / A, A))
        nu = mu * (1 - abs(d))
        if nu / (1 - d * d) <= A:
            lattice.append((d, nu))
    rep = CheckReport("jacobians", {"p": p, "A": A, "seed": seed, "lattice": lattice})

    def star_lam(v):
        d, nu = v
        return [-np.arctanh(d / (1 + nu)), lambda_factor(p, d, nu)]

    def d_nu(v):
        return list(change_vars_inverse(v[0], v[1]))

    fd1 = fd2 = ident = 0.0
    nrm = {"jac1_times_1-d2": 0.0, "jac_over_1-d2": 0.0, "inv_over_1-d2": 0.0}
    for d, nu in lattice:
        J1 = jac_star_lambda(p, d, nu)
        F1 = _fd_jac(star_lam, [d, nu])
        fd1 = max(fd1, float(np.max(np.abs(J1 - F1)) / np.max(np.abs(J1))))
        zeta, eta = -np.arctanh(d), nu / (1 - d * d)
        J2 = jac_zeta_eta(d, nu)
        F2 = _fd_jac(d_nu, [zeta, eta])
        fd2 = max(fd2, float(np.max(np.abs(J2 - F2)) / np.max(np.abs(J2))))
        Ji = jac_star_lambda_inverse(p, d, nu)
        ident = max(ident, float(np.max(np.abs(J1 @ Ji - np.eye(2)))))
        om = 1 - d * d
        nrm["jac1_times_1-d2"] = max(nrm["jac1_times_1-d2"], np.linalg.norm(J1, 2) * om)
        nrm["jac_over_1-d2"] = max(nrm["jac_over_1-d2"], np.linalg.norm(J2, 2) / om)
        nrm["inv_over_1-d2"] = max(nrm["inv_over_1-d2"], np.linalg.norm(Ji, 2) / om)
    rep.add("fd_star_lambda", fd1, 1e-5)
    rep.add("fd_zeta_eta", fd2, 1e-5)
    rep.add("product_identity", ident, 1e-10)
    rep.add("origin_diag", float(np.max(np.abs(jac_zeta_eta(0.0, 0.0) - np.diag([-1.0, 1.0])))), 1e-15)
    rep.constants.update({k: float(v) for k, v in nrm.items()})
    rep.add("normalized_bounded", 0.0 if all(np.isfinite(v) for v in nrm.values()) else np.inf, 1.0)
    return rep


# ----------------------------------------------------------------------------
# suite


CHECKS = {
    "beta_identity": check_beta_identity,
    "orth": check_orth,
    "normw": check_normw,
    "kappa_energy": check_kappa_energy,
    "lemA2": check_lemA2,
    "claim22": check_claim22,
    "claimA3": check_claimA3,
    "fani": check_fani,
    "lemE1": check_lemE1,
    "jacobians": check_jacobians,
}


def run_suite(params: ModelParams, names=None, threads: int = 1, seed: int = 0) -> list:
    """Run the named checks (all by default), in parallel if ``threads > 1``; order follows CHECKS."""
    names = list(CHECKS) if names is None else list(names)
    unknown = [n for n in names if n not in CHECKS]
    if unknown:
        raise KeyError(f"unknown checks: {unknown}")

    def one(name):
        fn = CHECKS[name]
        if name in ("claimA3", "jacobians"):
            return fn(params, seed=seed)
        return fn(params)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            reports = list(ex.map(one, names))
    else:
        reports = [one(n) for n in names]
    return reports


def write_reports(reports: list, directory) -> list[Path]:
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for r in reports:
        path = out / f"{r.check}.json"
        path.write_text(r.to_json())
        paths.append(path)
    summary = out / "summary.csv"
    with open(summary, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["check", "verdict", "worst_deviation", "worst_item"])
        for r in reports:
            wr.writerow([r.check, r.verdict, f"{r.worst_deviation:.17g}", r.worst_item])
    paths.append(summary)
    return paths
