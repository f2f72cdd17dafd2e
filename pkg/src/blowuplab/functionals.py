"""Energy-space machinery: norms, the pairing phi, the energy, projections on
the dual directions W_l(d), and the linearised operators around solitons.

Projections use the weak form

    pi_l^d(r) = phi(W_l(d), r) = int (RHS_l r_1 + W_{l,2} r_2) rho dy,

where RHS_l = (-L + 1) W_{l,1} is known in closed form.  This needs no W_{l,1}
at all.  ``solve_dual_W1`` computes W_{l,1} independently, in the xi chart,
and is used to cross-check the weak form against the gradient form of phi.
"""
from __future__ import annotations

import threading
from dataclasses import dataclass, field

import numpy as np

from .errors import NumericError
from .grid import FieldPair, ModelParams, WeightedGrid, check_aligned, derivative, integrate
from .solitons import (SolitonParam, SolitonSum, _check_d, dual_rhs_times, dual_W2_parts,
                       kappa, kappa_star, lambda_factor)


# ----------------------------------------------------------------------------
# norms and pairings


def _pair(grid: WeightedGrid, v: FieldPair) -> FieldPair:
    check_aligned(grid, v.q1)
    check_aligned(grid, v.q2)
    return v


def norm_H0(grid: WeightedGrid, f) -> float:
    f = check_aligned(grid, f)
    df = derivative(grid, f)
    val = integrate(grid, f * f, "rho") + integrate(grid, df * df, "rho_times")
    return float(np.sqrt(max(val, 0.0)))


def norm_H(grid: WeightedGrid, v: FieldPair) -> float:
    _pair(grid, v)
    return float(np.sqrt(phi(grid, v, v)))


def phi(grid: WeightedGrid, q: FieldPair, r: FieldPair) -> float:
    """Gradient form of the pairing: int (q1 r1 + q1' r1' (1-y^2) + q2 r2) rho."""
    _pair(grid, q)
    _pair(grid, r)
    dq, dr = derivative(grid, q.q1), derivative(grid, r.q1)
    return (integrate(grid, q.q1 * r.q1 + q.q2 * r.q2, "rho")
            + integrate(grid, dq * dr, "rho_times"))


def apply_L(grid: WeightedGrid, f) -> np.ndarray:
    """L f = rho^-1 (rho (1-y^2) f')' = (1-y^2) f'' - 2(1+a) y f'."""
    f = check_aligned(grid, f)
    a = grid.params.alpha
    df = derivative(grid, f)
    return grid.one_minus_y2 * derivative(grid, df) - 2 * (1 + a) * grid.nodes * df


def phi_weak(grid: WeightedGrid, q: FieldPair, r: FieldPair) -> float:
    """Second form of the pairing: int (q1 (-L r1 + r1) + q2 r2) rho."""
    Lr = apply_L(grid, r.q1)
    return integrate(grid, q.q1 * (r.q1 - Lr) + q.q2 * r.q2, "rho")


def energy(params: ModelParams, grid: WeightedGrid, v: FieldPair) -> float:
    _pair(grid, v)
    p = params.p
    V1, V2 = v.q1, v.q2
    dV = derivative(grid, V1)
    dens = 0.5 * V2 ** 2 + 0.5 * params.psi_shift * V1 ** 2 - np.abs(V1) ** (p + 1) / (p + 1)
    return integrate(grid, dens, "rho") + 0.5 * integrate(grid, dV ** 2, "rho_times")


def energy_kappa0(params: ModelParams) -> float:
    """E(kappa0) = (p-1)/(2(p+1)) kappa0^(p+1) int rho."""
    from .grid import rho_mass
    p = params.p
    return (p - 1) / (2 * (p + 1)) * params.kappa0 ** (p + 1) * rho_mass(params)


def energy_kappa_star_closed(params: ModelParams, sp: SolitonParam) -> float:
    p = params.p
    lam = lambda_factor(p, sp.d, sp.nu)
    return energy_kappa0(params) * ((p + 1) / (p - 1) * lam ** 2 - 2 / (p - 1) * lam ** (p + 1)
                                    + 2 / (p - 1) * sp.nu ** 2 / (1 - sp.d ** 2) * lam ** (p + 1))


# ----------------------------------------------------------------------------
# projections on the dual directions


def project(params: ModelParams, grid: WeightedGrid, d: float, l: int, r: FieldPair) -> float:
    """pi_l^d(r) = phi(W_l(d), r) through the weak form."""
    _pair(grid, r)
    R = dual_rhs_times(params, d, l, grid.nodes)
    W2 = dual_W2_parts(params, d, l, grid.nodes)[0]
    return integrate(grid, R * r.q1, "rho_over") + integrate(grid, W2 * r.q2, "rho")


def project_dd(params: ModelParams, grid: WeightedGrid, d: float, l: int, r: FieldPair) -> float:
    """phi(d_d W_l(d), r): the derivative of pi_l^d(r) in d with r held fixed."""
    _pair(grid, r)
    _, Rd = dual_rhs_times(params, d, l, grid.nodes, with_d=True)
    W2d = dual_W2_parts(params, d, l, grid.nodes)[2]
    return integrate(grid, Rd * r.q1, "rho_over") + integrate(grid, W2d * r.q2, "rho")


# ----------------------------------------------------------------------------
# W_{l,1} in the xi chart


def _fourier_matrices(M: int, half_width: float):
    """Periodic spectral first/second derivative matrices on M equispaced points."""
    h = 2 * np.pi / M
    j = np.arange(1, M)
    col1 = np.zeros(M)
    col1[1:] = 0.5 * (-1.0) ** j / np.tan(j * h / 2)
    col2 = np.empty(M)
    col2[0] = -np.pi ** 2 / (3 * h ** 2) - 1.0 / 6
    col2[1:] = -0.5 * (-1.0) ** j / np.sin(j * h / 2) ** 2
    idx = (np.arange(M)[:, None] - np.arange(M)[None, :]) % M
    D1 = col1[idx]
    D2 = col2[idx]
    # columns built for d/dtheta on [0, 2pi); rescale to a period of 2*half_width
    sc = np.pi / half_width
    return D1 * sc, D2 * sc * sc


def _trig_eval(values: np.ndarray, half_width: float, x: np.ndarray):
    """Evaluate the trigonometric interpolant (and its derivative) at x."""
    M = values.size
    c = np.fft.fft(values) / M
    k = np.fft.fftfreq(M, d=1.0 / M)
    if M % 2 == 0:
        # split the Nyquist mode symmetrically so the interpolant is real
        c = np.concatenate([c, [c[M // 2] / 2]])
        c[M // 2] /= 2
        k = np.concatenate([k, [M // 2]])
        k[M // 2] = -M // 2
    w = np.pi / half_width
    ph = np.exp(1j * w * np.outer(x + half_width, k))
    val = (ph @ c).real
    der = (ph @ (1j * w * k * c)).real
    return val, der


@dataclass(frozen=True, eq=False)
class DualDirection:
    d: float
    l: int
    W1: np.ndarray          # at grid nodes
    W1_y: np.ndarray
    W2: np.ndarray
    xi: np.ndarray          # uniform chart points
    rbar: np.ndarray        # W1 (1-y^2)^(1/(p-1)) on xi
    rbar_xi: np.ndarray
    residual: float
    half_width: float
    p: float
    norm_W1_H0: float = field(default=np.nan)

    def pair(self) -> FieldPair:
        return FieldPair(self.W1, self.W2)


_DUAL_CACHE: dict = {}
_DUAL_LOCK = threading.Lock()


def solve_dual_W1(params: ModelParams, d: float, l: int, grid: WeightedGrid,
                  half_width: float | None = None, h: float = 0.08) -> DualDirection:
    """Solve -L r + r = RHS_l for W_{l,1} in the chart xi = argth y.

    With rbar = r cosh(xi)^(-a) the equation becomes

        -rbar'' + (a^2 - (a^2 + a - 1) sech^2 xi) rbar = sech^a(xi) (1-y^2) RHS_l,

    a uniformly elliptic problem on the line with a positive potential.  It is
    discretised by Fourier collocation on [-X, X] where rbar is below e^-30.
    """
    _check_d(d)
    a = params.alpha
    if half_width is None:
        half_width = 30.0 * max(1.0, 1.0 / a) + abs(np.arctanh(d))
    key = (params.p, float(d), int(l), id(grid), float(half_width), float(h))
    with _DUAL_LOCK:
        hit = _DUAL_CACHE.get(key)
    if hit is not None and hit[0] is grid:
        return hit[1]

    M = int(np.ceil(2 * half_width / h / 2)) * 2
    xi = -half_width + 2 * half_width * np.arange(M) / M
    sech2 = 1.0 / np.cosh(xi) ** 2
    D1, D2 = _fourier_matrices(M, half_width)
    A = -D2 + np.diag(a * a - (a * a + a - 1) * sech2)
    b = sech2 ** (a / 2) * dual_rhs_times(params, d, l, np.tanh(xi))
    try:
        rbar = np.linalg.solve(A, b)
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"dual solve failed: {exc}", condition=np.linalg.cond(A)) from exc
    res = float(np.max(np.abs(A @ rbar - b)))
    if not np.all(np.isfinite(rbar)):
        raise NumericError("dual solve produced non-finite values", condition=np.linalg.cond(A))
    rbar_xi = D1 @ rbar
    # H0 norm in the chart: int (rbar_xi + a tanh rbar)^2 + sech^2 rbar^2 dxi
    dx = 2 * half_width / M
    n0 = np.sqrt(dx * np.sum((rbar_xi + a * np.tanh(xi) * rbar) ** 2 + sech2 * rbar ** 2))

    xj = grid.xi_nodes
    rb, rbx = _trig_eval(rbar, half_width, xj)
    ch = np.cosh(xj)
    W1 = rb * ch ** a
    W1_y = ch ** (2 + a) * (rbx + a * np.tanh(xj) * rb)
    W2 = dual_W2_parts(params, d, l, grid.nodes)[0]
    out = DualDirection(d=float(d), l=int(l), W1=W1, W1_y=W1_y, W2=W2, xi=xi, rbar=rbar,
                        rbar_xi=rbar_xi, residual=res, half_width=half_width, p=params.p,
                        norm_W1_H0=float(n0))
    with _DUAL_LOCK:
        if len(_DUAL_CACHE) > 256:
            _DUAL_CACHE.clear()
        _DUAL_CACHE[key] = (grid, out)
    return out


def dual_norm_H(grid: WeightedGrid, dual: DualDirection) -> float:
    return float(np.sqrt(dual.norm_W1_H0 ** 2 + integrate(grid, dual.W2 ** 2, "rho")))


def phi_with_dual(grid: WeightedGrid, dual: DualDirection, r: FieldPair) -> float:
    """phi(W_l(d), r) in gradient form, using the solved W_{l,1}."""
    _pair(grid, r)
    dr = derivative(grid, r.q1)
    # W1' (1-y^2) is bounded even where W1 has a logarithmic singularity
    return (integrate(grid, dual.W1 * r.q1 + dual.W2 * r.q2, "rho")
            + integrate(grid, dual.W1_y * grid.one_minus_y2 * dr, "rho"))


# ----------------------------------------------------------------------------
# linearised operators, A_-, Lyapunov diagnostics


def psi_star(params: ModelParams, d: float, grid: WeightedGrid) -> np.ndarray:
    return params.p * kappa(params, d, grid) ** (params.p - 1) - params.psi_shift


def linearized_apply(params: ModelParams, grid: WeightedGrid, d: float, v: FieldPair) -> FieldPair:
    """L_d(q1, q2) = (q2, L q1 + psi*(d) q1 - (p+3)/(p-1) q2 - 2y q2')."""
    _pair(grid, v)
    a = params.alpha
    second = (apply_L(grid, v.q1) + psi_star(params, d, grid) * v.q1
              - (1 + 2 * a) * v.q2 - 2 * grid.nodes * derivative(grid, v.q2))
    return FieldPair(v.q2.copy(), second)


def _K1(params: ModelParams, grid: WeightedGrid, ssum: SolitonSum) -> np.ndarray:
    K = np.zeros(grid.n)
    for s, sp in ssum.terms:
        K += s * kappa_star(params, sp, grid).q1
    return K


def quadratic_form_varphi(params: ModelParams, grid: WeightedGrid, ssum: SolitonSum,
                          q: FieldPair, r: FieldPair | None = None) -> float:
    """varphi(q, r) = int (q1' r1' (1-y^2) - psi q1 r1 + q2 r2) rho, psi built on K*_1."""
    if r is None:
        r = q
    _pair(grid, q)
    _pair(grid, r)
    K = _K1(params, grid, ssum)
    psi = params.p * np.abs(K) ** (params.p - 1) - params.psi_shift
    dq, dr = derivative(grid, q.q1), derivative(grid, r.q1)
    return (integrate(grid, dq * dr, "rho_times")
            + integrate(grid, -psi * q.q1 * r.q1 + q.q2 * r.q2, "rho"))


def nonlinear_remainder(params: ModelParams, K: np.ndarray, q1: np.ndarray) -> np.ndarray:
    """F(q1) = |K+q1|^(p+1)/(p+1) - |K|^(p+1)/(p+1) - |K|^(p-1) K q1 - p/2 |K|^(p-1) q1^2."""
    p = params.p
    aK = np.abs(K)
    return (np.abs(K + q1) ** (p + 1) / (p + 1) - aK ** (p + 1) / (p + 1)
            - aK ** (p - 1) * K * q1 - 0.5 * p * aK ** (p - 1) * q1 ** 2)


def lyapunov_diagnostics(params: ModelParams, grid: WeightedGrid, ssum: SolitonSum,
                         q: FieldPair, eta: float) -> tuple[float, float, float]:
    """(h1, h2, R_-) for the residual q around the soliton sum."""
    _pair(grid, q)
    K = _K1(params, grid, ssum)
    intF = integrate(grid, nonlinear_remainder(params, K, q.q1), "rho")
    h1 = 0.5 * phi(grid, q, q) - intF
    h2 = (0.5 * quadratic_form_varphi(params, grid, ssum, q) - intF
          + eta * integrate(grid, q.q1 * q.q2, "rho"))
    return float(h1), float(h2), float(-intF)


def hardy_sobolev_terms(grid: WeightedGrid, h) -> tuple[float, float, float]:
    """(||h||_{L^2(rho/(1-y^2))}, sup |h| (1-y^2)^(1/(p-1)), ||h||_{H0})."""
    h = check_aligned(grid, h)
    l2 = np.sqrt(integrate(grid, h * h, "rho_over"))
    sup = float(np.max(np.abs(h) * grid.one_minus_y2 ** (1 / (grid.p - 1))))
    return float(l2), sup, norm_H0(grid, h)
