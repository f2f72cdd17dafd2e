"""Quadrature grids on (-1, 1) for the weight rho(y) = (1 - y^2)^(2/(p-1)).

The nodes are Gauss-Jacobi points for the weight (1 - y^2)^(alpha - 1) with
alpha = 2/(p-1).  With that choice the Hardy-type integrals against
rho/(1-y^2) are plain Gauss sums, and the rho and rho*(1-y^2) weights follow
by multiplying with the analytic factor (1 - y_j^2) at the nodes.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np
from scipy.special import beta as beta_fn
from scipy.special import roots_jacobi, roots_legendre

from .errors import ConfigurationError, ParameterError, ShapeError

WEIGHT_KINDS = ("rho", "rho_over", "rho_times")


@dataclass(frozen=True)
class ModelParams:
    p: float

    def __post_init__(self):
        if not np.isfinite(self.p) or self.p <= 1:
            raise ParameterError(f"exponent p must be > 1, got {self.p}")

    @property
    def alpha(self) -> float:
        """2/(p-1), the exponent of the weight rho."""
        return 2.0 / (self.p - 1.0)

    @property
    def kappa0(self) -> float:
        p = self.p
        return (2.0 * (p + 1.0) / (p - 1.0) ** 2) ** (1.0 / (p - 1.0))

    @property
    def psi_shift(self) -> float:
        # 2(p+1)/(p-1)^2, the constant appearing in the linear part of eqw
        return 2.0 * (self.p + 1.0) / (self.p - 1.0) ** 2


def rho(params: ModelParams, y):
    return (1.0 - np.asarray(y) ** 2) ** params.alpha


def rho_mass(params: ModelParams) -> float:
    """Closed form of int_{-1}^{1} rho dy = B(1/2, alpha + 1)."""
    return float(beta_fn(0.5, params.alpha + 1.0))


def _barycentric_weights(x: np.ndarray) -> np.ndarray:
    # products over n ~ 1000 nodes under/overflow, so work with logs
    diff = x[:, None] - x[None, :]
    np.fill_diagonal(diff, 1.0)
    logabs = np.log(np.abs(diff)).sum(axis=1)
    sign = np.prod(np.sign(diff), axis=1)
    logw = -logabs
    return sign * np.exp(logw - logw.max())


@dataclass(frozen=True, eq=False)
class WeightedGrid:
    nodes: np.ndarray
    weights_rho: np.ndarray
    weights_rho_over: np.ndarray
    weights_rho_times: np.ndarray
    p: float
    label: str = field(default="jacobi")

    @property
    def n(self) -> int:
        return self.nodes.size

    @property
    def params(self) -> ModelParams:
        return ModelParams(self.p)

    @cached_property
    def xi_nodes(self) -> np.ndarray:
        return np.arctanh(self.nodes)

    @cached_property
    def one_minus_y2(self) -> np.ndarray:
        y = self.nodes
        return (1.0 - y) * (1.0 + y)

    @cached_property
    def bary_weights(self) -> np.ndarray:
        return _barycentric_weights(self.nodes)

    @cached_property
    def diff_matrix(self) -> np.ndarray:
        x, w = self.nodes, self.bary_weights
        dx = x[:, None] - x[None, :]
        np.fill_diagonal(dx, 1.0)
        D = (w[None, :] / w[:, None]) / dx
        np.fill_diagonal(D, 0.0)
        np.fill_diagonal(D, -D.sum(axis=1))
        return D

    def interpolate(self, f, y_new) -> np.ndarray:
        """Barycentric interpolation of node values ``f`` at points ``y_new``."""
        f = check_aligned(self, f)
        y_new = np.atleast_1d(np.asarray(y_new, dtype=float))
        x, w = self.nodes, self.bary_weights
        diff = y_new[:, None] - x[None, :]
        exact = diff == 0.0
        diff[exact] = 1.0
        c = w[None, :] / diff
        out = (c @ f) / c.sum(axis=1)
        hit = exact.any(axis=1)
        if hit.any():
            out[hit] = f[np.argmax(exact[hit], axis=1)]
        return out


def check_aligned(grid: WeightedGrid, f) -> np.ndarray:
    f = np.asarray(f, dtype=float)
    if f.ndim == 0:
        f = np.full(grid.n, float(f))
    if f.shape != (grid.n,):
        raise ShapeError(f"field of shape {f.shape} does not match grid of size {grid.n}")
    return f


def build_grid(params: ModelParams, n: int) -> WeightedGrid:
    if not isinstance(params, ModelParams):
        params = ModelParams(float(params))
    if int(n) != n or n < 8:
        raise ConfigurationError(f"grid needs n >= 8 nodes, got {n}")
    a = params.alpha - 1.0
    y, w = roots_jacobi(int(n), a, a)
    y = np.asarray(y, dtype=float)
    w = np.asarray(w, dtype=float)
    om = (1.0 - y) * (1.0 + y)
    return WeightedGrid(nodes=y, weights_rho=w * om, weights_rho_over=w,
                        weights_rho_times=w * om * om, p=params.p)


def build_window_grid(params: ModelParams, a: float, n: int) -> WeightedGrid:
    """Gauss-Legendre grid on [-a, a] (a < 1) carrying the rho weights.

    Used for norms restricted to |y| <= a, where rho is smooth.
    """
    if not 0 < a < 1:
        raise ConfigurationError(f"window half-width must lie in (0,1), got {a}")
    if n < 8:
        raise ConfigurationError(f"grid needs n >= 8 nodes, got {n}")
    t, w = roots_legendre(int(n))
    y = a * t
    w = a * w
    om = (1.0 - y) * (1.0 + y)
    r = om ** params.alpha
    return WeightedGrid(nodes=y, weights_rho=w * r, weights_rho_over=w * r / om,
                        weights_rho_times=w * r * om, p=params.p, label=f"window{a:g}")


def integrate(grid: WeightedGrid, f, weight_kind: str = "rho") -> float:
    f = check_aligned(grid, f)
    if weight_kind == "rho":
        w = grid.weights_rho
    elif weight_kind == "rho_over":
        w = grid.weights_rho_over
    elif weight_kind == "rho_times":
        w = grid.weights_rho_times
    else:
        raise ConfigurationError(f"unknown weight kind {weight_kind!r}; use one of {WEIGHT_KINDS}")
    return float(w @ f)


def derivative(grid: WeightedGrid, f) -> np.ndarray:
    f = check_aligned(grid, f)
    return grid.diff_matrix @ f


def chart_xi(grid: WeightedGrid, f, mode: str = "bar") -> np.ndarray:
    """Values of f in the xi = argth(y) chart, at ``grid.xi_nodes``.

    ``bar``: f (1-y^2)^(1/(p-1));  ``hat``: f (1-y^2)^(1/(p-1) + 1/2).
    """
    f = check_aligned(grid, f)
    e = 1.0 / (grid.p - 1.0)
    if mode == "bar":
        return f * grid.one_minus_y2 ** e
    if mode == "hat":
        return f * grid.one_minus_y2 ** (e + 0.5)
    raise ConfigurationError(f"unknown chart mode {mode!r}")


def flat_chart_norm(grid: WeightedGrid, f1, f2) -> float:
    """||(f1bar, f2hat)|| in H^1 x L^2 of the xi line, computed on the y nodes.

    Uses dxi = dy/(1-y^2) and d/dxi = (1-y^2) d/dy, so every term is an
    integral against one of the grid weights.
    """
    f1 = check_aligned(grid, f1)
    f2 = check_aligned(grid, f2)
    a = grid.params.alpha
    y = grid.nodes
    df = derivative(grid, f1)
    # (1-y^2) (d_y bar f)^2 / rho = (1-y^2) (f' - a y f/(1-y^2))^2
    grad = (integrate(grid, df ** 2, "rho_times")
            - 2 * a * integrate(grid, y * f1 * df, "rho")
            + a * a * integrate(grid, y * y * f1 ** 2, "rho_over"))
    l2 = integrate(grid, f1 ** 2, "rho_over")
    return float(np.sqrt(grad + l2 + integrate(grid, f2 ** 2, "rho")))


def save_field_csv(path, grid: WeightedGrid, values) -> None:
    values = check_aligned(grid, values)
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["y", "value"])
        for y, v in zip(grid.nodes, values):
            wr.writerow([f"{y:.17g}", f"{v:.17g}"])


def load_field_csv(path) -> tuple[np.ndarray, np.ndarray]:
    data = np.loadtxt(Path(path), delimiter=",", skiprows=1, ndmin=2)
    return data[:, 0], data[:, 1]


@dataclass(frozen=True, eq=False)
class FieldPair:
    """A sampled element (q1, q2) of the energy space on a common grid."""

    q1: np.ndarray
    q2: np.ndarray

    def __post_init__(self):
        q1 = np.asarray(self.q1, dtype=float)
        q2 = np.asarray(self.q2, dtype=float)
        if q1.shape != q2.shape or q1.ndim != 1:
            raise ShapeError(f"components have shapes {q1.shape} and {q2.shape}")
        object.__setattr__(self, "q1", q1)
        object.__setattr__(self, "q2", q2)

    @classmethod
    def zeros(cls, n):
        return cls(np.zeros(n), np.zeros(n))

    def __add__(self, other):
        return FieldPair(self.q1 + other.q1, self.q2 + other.q2)

    def __sub__(self, other):
        return FieldPair(self.q1 - other.q1, self.q2 - other.q2)

    def __neg__(self):
        return FieldPair(-self.q1, -self.q2)

    def __mul__(self, c):
        return FieldPair(c * self.q1, c * self.q2)

    __rmul__ = __mul__

    def __truediv__(self, c):
        return FieldPair(self.q1 / c, self.q2 / c)

    def __len__(self):
        return self.q1.size

    def reflect(self):
        """y -> -y (valid on symmetric node sets)."""
        return FieldPair(self.q1[::-1].copy(), self.q2[::-1].copy())

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.q1)) and np.all(np.isfinite(self.q2)))
