"""Initial data presets for u_tt = u_xx + |u|^(p-1) u."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ..errors import ConfigurationError
from ..grid import ModelParams


@dataclass
class Preset:
    name: str
    u0: Callable
    u1: Callable
    exact: Callable | None = None        # (x, t) -> (u, ut)
    blowup_curve: Callable | None = None  # x -> T(x)
    info: dict = field(default_factory=dict)


def exact_soliton_solution(params: ModelParams, d: float, T: float, x0: float = 0.0):
    """u = kappa0 (1-d^2)^(1/(p-1)) (T - t + d(x-x0))^(-2/(p-1)), blowing up on t = T + d(x-x0)."""
    a = params.alpha
    c = params.kappa0 * (1 - d * d) ** (a / 2)

    def sol(x, t):
        z = T - t + d * (np.asarray(x) - x0)
        with np.errstate(divide="ignore", invalid="ignore"):
            return c * z ** (-a), a * c * z ** (-a - 1)

    return sol


def make_preset(name: str, params: ModelParams, **kw) -> Preset:
    name = name.lower()
    if name == "ode":
        c = float(kw.get("c", 1.0))
        return Preset("ode", lambda x: np.full_like(np.asarray(x, float), c),
                      lambda x: np.zeros_like(np.asarray(x, float)), info={"c": c})
    if name in ("exact-soliton", "exact_soliton", "soliton"):
        d = float(kw.get("d", 0.3))
        T = float(kw.get("T", 1.0))
        x0 = float(kw.get("x0", 0.0))
        sol = exact_soliton_solution(params, d, T, x0)
        return Preset("exact-soliton", lambda x: sol(x, 0.0)[0], lambda x: sol(x, 0.0)[1],
                      exact=sol, blowup_curve=lambda x: T + d * (np.asarray(x) - x0),
                      info={"d": d, "T": T, "x0": x0})
    if name == "gaussian":
        A = float(kw.get("A", 3.0))
        s = float(kw.get("sigma", 0.5))
        return Preset("gaussian", lambda x: A * np.exp(-(np.asarray(x) / s) ** 2),
                      lambda x: np.zeros_like(np.asarray(x, float)), info={"A": A, "sigma": s})
    if name == "odd":
        A = float(kw.get("A", 3.0))
        s = float(kw.get("sigma", 0.5))
        # antisymmetric: u0(-x) = -u0(x), with maximum A at x = sigma/sqrt(2)
        amp = A * np.sqrt(2 * np.e)

        def u0(x):
            x = np.asarray(x, float)
            return amp * (x / s) * np.exp(-(x / s) ** 2)

        return Preset("odd", u0, lambda x: np.zeros_like(np.asarray(x, float)),
                      info={"A": A, "sigma": s})
    raise ConfigurationError(f"unknown preset {name!r}")


def levine_energy(params: ModelParams, x: np.ndarray, u0: np.ndarray, u1: np.ndarray) -> float:
    """int (u1^2/2 + |u0'|^2/2 - |u0|^(p+1)/(p+1)) dx by the trapezoid rule."""
    dx = np.diff(x)
    ux = np.gradient(u0, x)
    dens = 0.5 * u1 ** 2 + 0.5 * ux ** 2 - np.abs(u0) ** (params.p + 1) / (params.p + 1)
    return float(np.sum(0.5 * (dens[1:] + dens[:-1]) * dx))
