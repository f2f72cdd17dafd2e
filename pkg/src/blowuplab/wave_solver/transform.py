"""Change of similarity center from x0 = 0 (with T(0) = 0) to a nearby x < 0.

With q = (1-b) x e^s and Lam = 1 - q,

    w_x(y, s) = Lam^(-2/(p-1)) W(Y, S),   Y = (y + x e^s)/Lam,   S = s - log Lam,

where b is defined by -T(x)/|x| = 1 - b.  Differentiating in s gives

    d_s w_x = Lam^(-2/(p-1)-1) [W_S + (2/(p-1)) q W + x e^s (1 + (1-b) y)/Lam W_Y].
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from ..errors import ParameterError, ScheduleError, WindowError
from ..grid import FieldPair, ModelParams
from ..solitons import kappa, kappa_dy


@dataclass
class CenterMap:
    Y: np.ndarray
    S: float
    Lam: float
    dY_ds: np.ndarray
    dS_ds: float


def center_map(params: ModelParams, x: float, b: float, s: float, y) -> CenterMap:
    y = np.asarray(y, dtype=float)
    xe = x * np.exp(s)
    q = (1 - b) * xe
    lam = 1 - q
    if lam <= 0:
        raise WindowError("1 - (1-b) x e^s must be positive")
    return CenterMap(Y=(y + xe) / lam, S=s - np.log(lam), Lam=lam,
                     dY_ds=xe * (1 + (1 - b) * y) / lam ** 2, dS_ds=1 / lam)


def window_y1(x: float, b: float, s: float) -> float:
    """Left end y1(s) = -1 - 2 b x e^s of the window where the transform is controlled."""
    return -1 - 2 * b * x * np.exp(s)


def transform_center(params: ModelParams, profile: Callable, x: float, b: float, s: float,
                     y, restrict: bool = True) -> tuple[FieldPair, np.ndarray]:
    """Samples of (w_x, d_s w_x)(y, s) from a profile (Y, S) -> (W, W_S, W_Y) centred at 0.

    Returns the pair together with the boolean window mask y > y1(s) (and
    -1 < Y < 1).  Entries outside the window are NaN when ``restrict``.
    """
    if x >= 0:
        raise ParameterError(f"the new center must satisfy x < 0, got {x}")
    y = np.asarray(y, dtype=float)
    a = params.alpha
    cm = center_map(params, x, b, s, y)
    inside = (y > window_y1(x, b, s)) & (np.abs(cm.Y) < 1)
    if not restrict:
        inside = np.abs(cm.Y) < 1
    if not inside.any():
        raise WindowError("the y-window is empty")
    W, WS, WY = profile(cm.Y[inside], cm.S)
    xe = x * np.exp(s)
    q = (1 - b) * xe
    w1 = np.full(y.size, np.nan)
    w2 = np.full(y.size, np.nan)
    w1[inside] = cm.Lam ** (-a) * W
    w2[inside] = cm.Lam ** (-a - 1) * (WS + a * q * W + xe * (1 + (1 - b) * y[inside]) / cm.Lam * WY)
    return FieldPair(w1, w2), inside


def soliton_profile(params: ModelParams, d: float) -> Callable:
    """The stationary profile kappa(d) as a (Y, S) -> (W, W_S, W_Y) callable."""
    def prof(Y, S):
        return kappa(params, d, Y), np.zeros_like(Y), kappa_dy(params, d, Y)
    return prof


# ----------------------------------------------------------------------------
# time schedule for the decomposition near a characteristic point


def gammas(params: ModelParams, k: int) -> np.ndarray:
    """gamma_i = (p-1)((k+1)/2 - i), i = 1..k."""
    i = np.arange(1, k + 1)
    return (params.p - 1) * ((k + 1) / 2 - i)


def S_of(x: float, b: float, s) -> np.ndarray:
    """S(x, s) = -log(|x|(1-b) + e^(-s))."""
    return -np.log(abs(x) * (1 - b) + np.exp(-np.asarray(s, dtype=float)))


def default_D(params: ModelParams, k: int) -> Callable:
    """D_i(S) = tanh(gamma_i/2 log S), the log-law model of the soliton velocities."""
    g = gammas(params, k)

    def D(i, S):
        S = np.asarray(S, dtype=float)
        return np.tanh(g[i - 1] / 2 * np.log(np.maximum(S, 1e-300)))
    return D


def nu_bar(x: float, b: float, d_bar, s) -> np.ndarray:
    """nu_bar_i = [b - (1 - d_bar_i)] x e^s."""
    return (b - (1 - np.asarray(d_bar))) * x * np.exp(np.asarray(s, dtype=float))


@dataclass
class Schedule:
    k: int
    k_hat: int
    gamma: np.ndarray
    s: dict            # m -> s_m for m = k_hat .. k+1
    l: float
    x: float
    b: float
    D: Callable

    def d_bar(self, i: int, s) -> np.ndarray:
        return self.D(i, S_of(self.x, self.b, s))

    def nu_bar(self, i: int, s) -> np.ndarray:
        return nu_bar(self.x, self.b, self.d_bar(i, s), s)

    def ordered(self) -> bool:
        seq = [self.s[m] for m in range(self.k + 1, self.k_hat - 1, -1)]
        return bool(np.all(np.diff(seq) >= 0))


def schedule(params: ModelParams, x: float, b: float, k: int, L: Sequence[float],
             D: Callable | None = None, n_scan: int = 4000) -> Schedule:
    """s_{k+1} = L_{k+1}, s_m = l + gamma_m log l + L_m (k_hat < m <= k), s_{k_hat} by scanning.

    ``L`` lists L_m for m = k_hat, ..., k+1.  s_{k_hat} is the largest s in
    [L_{k+1}, l + L_{k_hat}] such that nu_bar_1/(1 - d_bar_1) stays above
    -1 + exp(-(p-1) L_{k_hat}) on [L_{k+1}, s].
    """
    if x >= 0:
        raise ParameterError(f"x must be negative, got {x}")
    if k < 1:
        raise ParameterError("k must be >= 1")
    k_hat = (k + 1) // 2
    L = list(map(float, L))
    if len(L) != k + 2 - k_hat:
        raise ParameterError(f"need {k + 2 - k_hat} values L_m (m = {k_hat}..{k + 1}), got {len(L)}")
    Lm = {m: L[m - k_hat] for m in range(k_hat, k + 2)}
    g = gammas(params, k)
    l = abs(np.log(abs(x)))
    D = D or default_D(params, k)
    s = {k + 1: Lm[k + 1]}
    for m in range(k_hat + 1, k + 1):
        s[m] = float(l + g[m - 1] * np.log(l) + Lm[m])
    lo, hi = Lm[k + 1], l + Lm[k_hat]
    if hi < lo:
        raise ScheduleError("l + L_khat lies below L_{k+1}")
    grid = np.linspace(lo, hi, n_scan)
    d1 = D(1, S_of(x, b, grid))
    ratio = nu_bar(x, b, d1, grid) / (1 - d1)
    thr = -1 + np.exp(-(params.p - 1) * Lm[k_hat])
    bad = np.nonzero(ratio < thr)[0]
    s[k_hat] = float(hi if bad.size == 0 else grid[max(bad[0] - 1, 0)])
    sch = Schedule(k=k, k_hat=k_hat, gamma=g, s=s, l=l, x=x, b=b, D=D)
    if not sch.ordered():
        raise ScheduleError(f"schedule not ordered: {[(m, round(v, 4)) for m, v in sorted(s.items())]}")
    return sch


def window_inequalities(x: float, b: float, s: float, y, L: float) -> dict:
    """Slack of the five window bounds for the centre change on y in [y1(s), 1).

    Valid when x < 0, 0 < b < 1 and |x| e^s <= e^L.  Each entry is
    min(rhs - lhs) over the nodes; all of them are >= 0 when the bounds hold.
    """
    if x >= 0:
        raise ParameterError(f"x must be negative, got {x}")
    y = np.asarray(y, dtype=float)
    y = y[(y >= window_y1(x, b, s)) & (y < 1)]
    if y.size == 0:
        raise WindowError("no node in [y1(s), 1)")
    xe = x * np.exp(s)
    q = (1 - b) * xe
    lam = 1 - q
    eL = np.exp(L)
    Y = (y + xe) / lam
    return {
        "q_lower": float(q + eL),
        "q_upper": float(-q),
        "inv_lam_lower": float(1 / lam - 1 / (1 + eL)),
        "inv_lam_upper": float(1 - 1 / lam),
        "one_minus_y": float(np.min((1 + eL) * (1 - Y) - (1 - y))),
        "one_plus_y": float(np.min(2 * (1 + eL) * (1 + Y) - (1 + y))),
        "drift": float(np.min((1 + 2 * eL) * (1 - Y ** 2) - abs(xe) * (1 + y * (1 - b)) / lam)),
    }
