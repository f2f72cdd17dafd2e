"""Decompose a two-soliton sum back into its parameters."""
import numpy as np

from blowuplab.grid import ModelParams, build_grid
from blowuplab.modulation import FitConfig, fit
from blowuplab.solitons import SolitonParam, sum_of

params = ModelParams(3.0)
grid = build_grid(params, 128)
true = sorted([SolitonParam(0.3, 0.1, 3.0), SolitonParam(-0.6, 0.05, 3.0)], key=lambda s: s.zeta_star)
v = sum_of(params, true, -1).evaluate(params, grid)
guess = [SolitonParam(sp.d + 0.01, sp.nu - 0.01, 3.0) for sp in true]
res = fit(params, grid, v, 2, guess, FitConfig(newton_tol=1e-12), theta1=-1)
for sp, q in zip(true, res.params):
    print(f"d: {sp.d:+.6f} -> {q.d:+.12f}   nu: {sp.nu:+.6f} -> {q.nu:+.12f}")
print(f"iterations {res.iterations}, residual {res.residual_norm:.1e}, J = {res.J_m:.2e}")
print("Newton history:", np.array2string(np.array(res.history), precision=2))
