"""Evolve the exact one-soliton solution and recover its straight blow-up curve."""
import numpy as np

from blowuplab.wave_solver import SolveConfig, estimate_T

curve = estimate_T(SolveConfig(preset="exact-soliton", d=0.3, nx=201, levels=3))
ok = np.isfinite(curve.T) & (np.abs(curve.x) <= 0.5)
slope, intercept = np.polyfit(curve.x[ok], curve.T[ok], 1)
print(f"observed order {curve.order:.2f}")
print(f"T(x) ~ {intercept:.5f} + {slope:.5f} x   (exact: 1 + 0.3 x)")
print(f"max |T - exact| on |x| <= 0.5: {np.max(np.abs(curve.T[ok] - 1 - 0.3 * curve.x[ok])):.2e}")
