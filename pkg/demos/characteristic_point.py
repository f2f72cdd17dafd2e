"""Odd data: two solitons of opposite sign separate logarithmically at x0 = 0 (about 15 s)."""
import numpy as np

from blowuplab import analysis as an
from blowuplab.grid import ModelParams
from blowuplab.wave_solver import SolverConfig, make_preset, to_similarity, uniform_state
from blowuplab.wave_solver.solver import ZoomConfig, evolve_zoom

params = ModelParams(3.0)
pr = make_preset("odd", params)
st = uniform_state(-4, 4, 8001, pr.u0, pr.u1)
run = evolve_zoom(st, 0.0, 5.0, SolverConfig(p=3.0), ZoomConfig(n_nodes=4001, s_max=14.0))
tr = to_similarity(run, 0.0, run.T0, s_grid=np.arange(1.0, 11.5 + 1e-9, 0.25), n=120)
cls = an.classify_point(tr)
k, dec = an.count_solitons(tr)
print(f"T(0) = {run.T0:.6f}; {cls.label}, k = {k}; {cls.reason}")
print(an.zeta_law(dec, 3.0).to_json())
print(an.gap_law(dec, 1.0).to_json())
