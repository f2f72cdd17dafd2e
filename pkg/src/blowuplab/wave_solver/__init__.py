"""Physical-space solver, blow-up curves and similarity-variable extraction."""
from .config import SolveConfig, parse_kv
from .curve import BlowupCurve, curve_from_zoom, estimate_T, richardson, zoom_runs
from .presets import Preset, exact_soliton_solution, levine_energy, make_preset
from .similarity import SimilarityTrace, to_similarity, trace_profile
from .solver import (Run, SolverConfig, WaveState, ZoomConfig, ZoomRun, discrete_energy, evolve,
                     evolve_zoom, local_time_to_blowup, ode_solution, ode_time_to_blowup, uniform_state)
from .transform import Schedule, center_map, schedule, soliton_profile, transform_center, window_inequalities, window_y1

__all__ = [
    "BlowupCurve", "Preset", "Run", "Schedule", "SimilarityTrace", "SolveConfig", "SolverConfig",
    "WaveState", "ZoomConfig", "ZoomRun", "center_map", "curve_from_zoom", "discrete_energy",
    "estimate_T", "evolve", "evolve_zoom", "exact_soliton_solution", "levine_energy",
    "local_time_to_blowup", "make_preset", "ode_solution", "ode_time_to_blowup", "parse_kv",
    "richardson", "schedule", "soliton_profile", "to_similarity", "trace_profile",
    "transform_center", "uniform_state", "window_inequalities", "window_y1", "zoom_runs",
]
