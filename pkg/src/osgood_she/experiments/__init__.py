"""Monte Carlo harnesses and the deterministic ODE oracle."""
from .blowup import BlowupResult, BlowupRun, BlowupTrace, doob_check, doob_constant, monotone_in_theta, onset_theta, run_blowup
from .global_existence import GlobalResult, StoppingRow, run_global_existence, shortfall_trend_ok, simulate_paths, stopping_table
from .moments import MomentReport, minimal_constant, run_moment_growth
from .montecarlo import McSummary, path_batches, run_ordered, stream_id, summarize, wilson_interval
from .ode import BlowupAt, SurvivedTo, ode_osgood_oracle
from .tails import TailCurve, rescaling_consistent, run_tail_estimate, tail_curve

__all__ = [
    "BlowupAt", "BlowupResult", "BlowupRun", "BlowupTrace", "GlobalResult", "McSummary", "MomentReport",
    "StoppingRow", "SurvivedTo", "TailCurve", "doob_check", "doob_constant", "minimal_constant",
    "monotone_in_theta", "ode_osgood_oracle", "onset_theta", "path_batches", "rescaling_consistent",
    "run_blowup", "run_global_existence", "run_moment_growth", "run_ordered", "run_tail_estimate",
    "shortfall_trend_ok", "simulate_paths", "stopping_table", "stream_id", "summarize", "tail_curve",
    "wilson_interval",
]
