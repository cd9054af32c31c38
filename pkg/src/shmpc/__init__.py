"""Shrinking-horizon MPC with adaptive terminal weighting and certified solves."""

from .adaptation import (AdaptContext, AdaptState, ScheduleBundle, ScheduleError,
                         lambda_bound, margin_schedules, online_step,
                         rho_from_candidate, stage_cost_sum)
from .condensing import CondensedQp, SpectralData, build_prediction, condense, eval_cost, spectral
from .dynamics import (CostWeights, InvarianceReport, LtiModel, TerminalSet,
                       check_terminal_invariance, discretize_zoh, gamma_level,
                       make_cost_weights, solve_dare)
from .pgm_solver import (BoxConstraint, SolveResult, flops_per_iteration,
                         iter_bound_cold, iter_bound_warm, pgm_solve, project_box,
                         warm_start_constants)
from .sim_harness import (CompareReport, QpCache, SimConfig, SimLog, SimStep,
                          compare_modes, config_to_toml, config_to_toml_str,
                          emit_plot_data, export_csv, load_config, run_closed_loop,
                          spacecraft_preset)
from .spectral_analysis import (ChainReport, EigenDerivReport, KappaConditionReport,
                                SweepReport, check_kappa_condition, eigen_derivative_check,
                                hessian_at, kappa_condition_chain, kappa_condition_scan,
                                kappa_sweep, sweep_to_csv)

__version__ = "0.1.0"

__all__ = [
    "AdaptContext", "AdaptState", "ScheduleBundle", "ScheduleError",
    "lambda_bound", "margin_schedules", "online_step", "rho_from_candidate",
    "stage_cost_sum",
    "CondensedQp", "SpectralData", "build_prediction", "condense", "eval_cost",
    "spectral",
    "CostWeights", "InvarianceReport", "LtiModel", "TerminalSet",
    "check_terminal_invariance", "discretize_zoh", "gamma_level",
    "make_cost_weights", "solve_dare",
    "BoxConstraint", "SolveResult", "flops_per_iteration", "iter_bound_cold",
    "iter_bound_warm", "pgm_solve", "project_box", "warm_start_constants",
    "CompareReport", "QpCache", "SimConfig", "SimLog", "SimStep", "compare_modes",
    "config_to_toml", "config_to_toml_str", "emit_plot_data", "export_csv",
    "load_config", "run_closed_loop", "spacecraft_preset",
    "ChainReport", "EigenDerivReport", "KappaConditionReport", "SweepReport",
    "check_kappa_condition", "eigen_derivative_check", "hessian_at",
    "kappa_condition_chain", "kappa_condition_scan", "kappa_sweep", "sweep_to_csv",
]
