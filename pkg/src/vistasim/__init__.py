"""Iterative optimization with adversary-dominated outsourced gradients.

A data collector outsources gradient computation to a network where
colluding rational adversaries may hold the majority.  Reports are accepted
only when mutually consistent within an announced threshold; the adversary
best-responds to each threshold, and the VISTA controller adapts the
threshold and learning rate over rounds.  This package provides the round
simulator, a numerical best-response solver for the induced
acceptance-probability / estimation-error curve, constant-threshold
baselines, and runtime checks derived from the convergence analysis.
"""

from .controller import (ConstantController, VistaConfig, VistaController,
                         VistaState, check_rate_condition, constant_policy)
from .equilibrium import (AdversaryUtility, EquilibriumCurve, EquilibriumPoint,
                          SolverConfig, best_response, eta_for_target_mse,
                          evaluate_strategy, load_curve, mse_of_eta, pa_of_eta,
                          pav, save_curve, tabulate_curve)
from .estimator import EstimatorSpec, estimate
from .harness import (BatchResult, RunRecord, compare, run_batch, run_single,
                      write_batch, write_comparison)
from .objectives import Objective, builtin_objectives, get_objective, quadratic
from .workers import (AdversaryStrategy, NetworkSpec, RoundReports,
                      check_acceptance, make_reports, sample_adversarial_noise,
                      sample_honest_noise)

__version__ = "0.1.0"

__all__ = [
    "AdversaryStrategy", "AdversaryUtility", "BatchResult", "ConstantController",
    "EquilibriumCurve", "EquilibriumPoint", "EstimatorSpec", "NetworkSpec",
    "Objective", "RoundReports", "RunRecord", "SolverConfig", "VistaConfig",
    "VistaController", "VistaState", "best_response", "builtin_objectives",
    "check_acceptance", "check_rate_condition", "compare",
    "constant_policy", "estimate", "eta_for_target_mse", "evaluate_strategy",
    "get_objective", "load_curve", "make_reports", "mse_of_eta", "pa_of_eta",
    "pav", "quadratic", "run_batch", "run_single", "sample_adversarial_noise",
    "sample_honest_noise", "save_curve", "tabulate_curve", "write_batch",
    "write_comparison",
]
