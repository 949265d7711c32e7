"""Scenarios, sweeps and refinement studies."""

from .initial_conditions import IC_TYPES, Constant, CosinePerturbed, TouchingZero, ic_from_dict
from .scenarios import (
    SCENARIOS,
    RunReport,
    Scenario,
    entropy_ceiling,
    evaluate_checks,
    get_scenario,
    run_scenario,
)
from .studies import (
    BalanceOrderResult,
    EpsSweepResult,
    RefinementResult,
    SingleLayerReference,
    balance_order_study,
    eps_sweep,
    fit_order,
    refinement_study,
    run_fixed_steps,
    single_layer_check,
)

__all__ = [
    "IC_TYPES", "Constant", "CosinePerturbed", "TouchingZero", "ic_from_dict", "SCENARIOS",
    "RunReport", "Scenario", "entropy_ceiling", "evaluate_checks", "get_scenario", "run_scenario",
    "BalanceOrderResult", "EpsSweepResult", "RefinementResult", "SingleLayerReference",
    "balance_order_study", "eps_sweep", "fit_order", "refinement_study", "run_fixed_steps",
    "single_layer_check",
]
