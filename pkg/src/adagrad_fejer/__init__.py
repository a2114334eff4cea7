"""AdaGrad-Norm and coordinatewise AdaGrad with quasi-Fejér convergence diagnostics."""

from .adagrad import OptimizerState, initial_state, run, step_coord, step_gd, step_norm
from .counterexample import build_model, run_counterexample
from .fejer import (
    FejerReport,
    MetricSequence,
    convergence_certificate,
    crossing_index,
    diagnose,
    eta_sequence,
    eta_summability_bound,
    grad_energy_bound_coord,
    grad_energy_bound_norm,
    lemma_quadratic_bound,
    metric_norm_sq,
    quasi_fejer_residual,
    variable_metric_residual,
)
from .objective import ObjectiveProblem, descent_lemma_check, get_problem, make_problem_corpus, make_quadratic
from .trajectory import TrajectoryRecord, read_csv, write_csv

__version__ = "0.1.0"

__all__ = [
    "FejerReport",
    "MetricSequence",
    "ObjectiveProblem",
    "OptimizerState",
    "TrajectoryRecord",
    "build_model",
    "convergence_certificate",
    "crossing_index",
    "descent_lemma_check",
    "diagnose",
    "eta_sequence",
    "eta_summability_bound",
    "get_problem",
    "grad_energy_bound_coord",
    "grad_energy_bound_norm",
    "initial_state",
    "lemma_quadratic_bound",
    "make_problem_corpus",
    "make_quadratic",
    "metric_norm_sq",
    "quasi_fejer_residual",
    "read_csv",
    "run",
    "run_counterexample",
    "step_coord",
    "step_gd",
    "step_norm",
    "variable_metric_residual",
    "write_csv",
]
