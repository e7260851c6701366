"""Time-varying sparse inverse covariance estimation."""
from .admm import AdmmState, SolveReport, objective, solve
from .data import (EmpiricalCovSequence, InputError, NumericError, ObservationSet,
                   ParseError, Penalty, PenaltySpec, SolverConfig, ThetaSequence,
                   center_columns, empirical_covariances, load_timeseries, parse_rows)
from .evaluation import (GroundTruthScenario, ShiftKind, aic, aic_select, f1_score,
                         generate_scenario, td_ratio, temporal_deviation)
from .extensions import (StreamState, async_weights, infer_intermediate,
                         interpolate_sequence, stream_append)
from .prox import (prox_col_l1, prox_col_l2, prox_col_laplacian, prox_col_linf,
                   prox_logdet_trace, prox_perturbed_node, prox_psi, psi_value)

__version__ = "0.1.0"

__all__ = [
    "AdmmState", "SolveReport", "objective", "solve",
    "EmpiricalCovSequence", "InputError", "NumericError", "ObservationSet", "ParseError",
    "Penalty", "PenaltySpec", "SolverConfig", "ThetaSequence", "center_columns",
    "empirical_covariances", "load_timeseries", "parse_rows",
    "GroundTruthScenario", "ShiftKind", "aic", "aic_select", "f1_score",
    "generate_scenario", "td_ratio", "temporal_deviation",
    "StreamState", "async_weights", "infer_intermediate", "interpolate_sequence",
    "stream_append",
    "prox_col_l1", "prox_col_l2", "prox_col_laplacian", "prox_col_linf",
    "prox_logdet_trace", "prox_perturbed_node", "prox_psi", "psi_value",
]
