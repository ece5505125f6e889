from .experiments import (HIGH_PERSISTENCE, PersistenceRow, Prepared, SweepResult, build_dataset,
                          fraction_boundary, lambda_sweep, paper_lambda_grid, persistence_experiment,
                          persistence_label, prepare, split_dataset, write_persistence_csv)
from .metrics import AlignmentError, EvaluationReport, align, evaluate, mae, mse, r_squared
from .spectrum import SpectrumReport, amplitude_spectrum, residual_spectrum

__all__ = [
    "AlignmentError", "EvaluationReport", "HIGH_PERSISTENCE", "PersistenceRow", "Prepared",
    "SpectrumReport", "SweepResult", "align", "amplitude_spectrum", "build_dataset", "evaluate",
    "fraction_boundary", "lambda_sweep", "mae", "mse", "paper_lambda_grid", "persistence_experiment",
    "persistence_label", "prepare", "r_squared", "residual_spectrum", "split_dataset",
    "write_persistence_csv",
]
