"""Minimax of affine combinations of quadratic risks across environments."""

from .moments import (CsvSchema, EnvironmentMoments, SampleMatrix, compute_moments,
                      load_environment_csv, merge_moments)
from .risk import (QuadraticForm, SignClass, WeightScheme, build_forms, build_quadratic_form,
                   eval_form, eval_gap, eval_max, gradient)
from .solver import SolutionReport, SolverOptions, set_distance, solve

__version__ = "0.1.0"
