"""Bounds on counterfactual outcome distributions with a multi-valued instrument."""

from .bounds import (
    AteBounds,
    CdfBoundCurve,
    GammaBound,
    PointIdentification,
    QteBounds,
    ate_bounds,
    cdf_bound_curve,
    point_identify,
    qte_bounds,
    quantile_bounds,
    solve_gamma_bound,
)
from .dataset import EmpiricalModel, InstrumentSupport, Sample, estimate, load_csv
from .diagnostics import complier_cdfs, fosd_preservation_test, violation_experiment
from .errors import (
    ConfigError,
    DataError,
    DiagnosticUnavailable,
    FosdBoundsError,
    ParseError,
    SolverError,
)
from .lp import LpProblem, LpSolution, solve
from .sieve import SieveSpec, bernstein, basis_partial_integral, dual_sieve_bound
from .simulate import DgpConfig, draw_sample, population_model, true_counterfactual_cdf

__version__ = "0.1.0"

__all__ = [
    "AteBounds", "CdfBoundCurve", "ConfigError", "DataError", "DgpConfig", "DiagnosticUnavailable",
    "EmpiricalModel", "FosdBoundsError", "GammaBound", "InstrumentSupport", "LpProblem", "LpSolution",
    "ParseError", "PointIdentification", "QteBounds", "Sample", "SieveSpec", "SolverError",
    "ate_bounds", "basis_partial_integral", "bernstein", "cdf_bound_curve", "complier_cdfs",
    "draw_sample", "dual_sieve_bound", "estimate", "fosd_preservation_test", "load_csv",
    "point_identify", "population_model", "qte_bounds", "quantile_bounds", "solve",
    "solve_gamma_bound", "true_counterfactual_cdf", "violation_experiment",
]
