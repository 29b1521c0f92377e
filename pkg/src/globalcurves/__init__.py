"""Global solution curves of nonlinear boundary value problems by continuation in a global parameter.

The solvers compute curves point by point in a parameter that identifies
solutions uniquely (``u(0)`` for radial and beam problems, a Fourier harmonic
for forced problems on (0, pi)), so folds need no special treatment.
"""

from .model import (
    CATALOG,
    CurvePoint,
    Family,
    Fold,
    NewtonFailed,
    NewtonReport,
    Nonlinearity,
    ProblemSpec,
    SingularDerivative,
    SingularJacobian,
    SolutionCurve,
    Terminal,
    catalog,
    detect_folds,
    parse_nonlinearity,
    resolve_nonlinearity,
    split_branches,
)

__all__ = [
    "CATALOG",
    "CurvePoint",
    "Family",
    "Fold",
    "NewtonFailed",
    "NewtonReport",
    "Nonlinearity",
    "ProblemSpec",
    "SingularDerivative",
    "SingularJacobian",
    "SolutionCurve",
    "Terminal",
    "catalog",
    "detect_folds",
    "parse_nonlinearity",
    "resolve_nonlinearity",
    "split_branches",
]
__version__ = "0.1.0"
