"""Real spectra and instability thresholds of damped wave operators with indefinite damping.

The toolkit discretises ``psi_tt + alpha a psi_t + (-Delta + b) psi = 0`` by
finite differences and locates real eigenvalues of the first-order operator
through the eigencurves ``mu -> gamma_n(mu)`` of ``-Delta + b + mu a``.
"""

from .errors import (
    CoefficientError,
    CoefficientValidationError,
    ConfigError,
    DampSpecError,
    RangeError,
    SolverError,
    TableExtensionRequired,
    ValidationMismatch,
)
from .expr import Expression, ExpressionError, parse_expression
from .grid import (
    CoefficientSet,
    Grid,
    SymmetricOperator,
    assemble_schrodinger,
    build_grid,
    sample_coefficients,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "CoefficientError",
    "CoefficientSet",
    "CoefficientValidationError",
    "ConfigError",
    "DampSpecError",
    "Expression",
    "ExpressionError",
    "Grid",
    "RangeError",
    "SolverError",
    "SymmetricOperator",
    "TableExtensionRequired",
    "ValidationMismatch",
    "assemble_schrodinger",
    "build_grid",
    "parse_expression",
    "sample_coefficients",
]
