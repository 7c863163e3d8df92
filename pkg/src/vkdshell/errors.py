"""Exception hierarchy.  The CLI maps ``ValidationError`` to exit code 2 and
every ``SolverError`` to exit code 3, printing ``name`` on stderr."""


class VkdError(Exception):
    name = "VkdError"


class ValidationError(VkdError, ValueError):
    name = "ValidationError"


class GridMismatch(ValidationError):
    name = "GridMismatch"


class SchemeMismatch(ValidationError):
    name = "SchemeMismatch"


class UnsupportedScheme(ValidationError):
    name = "UnsupportedScheme"


class UnsupportedDomain(ValidationError):
    name = "UnsupportedDomain"


class FieldFormatError(ValidationError):
    name = "FieldFormatError"


class SolverError(VkdError, RuntimeError):
    name = "SolverError"


class NonZeroMeanRightHandSide(SolverError):
    name = "NonZeroMeanRightHandSide"


class NonPositiveMetric(SolverError):
    name = "NonPositiveMetric"


class DegenerateConstraint(SolverError):
    name = "DegenerateConstraint"


class DegeneratePath(SolverError):
    name = "DegeneratePath"


class MaxIterations(SolverError):
    name = "MaxIterations"


class Diverged(SolverError):
    name = "Diverged"


class SingularReducedSystem(SolverError):
    name = "SingularReducedSystem"


class StepFailure(SolverError):
    name = "StepFailure"
