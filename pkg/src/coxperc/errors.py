"""Exception types raised across the package."""


class CoxPercError(Exception):
    """Base class for package errors."""


class ParameterError(CoxPercError, ValueError):
    """A numeric parameter is outside its admissible range."""


class RejectedInputError(CoxPercError, ValueError):
    """Input data is malformed (non-finite coordinates, wrong shape)."""


class OutOfWindowError(CoxPercError, ValueError):
    """A query region is not contained in the sampled window."""


class DegenerateInputError(CoxPercError, ValueError):
    """Too few or collinear generators for a tessellation."""


class UnsupportedDimensionError(CoxPercError, ValueError):
    """The operation is only implemented in another dimension."""


class UnsupportedDiagnosticError(CoxPercError, ValueError):
    """No stabilization construction is available for the measure."""


class ContractViolation(CoxPercError, RuntimeError):
    """A caller broke a documented precondition (e.g. origin missing)."""


class UndefinedEstimateError(CoxPercError, RuntimeError):
    """An estimator has no defined value (e.g. all Palm weights zero)."""
