"""Exception types shared across the library."""


class CellFreeJrcError(Exception):
    """Base class for all library errors."""


class InvalidConfigError(CellFreeJrcError, ValueError):
    """A configuration value is outside its admissible range."""


class ConfigValidationError(InvalidConfigError):
    """Structured validation failure that names every offending field."""

    def __init__(self, fields):
        self.fields = dict(fields)
        details = "; ".join(f"{name}: {msg}" for name, msg in sorted(self.fields.items()))
        super().__init__(f"invalid configuration ({details})")


class DegenerateGeometryError(CellFreeJrcError, ValueError):
    """Geometry admits no well-defined answer (coincident points, parallel bearings)."""


class NumericalError(CellFreeJrcError, ArithmeticError):
    """A numerical routine failed to produce a trustworthy result."""


class DecompositionError(NumericalError):
    """Matrix factorization failed, typically a non-PSD input or singular system."""


class IntegrationError(NumericalError):
    """Quadrature refinement did not converge; carries the estimate history."""

    def __init__(self, message, estimates=None):
        super().__init__(message)
        self.estimates = list(estimates or [])


class NumericalDegeneracyError(NumericalError):
    """A statistic has a nonpositive or otherwise invalid denominator."""


class InfeasibleAssociationError(CellFreeJrcError, ValueError):
    """Association constraints cannot all be met; message names the binding one."""


class SearchSpaceTooLargeError(CellFreeJrcError, ValueError):
    """Exhaustive enumeration would exceed the configured combination cap."""


class UnsatisfiableLoSError(CellFreeJrcError, RuntimeError):
    """No clutter-free pair of serving APs exists for some UE."""

    def __init__(self, ue_index, message=None):
        self.ue_index = ue_index
        super().__init__(message or f"no clutter-free AP pair available for UE {ue_index}")
