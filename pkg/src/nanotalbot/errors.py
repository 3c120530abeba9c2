class NanotalbotError(Exception):
    """Base class for all package errors."""


class SpectrumError(NanotalbotError, ValueError):
    """Malformed or physically invalid refractive-index data."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class SingularityError(NanotalbotError, ArithmeticError):
    """The dipole polarizability hits the plasmon pole eps = -2."""


class UnsupportedMaterialError(NanotalbotError, ValueError):
    pass


class NumericError(NanotalbotError, ArithmeticError):
    """A numerical procedure failed (cutoff, integrator, root finder).

    ``where`` names the module/operation so the CLI can report it.
    """

    def __init__(self, message, where=None, state=None):
        self.where = where
        self.state = state
        if where:
            message = f"{where}: {message}"
        super().__init__(message)


class VisibilityError(NanotalbotError, ArithmeticError):
    pass


class SpectrumRangeWarning(UserWarning):
    """A wavelength outside the tabulated range was clamped to the nearest endpoint."""


class QuadratureWarning(UserWarning):
    """Spectral quadrature changed by more than the tolerance under grid doubling."""


class ValidityWarning(UserWarning):
    """An approximation's regime of validity is violated."""


class BranchPointWarning(UserWarning):
    """Closed-form grating coefficient evaluated at its branch point; convolution fallback used."""
