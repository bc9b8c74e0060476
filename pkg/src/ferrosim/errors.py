"""Exception taxonomy shared by the physics modules and the experiment runner."""


class FerrosimError(Exception):
    """Base class for all package-specific errors."""


class DegenerateMaterialError(FerrosimError):
    """Material parameters make the requested quantity undefined (e.g. alpha=0)."""


class IntegrationBlowupError(FerrosimError):
    """Time integration diverged (polarization left the guard band)."""

    def __init__(self, message: str, dt: float):
        super().__init__(message)
        self.dt = dt


class NonConvergenceError(FerrosimError):
    """A relaxation or quadrature loop did not meet its tolerance in budget."""

    def __init__(self, message: str, residual: float):
        super().__init__(message)
        self.residual = residual


class InsufficientDataError(FerrosimError):
    """A trace does not carry enough samples for the requested observable."""


class BracketError(FerrosimError):
    """Root bracketing failed; carries the scanned interval."""

    def __init__(self, message: str, interval: tuple):
        super().__init__(message)
        self.interval = interval


class QuadratureError(FerrosimError):
    """Energy-integral refinement did not converge within the grid budget."""


class ModelConsistencyWarning(UserWarning):
    """A physics result violated an expected monotonicity; diagnostic, not fatal."""


class ConfigError(FerrosimError):
    """Experiment-config rejection with a stable error code and location.

    Codes: E_PARSE, E_UNIT, E_UNKNOWN_KEY, E_DUPLICATE_KEY, E_MISSING_BLOCK,
    E_INVALID.
    """

    def __init__(self, code: str, message: str, line: int | None = None,
                 col: int | None = None):
        self.code = code
        self.line = line
        self.col = col
        loc = ""
        if line is not None:
            loc = f" at line {line}" + (f", col {col}" if col is not None else "")
        super().__init__(f"{code}{loc}: {message}")
