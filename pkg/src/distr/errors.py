"""Exception hierarchy shared by every module of the package."""


class DistrError(Exception):
    """Base class for all errors raised by ``distr``."""


class ContractViolation(DistrError, ValueError):
    """An input breaks a documented precondition (shape, symmetry, range)."""


class ParameterError(DistrError, ValueError):
    """A scalar hyperparameter is outside its admissible range."""


class ConfigurationError(DistrError, ValueError):
    """An invalid combination of loss / similarity kinds / solver options."""


class DomainError(DistrError, ValueError):
    """A matrix entry falls outside the domain of the inner loss."""


class InfeasibleError(DistrError):
    """The requested scaling or projection problem has no solution."""


class DegenerateGraphError(DistrError):
    """A similarity graph is unusable, e.g. it has an isolated node."""


class ConvergenceError(DistrError):
    """An iterative routine hit its iteration limit.

    Parameters
    ----------
    message : str
        Human readable description.
    residual : float
        Value of the stopping criterion when the routine gave up.
    """

    def __init__(self, message, residual=float("nan")):
        super().__init__(f"{message} (residual={residual:.3e})")
        self.residual = residual
