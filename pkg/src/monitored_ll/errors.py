"""Exception types shared across the numerical modules."""


class NumericsError(Exception):
    """Base class for numerical failures (maps to CLI exit code 3)."""


class SingularIntegrand(NumericsError):
    """The loop-integral denominator has a (near-)zero on the real axis."""


class NonConvergence(NumericsError):
    """A quadrature refinement check failed to converge."""


class BranchError(NumericsError):
    """Principal square root requested on the negative real axis."""


class StepFailure(NumericsError):
    """Adaptive step size underflowed during flow integration."""

    def __init__(self, message, ell=None):
        super().__init__(message)
        self.ell = ell


class NoRoot(NumericsError):
    """Bracketing found no sign change."""

    def __init__(self, message, bracket=None):
        super().__init__(message)
        self.bracket = bracket


class DegenerateMode(NumericsError):
    """Mode frequency with non-positive real part; Bogoliubov angle undefined."""


class NoConvergence(NumericsError):
    """Root finder failed; carries the best residual and the seed used."""

    def __init__(self, message, best_residual=None, seed=None):
        super().__init__(message)
        self.best_residual = best_residual
        self.seed = seed


class SectorMismatch(ValueError):
    """Requested operators are incompatible with the chosen particle-number sector."""


class StepRejected(NumericsError):
    """Stochastic step drifted too far from unit norm (time step too large)."""
