"""Exception hierarchy shared by the engine and the CLI."""


class DecompSolveError(Exception):
    """Base class for all engine errors."""


class InputError(DecompSolveError, ValueError):
    """Malformed or inconsistent input (dimensions, non-finite entries, bad options)."""


class SpectralGapError(DecompSolveError):
    """An eigenvalue sits too close to the unit circle to classify reliably."""

    def __init__(self, modulus: float, tol: float):
        self.modulus = float(modulus)
        self.tol = float(tol)
        super().__init__(
            f"spectral gap violation: eigenvalue modulus {modulus:.17g} "
            f"lies within {tol:g} of the unit circle"
        )


class NoFixedPointError(DecompSolveError):
    """The stationary covariance equation has no PSD solution for the given input."""


class HypothesisError(DecompSolveError):
    """A theorem-level routine was called on a map that violates its hypotheses."""


class PreconditionError(DecompSolveError):
    """An operation was called without its documented precondition."""


class NoSolutionError(DecompSolveError):
    """A solution was requested where existence is not certified."""


class ConsistencyError(DecompSolveError):
    """Two existence routes returned contradictory verdicts."""
