"""Exception types shared across the lab."""


class ConvergenceError(RuntimeError):
    """Newton iteration stagnated before reaching the requested tolerance.

    Carries the sup-norm residual history so callers can diagnose where the
    damping underflowed.
    """

    def __init__(self, message, residual_history=None):
        super().__init__(message)
        self.residual_history = list(residual_history or [])


class PositivityError(RuntimeError):
    """The Kahler pinching g + H(phi) > 0 could not be maintained."""


class IntegrationError(RuntimeError):
    """Flow time stepping failed (step size underflow)."""

    def __init__(self, message, t=None, dt=None):
        super().__init__(message)
        self.t = t
        self.dt = dt


class MassMismatchError(ValueError):
    """A density that must integrate to one does not."""


class DegenerateReference(Exception):
    """The positive-part gap vanishes; callers branch to the ordered case."""


class CoarseBranchRequired(Exception):
    """The small-perturbation barrier needs delta < 1/2; use the coarse bound."""

    def __init__(self, delta, threshold=0.5):
        super().__init__(
            f"perturbation parameter delta={delta:.6g} >= {threshold}; "
            "use the coarse constant instead of the barrier branch"
        )
        self.delta = delta
        self.threshold = threshold


class MarginViolation(RuntimeError):
    """A stability report row came out with a negative margin."""

    def __init__(self, message, row=None, witness_fields=None):
        super().__init__(message)
        self.row = row
        self.witness_fields = witness_fields or {}
