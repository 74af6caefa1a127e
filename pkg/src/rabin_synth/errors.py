"""Exception types shared across the package."""


class LtlSyntaxError(ValueError):
    """Bad LTL concrete syntax. `offset` is the byte offset of the problem."""

    def __init__(self, message, offset):
        super().__init__(f"{message} (at offset {offset})")
        self.offset = offset


class HoaError(ValueError):
    """Malformed or invalid HOA input."""


class UnsupportedHoaFeature(HoaError):
    """HOA feature outside the supported subset (e.g. transition-based acceptance)."""


class SchemaError(ValueError):
    """Model/policy file does not match the expected JSON schema."""

    def __init__(self, path, message):
        super().__init__(f"{path}: {message}")
        self.path = path


class AtomMismatchError(ValueError):
    """Automaton atoms are not a subset of the model's atomic propositions."""


class ConvergenceError(RuntimeError):
    """Iterative solver did not converge. Carries the final residual."""

    def __init__(self, message, residual):
        super().__init__(f"{message} (residual {residual:.3e})")
        self.residual = residual


class InstanceTooLargeError(ValueError):
    """Brute-force enumeration guard tripped."""


class InfeasibleEstimateError(ValueError):
    """Parameter-bound estimate admits no (gamma, w_b) pair."""
