"""Exception types shared across the engine."""


class ConfigurationError(ValueError):
    """Invalid run configuration (deck invariants, bad batch/group counts)."""


class DomainError(ValueError):
    """A position that should be inside the simulation box is not."""


class IntegrityError(RuntimeError):
    """State violated a structural invariant (runaway particle, NaN field)."""


class BreakdownError(ArithmeticError):
    """A Krylov iteration produced NaN or broke down with nonzero residual."""


class SolverFailure(RuntimeError):
    """A field solve did not converge; carries the solver report."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class DeckParseError(ValueError):
    """Deck file could not be parsed; points at the offending line."""

    def __init__(self, message, path=None, line=None):
        loc = ""
        if path is not None:
            loc = f"{path}:"
        if line is not None:
            loc += f"{line}: "
        elif path is not None:
            loc += " "
        super().__init__(loc + message)
        self.path = path
        self.line = line
