"""Exception hierarchy shared by all modules."""


class HighContrastError(Exception):
    """Base class for every error raised by the toolkit."""


class DomainError(HighContrastError, ValueError):
    """A parameter violates its admissible range."""

    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")


class GridMismatch(HighContrastError, ValueError):
    pass


class PoleError(HighContrastError, ArithmeticError):
    """A cot/csc argument (or a Dirichlet eigenvalue) was hit."""

    def __init__(self, edge, message="argument within tolerance of a pole"):
        self.edge = edge
        super().__init__(f"edge {edge}: {message}")


class SingularDenominator(HighContrastError, ArithmeticError):
    """``B(z) - M(z)`` (or an equivalent boundary system) is numerically singular."""


class NearSingularDispersion(SingularDenominator):
    pass


class NonConvergence(HighContrastError, RuntimeError):
    pass


class WindowAtPole(HighContrastError, ValueError):
    pass


class NotARoot(HighContrastError, ValueError):
    pass


class NotInEffectiveSpace(HighContrastError, ValueError):
    pass


class SupportExceedsWindow(HighContrastError, ValueError):
    pass
