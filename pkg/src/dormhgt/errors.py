"""Exception hierarchy.

Everything that means "the analysis does not apply to these parameters"
derives from :class:`InapplicableError`; the CLI maps those to exit code 2.
"""


class InvalidParameters(ValueError):
    """Parameter values outside the admissible ranges."""


class InapplicableError(ArithmeticError):
    """Base class for analytically inapplicable parameter sets."""

    kind = "inapplicable"


class BoundaryCase(InapplicableError):
    """A defining inequality holds with equality; no classification is made."""

    kind = "boundary"


class CriticalCase(InapplicableError):
    """An invasion fitness is (numerically) zero."""

    kind = "critical"


class ResidentUnfit(InapplicableError):
    """The resident trait cannot sustain itself (birth rate <= death rate)."""

    kind = "resident-unfit"


class DegenerateCase(InapplicableError):
    """Cp*sigma == tau*(kappa*mu + sigma): the coexistence formulas break down."""

    kind = "degenerate"


class ConvergenceError(RuntimeError):
    """A numerical iteration did not converge within its cap."""
