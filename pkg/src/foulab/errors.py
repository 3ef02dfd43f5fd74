"""Exception hierarchy shared by the library and the CLI."""


class FouLabError(Exception):
    """Base class for all errors raised by foulab."""


class DomainError(FouLabError, ValueError):
    """A parameter lies outside the domain where a quantity is defined."""


class DivergenceError(DomainError):
    """A series defining an asymptotic constant diverges for these parameters."""


class EmbeddingError(FouLabError):
    """Circulant embedding produced a materially negative eigenvalue."""


class DegeneratePathError(FouLabError, ValueError):
    """The observed path carries no information (zero variation or energy)."""


class ConfigurationError(FouLabError, ValueError):
    """A Monte Carlo configuration violates the hypotheses of its target theorem."""
