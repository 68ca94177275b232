"""Exception types shared across bzlab modules."""


class BzlabError(Exception):
    """Base class for bzlab-specific failures."""


class NoRootError(BzlabError):
    """A Fermi-level bracket could not be established or refined."""


class SchemeOrderError(BzlabError):
    """Measured moment order of a smearing scheme disagrees with its declared order."""


class NonFiniteIntegrandError(BzlabError):
    """An integrand returned a non-finite value.

    Carries the offending k-point in ``kpoint``.
    """

    def __init__(self, message, kpoint=None):
        super().__init__(message)
        self.kpoint = kpoint


class UnmetBudgetError(BzlabError):
    """A quadrature result did not reach its requested error budget."""


class ConfigError(BzlabError):
    """A study config file could not be parsed.

    Carries the 1-based line number in ``line``, when known.
    """

    def __init__(self, message, line=None):
        super().__init__(message)
        self.line = line
