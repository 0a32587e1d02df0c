"""Exception hierarchy shared across the package.

Two broad families matter to callers: input/parameter problems
(``InputError`` subclasses, CLI exit code 2) and numerical guards that
fire when a computation cannot be trusted on the given discretization
(``NumericalGuardError`` subclasses, CLI exit code 3).
"""


class FreemassError(Exception):
    """Base class for all package errors."""


class InputError(FreemassError):
    """Invalid parameters, configuration, or file contents."""


class DomainError(InputError):
    """A numeric argument is outside its allowed domain."""


class NormalizationViolation(InputError):
    """A state or operator family violates its normalization constraint."""


class NotContractive(InputError):
    """Operation requires a contractive state (positive twist) but got none."""


class UnknownOutcome(InputError):
    """Outcome label not present in the operation measure."""


class ConfigError(InputError):
    """Experiment configuration file is malformed or inconsistent."""


class NumericalGuardError(FreemassError):
    """A discretization guard tripped; results would be unreliable."""


class GridTooNarrow(NumericalGuardError):
    """Significant probability mass sits at or beyond the grid boundary."""


class AliasingRisk(NumericalGuardError):
    """Momentum content too close to the spectral band edge to propagate."""


class ZeroProbabilityReadout(NumericalGuardError):
    """Conditioning on a readout whose probability is numerically zero."""


class ZeroProbabilityOutcome(NumericalGuardError):
    """Posterior requested for an outcome with vanishing probability."""


class ZeroProbabilitySet(NumericalGuardError):
    """Subensemble requested for an outcome set with vanishing probability."""


class CompletenessViolation(NumericalGuardError):
    """An effect family fails its resolution-of-identity check."""


class IncompatibleModel(NumericalGuardError):
    """Model has no position-diagonal effect representation."""


class DegenerateKraus(NumericalGuardError):
    """An outcome's Kraus family is identically zero; dilation undefined."""
