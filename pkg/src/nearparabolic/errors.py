"""Exception types shared across the package."""


class NearParabolicError(Exception):
    """Base class for every error raised by this package."""


class DigitError(NearParabolicError, ValueError):
    """A continued-fraction digit is zero, negative, or below the type floor."""


class DepthError(NearParabolicError, ValueError):
    """A requested depth exceeds the available digits."""


class AngleDomainError(NearParabolicError, ValueError):
    """A rotation number falls outside the open unit interval."""


class OutOfDomain(NearParabolicError, ValueError):
    """A point lies outside the domain of a map."""

    def __init__(self, z, message="point outside the domain"):
        super().__init__(f"{message}: {z!r}")
        self.z = z


class NoSigmaError(NearParabolicError, RuntimeError):
    """Newton iteration for the non-zero fixed point did not converge."""


class PoleError(NearParabolicError, ValueError):
    """Evaluation at a pole of the covering map."""


class BranchError(NearParabolicError, ValueError):
    """No logarithm branch satisfies the requested window or cut."""


class ChartQualityError(NearParabolicError, RuntimeError):
    """The Fatou chart did not reach the requested Abel residual."""

    def __init__(self, residual, target):
        super().__init__(f"Abel residual {residual:.3e} above target {target:.3e}")
        self.residual = residual
        self.target = target


class InversionError(NearParabolicError, RuntimeError):
    """Newton inversion of the Fatou chart stagnated."""

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class ExtensionDomainError(NearParabolicError, ValueError):
    """No admissible iterate count exists for a chart extension."""


class AnchorError(NearParabolicError, ValueError):
    """The model-map anchor violates the cylinder condition."""


class RunawayError(NearParabolicError, RuntimeError):
    """The sector pullback count exceeded its cap."""


class EscapeError(NearParabolicError, RuntimeError):
    """An orbit left the domain of the map mid-flight."""

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class RepresentativeError(NearParabolicError, ValueError):
    """No integer translate of a log-branch lands in the sector hull."""


class DescentStuckError(NearParabolicError, RuntimeError):
    """Neither classification branch applies during the level descent."""

    def __init__(self, message, level):
        super().__init__(message)
        self.level = level


class ConfigError(NearParabolicError, ValueError):
    """Invalid run configuration."""
