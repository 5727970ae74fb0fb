"""Exception types shared across the toolkit."""


class HenonLabError(Exception):
    """Base class for all toolkit errors."""


class DegenerateParameterError(HenonLabError):
    """A map parameter makes the map non-invertible (e.g. classical b = 0)."""


class MagnitudeOverflowError(HenonLabError):
    """An intermediate value left the representable floating-point range."""


class NotASaddleError(HenonLabError):
    """A saddle orbit was required but the orbit is not a saddle."""


class NearResonanceError(HenonLabError):
    """A chart solve hit |lambda^m - eigenvalue| below the conditioning floor."""


class IllConditionedError(HenonLabError):
    """A derivative product is too ill-conditioned for double precision."""


class NotRealMapError(HenonLabError):
    """A real-coefficient map was required."""


class NotApplicableError(HenonLabError):
    """The requested verdict does not apply to this input."""


class EmptyEnsembleError(HenonLabError):
    """No saddle orbits were found in the scanned period range."""


class ConfigError(HenonLabError):
    """A run configuration failed to parse or validate."""


class SaturationError(HenonLabError):
    """Too many cells of a raster saturated/overflowed to trust the output."""


class InternalInvariantError(HenonLabError):
    """An internal consistency check failed; indicates a bug, not bad input."""
