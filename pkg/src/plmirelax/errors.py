"""Exception types shared across the package."""


class PlmirelaxError(Exception):
    """Base class for package-specific errors."""


class CapExceeded(PlmirelaxError):
    """An enumeration or problem-size cap was exceeded; caps fail loudly."""


class WrongFold(PlmirelaxError):
    """A generator was applied to a spec with an unsupported fold count."""


class DimensionError(PlmirelaxError):
    """Mismatched matrix or vector dimensions."""


class RegistryError(PlmirelaxError):
    """Variable registry misuse: duplicate names, frozen mutation, or mixing
    expressions built over different registries."""


class ConfigError(PlmirelaxError):
    """Invalid configuration, spec file, or violated call precondition."""


class NumericalFailure(PlmirelaxError):
    """A numeric routine failed to converge. Callers must surface this;
    it is never silently reinterpreted as an infeasibility verdict."""
