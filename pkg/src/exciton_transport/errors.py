"""Exception hierarchy shared by all modules."""


class ExcitonError(Exception):
    """Base class for errors raised by this package."""


class InvalidParameterError(ExcitonError, ValueError):
    """A parameter is outside its allowed domain."""


class DimensionMismatchError(ExcitonError, ValueError):
    """Array or state dimensions are inconsistent with the lattice."""


class NumericalError(ExcitonError, RuntimeError):
    """A numerical routine failed (eigensolver, integrator)."""


class StepSizeUnderflowError(NumericalError):
    """The adaptive step refinement shrank the step below its floor."""


class ConfigError(ExcitonError):
    """Invalid or incomplete run configuration.

    ``path`` is the dotted key path of the offending field.
    """

    def __init__(self, path, message):
        self.path = path
        super().__init__(f"{path}: {message}")


class SiteIndexError(ExcitonError, IndexError):
    """A site or ring index does not exist on the lattice."""
