"""Exception hierarchy shared by all modules."""


class NCProbError(Exception):
    """Base class for every error raised by the package."""


class StructuralError(NCProbError):
    """Elements, states or maps that live on incompatible algebras."""


class ValidationError(NCProbError, ValueError):
    """Invalid construction parameters (weights, densities, unimodularity...)."""


class ResourceError(NCProbError):
    """A dimension or enumeration cap would be exceeded."""


class WindowError(NCProbError):
    """An index falls outside the finite window of a sequence model."""


class PreconditionError(NCProbError):
    """A documented precondition of an operation does not hold."""


class ConditioningError(PreconditionError):
    """The conditional expectation onto a candidate subalgebra is not valid."""


class ConfigError(NCProbError):
    """Scenario configuration does not match the schema."""

    def __init__(self, message: str, pointer: str = ""):
        super().__init__(f"{pointer}: {message}" if pointer else message)
        self.pointer = pointer
