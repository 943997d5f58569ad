"""Exception types raised by dbarlab."""


class DbarLabError(Exception):
    """Base class for every error raised by this package."""


class InvalidInputError(DbarLabError, ValueError):
    pass


class DomainError(DbarLabError, ValueError):
    """A point or region lies outside the domain an operation is defined on."""


class ParameterError(DbarLabError, ValueError):
    pass


class StencilError(DbarLabError, ValueError):
    """The grid is too small for the finite-difference stencil."""


class SupportError(DbarLabError, ValueError):
    """A field that must be compactly supported touches its patch boundary."""


class SingularityError(DbarLabError, ArithmeticError):
    pass


class IN1ViolationError(DbarLabError, ArithmeticError):
    """|dbar u| / |u| is unbounded above the zero floor."""


class NoContractionError(DbarLabError, ArithmeticError):
    pass


class IterationError(DbarLabError, ArithmeticError):
    pass


class ConditioningError(DbarLabError, ArithmeticError):
    pass
