"""Exception types raised across the package."""


class HyperkinError(Exception):
    """Base class for every error raised by hyperkin."""


class InvalidArgument(HyperkinError, ValueError):
    pass


class MalformedLayout(HyperkinError, ValueError):
    """A mode vector that cannot be split into head/body sectors."""


class InconsistentConfiguration(HyperkinError, ValueError):
    """Joint angles that violate the body constraints (zero twist, shared bend)."""


class InvalidState(HyperkinError, RuntimeError):
    """Cached frames do not belong to the configuration they are used with."""


class SingularSystem(HyperkinError, ArithmeticError):
    pass


class NoFurtherStates(HyperkinError):
    """The halving controller is already fully articulated."""


class InvalidTransition(HyperkinError, ValueError):
    pass


class NoFunctionalDofs(HyperkinError, ValueError):
    pass


class ConfigError(HyperkinError, ValueError):
    """An arm configuration file that does not parse."""


class SelfCheckFailure(HyperkinError):
    """Classic and reduced kinematics disagree, or a frozen angle moved."""
