"""Exception hierarchy shared by all vldht modules."""


class VldhtError(Exception):
    pass


class DomainError(VldhtError, ValueError):
    """Argument outside the mathematical domain of the function."""


class AbsoluteContinuityViolation(VldhtError, ValueError):
    """D(p||q) is infinite because p puts mass where q does not."""


class NonConvergence(VldhtError, RuntimeError):
    pass


class ResourceLimit(VldhtError, RuntimeError):
    """Requested object would exceed the desk-scale guards (codebook size, grid size)."""


class InfeasibleTarget(VldhtError, ValueError):
    def __init__(self, message, achievable=None):
        super().__init__(message)
        self.achievable = achievable


class MalformedMessage(VldhtError, ValueError):
    pass


class DegenerateChannels(VldhtError, ValueError):
    pass


class ConfigError(VldhtError, ValueError):
    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field
