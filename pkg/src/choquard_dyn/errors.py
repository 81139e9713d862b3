"""Exception hierarchy shared by all modules."""


class ChoquardError(Exception):
    """Base class for all errors raised by this package."""


class InvalidParams(ChoquardError, ValueError):
    pass


class MassCriticalTheta(ChoquardError):
    """theta = (1 - s_c)/s_c is undefined at s_c = 0."""


class ThetaUndefined(ChoquardError):
    """Renormalized quantities need 0 < s_c < 1."""


class ResampleOutOfBand(ChoquardError):
    pass


class SingularTime(ChoquardError):
    pass


class NonFiniteField(ChoquardError, ValueError):
    pass


class SupportLeak(ChoquardError):
    """Field mass reaches the outer half of the box; periodic convolution would alias."""


class ZeroField(ChoquardError):
    pass


class ZeroPotential(ChoquardError):
    pass


class NotApplicable(ChoquardError):
    """Data outside the hypotheses of the requested estimate."""


class NoConvergence(ChoquardError):
    pass


class CollapseToZero(ChoquardError):
    pass


class BisectionStall(ChoquardError):
    pass


class RangeError(ChoquardError, ValueError):
    pass


class MeshGap(ChoquardError):
    pass


class InsufficientSnapshots(ChoquardError):
    pass


class NonzeroMomentum(ChoquardError):
    pass


class DegenerateCoefficient(ChoquardError):
    pass


class ConfigError(ChoquardError, ValueError):
    pass
