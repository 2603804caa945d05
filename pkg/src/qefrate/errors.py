"""Exception hierarchy shared by all qefrate modules."""


class QefError(Exception):
    """Base class for all errors raised by this package."""


class NotSkewHermitian(QefError):
    pass


class EigFailure(QefError):
    pass


class SingularMatrix(QefError):
    pass


class ImaginaryResidual(QefError):
    """ln det came out with a non-negligible imaginary part.

    For the matrices this package feeds into log-determinants, a real
    logarithm is guaranteed on the admissible parameter range, so this error
    doubles as an admissibility sentinel.
    """

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class NotHurwitz(QefError):
    pass


class IllConditioned(QefError):
    pass


class InvalidParams(QefError):
    """Model parameters violate a structural constraint.

    ``field`` names the offending input so callers (and the CLI) can report
    it machine-readably.
    """

    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field


class GramianUnavailable(QefError):
    pass


class SingularResolvent(QefError):
    pass


class GridTooCoarse(QefError):
    pass


class NotAdmissible(QefError):
    def __init__(self, message, margin=None):
        super().__init__(message)
        self.margin = margin


class TailBoundFailure(QefError):
    pass


class SingularPencil(QefError):
    pass


class BlowUp(QefError):
    pass


class HermitianDriftError(QefError):
    pass


class ZeroEigenvalue(QefError):
    def __init__(self, message, min_omega=None):
        super().__init__(message)
        self.min_omega = min_omega


class SpectralConditionViolated(QefError):
    def __init__(self, message, spectral_radius=None):
        super().__init__(message)
        self.spectral_radius = spectral_radius


class SingularMho(QefError):
    pass


class NonSquareS(QefError):
    pass


class FactorizationFailure(QefError):
    pass


class DegenerateSamples(QefError):
    pass


class TruncationTooSmall(QefError):
    pass
