"""Exception types raised across the package."""


class KSRingError(Exception):
    pass


class TailDivergence(KSRingError):
    pass


class ModeDivergence(KSRingError):
    pass


class SingularEvaluation(KSRingError):
    pass


class DecayHypothesisViolated(KSRingError):
    pass


class PoissonUndefined(KSRingError):
    pass


class AsymptoticMismatch(KSRingError):
    pass


class CutoffOverlap(KSRingError):
    pass


class NoSignChange(KSRingError):
    pass


class LinearSolveFailure(KSRingError):
    pass


class TimestepUnderflow(KSRingError):
    pass


class InterpolationOutOfDomain(KSRingError):
    pass


class ConfigInvalid(KSRingError):
    pass


class OutputUnwritable(KSRingError):
    pass


class SeriesMissing(KSRingError):
    pass
