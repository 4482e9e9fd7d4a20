"""Exception hierarchy shared by all modules."""

from __future__ import annotations


class PowerLawError(Exception):
    """Base class for every error raised by this package."""


class ThetaOutOfBox(PowerLawError, ValueError):
    pass


class NonPositiveBase(PowerLawError, ValueError):
    pass


class DivergentIntegral(PowerLawError, ArithmeticError):
    pass


class DivergentNorm(DivergentIntegral):
    pass


class DivergentNormalizer(DivergentIntegral):
    pass


class InsufficientProbes(PowerLawError, ValueError):
    pass


class ZeroDensityAtSample(PowerLawError, ValueError):
    pass


class SampleOutsideSupport(PowerLawError, ValueError):
    pass


class MaxSubdivisions(PowerLawError, RuntimeError):
    pass


class NoisyFunction(PowerLawError, RuntimeError):
    pass


class SpaceTooLarge(PowerLawError, ValueError):
    pass


class PairGenerationFailed(PowerLawError, RuntimeError):
    pass


class ResidualExceedsTol(PowerLawError, AssertionError):
    pass


class EmptyBucket(PowerLawError, KeyError):
    pass


class UnsupportedSpace(PowerLawError, NotImplementedError):
    pass


class ThetaDependenceDetected(PowerLawError, AssertionError):
    pass


class PsiBiased(PowerLawError, ValueError):
    pass


class BoundaryTheta(PowerLawError, ValueError):
    pass


class ZeroCovariance(PowerLawError, ArithmeticError):
    pass


class ZeroInformation(PowerLawError, ArithmeticError):
    pass


class PreconditionFailed(PowerLawError, ValueError):
    pass


class ValidityViolated(PreconditionFailed):
    """A closed form was requested outside its stated validity region."""

    def __init__(self, threshold: str, message: str) -> None:
        super().__init__(f"{threshold}: {message}")
        self.threshold = threshold


class NoInteriorMax(PowerLawError, RuntimeError):
    pass


class Divergence(PowerLawError, RuntimeError):
    pass


class DegenerateSample(PowerLawError, ValueError):
    pass


class AssertionFailed(PowerLawError, AssertionError):
    """A named verification step in a CLI chain did not hold."""

    def __init__(self, name: str, detail: str = "") -> None:
        super().__init__(f"{name}: {detail}" if detail else name)
        self.name = name
