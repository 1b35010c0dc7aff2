"""Exception hierarchy.

Every error raised on bad data derives from :class:`ThermoError`, which the
CLI maps to exit code 1.
"""


class ThermoError(ValueError):
    pass


# imaging
class ConstantImage(ThermoError):
    pass


class EmptyMask(ThermoError):
    pass


class DegenerateContour(ThermoError):
    pass


class FormatError(ThermoError):
    pass


# nonlinear
class SignalTooShort(ThermoError):
    pass


class NoValidNeighbors(ThermoError):
    pass


class DegeneratePointSet(ThermoError):
    pass


class InsufficientBoundary(ThermoError):
    pass


# diffusion
class InvalidRange(ThermoError):
    pass


class ShapeMismatch(ThermoError):
    pass


class StepOutOfRange(ThermoError):
    pass


class EmptyBatch(ThermoError):
    pass


# genmetrics
class TooFewSamples(ThermoError):
    pass


class DimensionMismatch(ThermoError):
    pass


class NotPSD(ThermoError):
    pass


class InvalidRows(ThermoError):
    pass


# classify
class LengthMismatch(ThermoError):
    pass


class EmptyInput(ThermoError):
    pass


class DegenerateDataset(ThermoError):
    pass


class NonFiniteFeature(ThermoError):
    pass


class TooFewSamplesPerClass(ThermoError):
    pass


# synth
class LevelOutOfRange(ThermoError):
    pass


class InvalidParams(ThermoError):
    pass


class Divergence(ThermoError):
    pass


class SelfIntersection(ThermoError):
    pass
