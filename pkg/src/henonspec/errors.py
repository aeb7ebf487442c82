"""Exception hierarchy shared by every stage."""


class HenonError(Exception):
    """Base class for all toolkit errors."""


class DegenerateInverse(HenonError):
    pass


class NoSaddle(HenonError):
    pass


class NotConverged(HenonError):
    pass


class OrbitEscaped(HenonError):
    pass


class GrowthStalled(HenonError):
    pass


class EscapedDomain(HenonError):
    pass


class TooFewSamples(HenonError):
    pass


class BracketInvalid(HenonError):
    pass


class ManifoldGrowthFailed(HenonError):
    pass


class GeometryInconsistent(HenonError):
    pass


class NoSignChange(HenonError):
    pass


class MultipleCandidates(HenonError):
    pass


class BindingUnavailable(HenonError):
    pass


class FieldUndefined(HenonError):
    pass


class NotControlled(HenonError):
    pass


class ComponentAmbiguous(HenonError):
    pass


class HorizonExceeded(HenonError):
    pass


class ResolutionLoss(HenonError):
    pass


class InsufficientSamples(HenonError):
    pass


class EmptyOrbitSet(HenonError):
    pass


class GridTooCoarse(HenonError):
    pass


class FitUnstable(HenonError):
    pass


class TargetOutOfRange(HenonError):
    pass


class ConfigError(HenonError):
    pass


class StageError(HenonError):
    """Wraps a failure inside a pipeline stage, keeping the stage name."""

    def __init__(self, stage, cause):
        super().__init__(f"stage {stage!r} failed: {cause}")
        self.stage = stage
        self.cause = cause
