"""Exception hierarchy shared by every stage of the pipeline."""


class AfdcError(Exception):
    """Base class for all errors raised by afdc."""


# geometry / parsing
class ParseError(AfdcError):
    pass


class EmptyFile(ParseError):
    pass


class MalformedLine(ParseError):
    def __init__(self, line_number, text=""):
        self.line_number = line_number
        super().__init__(f"malformed coordinate line {line_number}: {text!r}")


class TooFewPoints(ParseError):
    pass


class CountMismatch(ParseError):
    pass


class GeometryError(AfdcError):
    pass


class DegenerateChord(GeometryError):
    pass


class NonPositiveClearance(GeometryError):
    pass


class SurfaceSplitFailure(GeometryError):
    pass


# rasterizer
class PolygonOutOfWindow(AfdcError):
    pass


# oracle
class OracleError(AfdcError):
    pass


class GroundContact(OracleError):
    pass


class SingularSystem(OracleError):
    pass


# neural core / model
class ShapeMismatch(AfdcError, ValueError):
    pass


class OddSpatialDim(ShapeMismatch):
    pass


class BatchTooSmall(AfdcError, ValueError):
    pass


class IndivisibleSpatialDims(AfdcError, ValueError):
    pass


# persistence
class CorruptFile(AfdcError):
    pass


class VersionMismatch(CorruptFile):
    pass


class ChecksumMismatch(CorruptFile):
    pass


# dataset / training
class NonPositiveStep(AfdcError, ValueError):
    pass


class AllSamplesFailed(AfdcError):
    pass


class TooFewAirfoils(AfdcError, ValueError):
    pass


class EmptySplit(AfdcError):
    pass
