"""Exception hierarchy for the geometry toolkit.

Every failure the analysis can report is a ``GeometryError`` subclass with
structured attributes, so the command layer can turn it into a message and an
exit code without parsing strings.
"""


class GeometryError(Exception):
    """Base class for all toolkit errors."""


class ZeroVector(GeometryError):
    def __init__(self, norm):
        self.norm = float(norm)
        super().__init__(f"vector norm {self.norm:.3e} is below the projective threshold")


class DimensionMismatch(GeometryError):
    def __init__(self, expected, actual, row=None):
        self.expected = expected
        self.actual = actual
        self.row = row
        where = f" at row {row}" if row is not None else ""
        super().__init__(f"expected dimension {expected}, got {actual}{where}")


class NonPositiveScale(GeometryError):
    def __init__(self, value):
        self.value = value
        super().__init__(f"scale must be positive, got {value}")


class InvalidCloud(GeometryError):
    pass


class InvalidGrid(GeometryError):
    pass


class InsufficientNeighbors(GeometryError):
    def __init__(self, volume, v_min, radius=None):
        self.volume = int(volume)
        self.v_min = int(v_min)
        self.radius = radius
        super().__init__(f"{self.volume} neighbours (< {self.v_min}) at radius {radius}")


class UndefinedAtRadius(GeometryError):
    def __init__(self, radius):
        self.radius = radius
        super().__init__(f"no defined dimension sample at radius {radius}")


class NoDefinedSamples(GeometryError):
    def __init__(self, defined):
        self.defined = defined
        super().__init__(f"profile has {defined} defined samples, need at least 2")


class EmptyNeighborhood(GeometryError):
    def __init__(self, radius, coincident=0):
        self.radius = radius
        self.coincident = coincident
        super().__init__(f"no points within {radius} of the center ({coincident} coincident skipped)")


class DegenerateCenter(GeometryError):
    pass


class EmptyContext(GeometryError):
    pass


class ZeroAggregate(GeometryError):
    def __init__(self, norm):
        self.norm = float(norm)
        super().__init__(f"context aggregate has norm {self.norm:.3e}; the context is contradictory")


class MissingContext(GeometryError):
    def __init__(self, token_id):
        self.token_id = token_id
        super().__init__(f"token {token_id} is singular but its context window is empty")


class InfeasibleSpec(GeometryError):
    pass


class OffManifold(GeometryError):
    def __init__(self, distance):
        self.distance = float(distance)
        super().__init__(f"point lies {self.distance:.3e} away from every component")


class UnknownSingularPoint(GeometryError):
    pass


class FormatError(GeometryError):
    """File-format failures raised by ingestion."""


class MalformedHeader(FormatError):
    def __init__(self, message, expected=None, actual=None):
        self.expected = expected
        self.actual = actual
        super().__init__(message)


class NonFiniteValue(FormatError):
    def __init__(self, row, col):
        self.row = row
        self.col = col
        super().__init__(f"non-finite value at row {row}, column {col}")


class ConfigError(GeometryError):
    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")
