"""Exception types shared across the package."""


class BonnetLabError(Exception):
    """Base class for all package-specific errors."""


class DimensionMismatch(BonnetLabError):
    """Operands live in Euclidean spaces of different dimension."""


class NoCommonZero(BonnetLabError):
    """A subspace of Killing fields has no common zero within tolerance."""


class DegenerateSystem(BonnetLabError):
    """The common-zero system is solvable but the zero is not unique."""


class RankDeficient(BonnetLabError):
    """The immersion differential lost rank at the queried point."""


class UnknownPreset(BonnetLabError):
    """Preset name not recognised."""


class NotTangent(BonnetLabError):
    """A vector expected to be tangent failed the anchor solve tolerance."""


class ChoiceDependent(BonnetLabError):
    """A quantity defined modulo the anchor kernel depended on the choice."""


class StencilOutOfDomain(BonnetLabError):
    """A finite-difference stencil would leave the chart box."""


class SingularMetric(BonnetLabError):
    """The metric field is not positive definite at the queried point."""


class GramDriftError(BonnetLabError):
    """Frame Gram drift exceeded the safe bound before re-orthonormalization."""


class PathOutsideChart(BonnetLabError):
    """An integration path leaves the chart box."""


class DegenerateCloud(BonnetLabError):
    """Point cloud too degenerate for a unique proper rigid alignment."""


class FieldsFormatError(BonnetLabError):
    """A (metric, second form) data file failed validation."""
