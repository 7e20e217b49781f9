"""Exception and warning types shared across the package."""


class Reface3dError(Exception):
    """Base class for all package errors."""


# --- file / format errors ---------------------------------------------------

class ParseError(Reface3dError):
    """Malformed file header or structure."""


class UnsupportedDatatype(Reface3dError):
    """Datatype code present in the file is not supported."""


class TruncatedFile(Reface3dError):
    """File ends before the declared data section."""


class IoError(Reface3dError):
    """Path is unreadable or unwritable."""


class MissingTensor(Reface3dError):
    """A tensor required by the configured architecture is absent."""


# --- geometry / shape errors ------------------------------------------------

class DegenerateAffine(Reface3dError):
    """Voxel-to-world affine is singular."""


class ShapeMismatch(Reface3dError):
    """Operands have incompatible shapes."""


class VolumeTooLarge(Reface3dError):
    """Volume exceeds the maximum the tiling scheme can cover."""


# --- numeric / statistical errors -------------------------------------------

class EmptyInput(Reface3dError):
    """Operation requires at least one element."""


class DegenerateRange(Reface3dError):
    """Value range collapses to a point (e.g. constant volume)."""


class NumericalError(Reface3dError):
    """Non-finite values where finite ones are required."""


class ZeroVector(Reface3dError):
    """Vector norm is zero where a direction is required."""


class DegenerateTies(Reface3dError):
    """All pooled values identical; rank test undefined."""


class DegeneratePairs(Reface3dError):
    """All paired differences are zero."""


class InsufficientData(Reface3dError):
    """Too few observations for the statistic."""


class EmptySurface(Reface3dError):
    """Isosurface threshold produces no geometry."""


class PartialReport(Reface3dError):
    """Report is missing blocks required by the requested output."""


class UsageError(Reface3dError):
    """Invalid CLI flags or inputs (exit code 2)."""


# --- warnings ----------------------------------------------------------------

class Reface3dWarning(UserWarning):
    """Base class for package warnings."""


class ObliqueAffineWarning(Reface3dWarning):
    """Affine is far from axis-aligned; reorientation keeps voxels unresampled."""


class IdenticalFacePairWarning(Reface3dWarning):
    """A before/after face pair has (near) zero distance."""


class DegenerateRegionWarning(Reface3dWarning):
    """A region was excluded from pooled statistics (constant original volumes)."""
