"""Exception types raised across the package."""


class OracleMarchError(Exception):
    """Base class for all package-specific errors."""


class OriginOutsideSphere(OracleMarchError):
    """Ray origin lies outside the unification sphere."""


class PixelOutOfBounds(OracleMarchError):
    """Pixel coordinates fall outside the image."""


class InvalidCount(OracleMarchError):
    """A sample or iteration count is not positive."""


class OutOfRange(OracleMarchError):
    """A depth value lies outside the configured depth range."""


class BehindAverageCamera(OracleMarchError):
    """A ray would place samples behind the average camera's near hemisphere."""


class DegeneratePDF(OracleMarchError):
    """PDF mass is effectively zero (only raised when fallback is disabled)."""


class InvalidKernel(OracleMarchError):
    """Filter kernel size must be odd and >= 1."""


class ShapeMismatch(OracleMarchError):
    """Array shapes are inconsistent with the configuration."""


class MissingCache(OracleMarchError):
    """backward() called without a forward cache."""


class DatasetMissingDepth(OracleMarchError):
    """Oracle training requires depth buffers the dataset does not have."""


class IncompatibleCheckpoint(OracleMarchError):
    """Checkpoint configuration does not match the requested operation."""


class VersionMismatch(OracleMarchError):
    """Checkpoint file has an unrecognized format version."""


class CorruptFile(OracleMarchError):
    """Checkpoint or dataset file is truncated or malformed."""


class PoseOutsideViewCell(OracleMarchError):
    """Pose violates the view cell's position or rotation limits."""


class EmptySplit(OracleMarchError):
    """Requested dataset split contains no images."""


class LocalSamplingNeedsDepth(OracleMarchError):
    """Ground-truth-local sampling requested without per-ray depth."""
