"""Exception types raised across the toolkit."""


class LesionwiseError(Exception):
    """Base class for every error raised by this package."""


class NiftiParseError(LesionwiseError):
    """A NIfTI-1 stream could not be decoded.

    ``field`` names the header field (or container layer) that was rejected.
    """

    field = "header"

    def __init__(self, message, field=None):
        if field is not None:
            self.field = field
        super().__init__(f"{self.field}: {message}")


class BadMagicError(NiftiParseError):
    field = "magic"


class HeaderLengthError(NiftiParseError):
    field = "sizeof_hdr"


class UnsupportedDatatypeError(NiftiParseError):
    field = "datatype"


class DimensionError(NiftiParseError):
    field = "dim"


class SpacingError(NiftiParseError):
    field = "pixdim"


class TruncatedDataError(NiftiParseError):
    field = "data"


class CorruptGzipError(NiftiParseError):
    field = "gzip"


class GeometryMismatchError(LesionwiseError):
    """Two volumes do not share dims (exactly) and spacing (rel. 1e-3)."""


class EmptyMaskError(LesionwiseError):
    """An operation that needs foreground voxels received an empty mask."""


class NoEvaluableLesionsError(LesionwiseError):
    """The reference has no lesion left after small-lesion filtering."""


class PhantomSpecError(LesionwiseError):
    """A phantom description cannot be rasterized (e.g. lesion out of bounds)."""
