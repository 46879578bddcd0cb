"""NIfTI-1 single-file reader/writer for 3D label volumes.

Only the parts of the format that matter for scoring are interpreted: the
``dim`` and ``pixdim`` geometry, the datatype, and the byte order. Orientation
(qform/sform) and intensity scaling (scl_slope/scl_inter) are ignored.

Voxel arrays are exposed with shape ``dims`` and indexed ``[i, j, k]``; on disk
the first axis varies fastest, as the format requires.
"""

from __future__ import annotations

import gzip
import os
import struct
import zlib
from dataclasses import dataclass
from pathlib import Path
from typing import BinaryIO, Union

import numpy as np

from .errors import (
    BadMagicError,
    CorruptGzipError,
    DimensionError,
    GeometryMismatchError,
    HeaderLengthError,
    SpacingError,
    TruncatedDataError,
    UnsupportedDatatypeError,
)

HEADER_SIZE = 348
DEFAULT_VOX_OFFSET = 352
MAGIC = b"n+1\x00"
GZIP_PREFIX = b"\x1f\x8b"

# datatype code -> numpy base dtype (byte order applied separately)
DATATYPES = {
    2: np.dtype(np.uint8),
    4: np.dtype(np.int16),
    8: np.dtype(np.int32),
    16: np.dtype(np.float32),
}
DATATYPE_CODES = {dt: code for code, dt in DATATYPES.items()}

SPACING_RTOL = 1e-3

Source = Union[bytes, bytearray, memoryview, str, os.PathLike, BinaryIO]


@dataclass(frozen=True)
class VolumeHeader:
    dims: tuple[int, int, int]
    spacing: tuple[float, float, float]
    datatype_code: int
    byte_order: str = "<"

    def __post_init__(self):
        if len(self.dims) != 3 or any(int(d) < 1 for d in self.dims):
            raise DimensionError(f"dims must be 3 positive integers, got {self.dims}")
        if len(self.spacing) != 3 or not all(np.isfinite(s) and s > 0 for s in self.spacing):
            raise SpacingError(f"spacing must be 3 positive reals, got {self.spacing}")
        if self.datatype_code not in DATATYPES:
            raise UnsupportedDatatypeError(f"unsupported datatype code {self.datatype_code}")
        if self.byte_order not in ("<", ">"):
            raise ValueError(f"byte_order must be '<' or '>', got {self.byte_order!r}")
        object.__setattr__(self, "dims", tuple(int(d) for d in self.dims))
        object.__setattr__(self, "spacing", tuple(float(s) for s in self.spacing))

    @property
    def dtype(self) -> np.dtype:
        return DATATYPES[self.datatype_code]


class LabelVolume:
    """A read-only 3D voxel grid with physical spacing.

    Equality compares geometry, datatype and voxel values; the on-disk byte
    order is bookkeeping only.
    """

    __slots__ = ("header", "voxels")

    def __init__(self, header: VolumeHeader, voxels):
        voxels = np.asarray(voxels)
        if voxels.shape != header.dims:
            raise DimensionError(
                f"voxel array shape {voxels.shape} does not match dims {header.dims}"
            )
        voxels = np.array(voxels, dtype=header.dtype, copy=True)
        voxels.setflags(write=False)
        object.__setattr__(self, "header", header)
        object.__setattr__(self, "voxels", voxels)

    def __setattr__(self, name, value):
        raise AttributeError("LabelVolume is immutable")

    @classmethod
    def from_array(cls, voxels, spacing=(1.0, 1.0, 1.0), datatype_code=None) -> "LabelVolume":
        voxels = np.asarray(voxels)
        if datatype_code is None:
            datatype_code = DATATYPE_CODES.get(voxels.dtype.newbyteorder("="))
            if datatype_code is None:
                datatype_code = 2 if voxels.dtype == bool else 8 if voxels.dtype.kind in "iu" else 16
        header = VolumeHeader(voxels.shape, tuple(spacing), datatype_code)
        return cls(header, voxels)

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.header.dims

    @property
    def spacing(self) -> tuple[float, float, float]:
        return self.header.spacing

    def __eq__(self, other):
        if not isinstance(other, LabelVolume):
            return NotImplemented
        return (
            self.dims == other.dims
            and self.spacing == other.spacing
            and self.header.datatype_code == other.header.datatype_code
            and np.array_equal(self.voxels, other.voxels, equal_nan=self.voxels.dtype.kind == "f")
        )

    __hash__ = None

    def __repr__(self):
        return (
            f"LabelVolume(dims={self.dims}, spacing={self.spacing}, "
            f"datatype={self.header.datatype_code})"
        )


class BinaryMask:
    """Foreground/background grid with physical spacing (mm)."""

    __slots__ = ("bits", "spacing")

    def __init__(self, bits, spacing=(1.0, 1.0, 1.0)):
        bits = np.array(bits, dtype=bool, copy=True)
        if bits.ndim != 3 or 0 in bits.shape:
            raise DimensionError(f"mask must be a non-empty 3D grid, got shape {bits.shape}")
        spacing = tuple(float(s) for s in spacing)
        if len(spacing) != 3 or not all(np.isfinite(s) and s > 0 for s in spacing):
            raise SpacingError(f"spacing must be 3 positive reals, got {spacing}")
        bits.setflags(write=False)
        object.__setattr__(self, "bits", bits)
        object.__setattr__(self, "spacing", spacing)

    def __setattr__(self, name, value):
        raise AttributeError("BinaryMask is immutable")

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.bits.shape

    @property
    def count(self) -> int:
        return int(np.count_nonzero(self.bits))

    def __eq__(self, other):
        if not isinstance(other, BinaryMask):
            return NotImplemented
        return self.spacing == other.spacing and np.array_equal(self.bits, other.bits)

    __hash__ = None

    def __repr__(self):
        return f"BinaryMask(dims={self.dims}, spacing={self.spacing}, foreground={self.count})"


def binarize(volume: LabelVolume) -> BinaryMask:
    """Foreground wherever the stored value is nonzero."""
    return BinaryMask(volume.voxels != 0, volume.spacing)


def _read_source(source: Source) -> bytes:
    if isinstance(source, (bytes, bytearray, memoryview)):
        return bytes(source)
    if isinstance(source, (str, os.PathLike)):
        return Path(source).read_bytes()
    return source.read()


def _gunzip(raw: bytes) -> bytes:
    try:
        return gzip.decompress(raw)
    except (OSError, EOFError, zlib.error) as exc:
        raise CorruptGzipError(f"cannot decompress stream ({exc})") from exc


def read_header(raw: bytes) -> tuple[VolumeHeader, int]:
    """Decode the 348-byte header; returns the header and the data offset."""
    if len(raw) < HEADER_SIZE:
        raise HeaderLengthError(f"stream holds {len(raw)} bytes, fewer than a 348-byte header")
    for order in ("<", ">"):
        if struct.unpack_from(order + "i", raw, 0)[0] == HEADER_SIZE:
            break
    else:
        raise HeaderLengthError(
            f"sizeof_hdr is {struct.unpack_from('<i', raw, 0)[0]} (little-endian read), expected 348"
        )
    magic = raw[344:348]
    if magic != MAGIC:
        raise BadMagicError(f"bad magic {magic!r}, expected {MAGIC!r}")

    dim = struct.unpack_from(order + "8h", raw, 40)
    datatype, bitpix = struct.unpack_from(order + "2h", raw, 70)
    pixdim = struct.unpack_from(order + "8f", raw, 76)
    vox_offset = struct.unpack_from(order + "f", raw, 108)[0]

    ndim = dim[0]
    if not 1 <= ndim <= 7:
        raise DimensionError(f"dim[0] = {ndim} is outside 1..7")
    shape = list(dim[1 : ndim + 1])
    if any(d < 1 for d in shape):
        raise DimensionError(f"non-positive extent in dim {shape}")
    while len(shape) > 3 and shape[-1] == 1:
        shape.pop()
    if len(shape) != 3:
        raise DimensionError(f"expected a 3D volume after squeezing singleton axes, got dim {dim[:ndim + 1]}")

    if datatype not in DATATYPES:
        raise UnsupportedDatatypeError(f"datatype code {datatype} is not one of {sorted(DATATYPES)}")
    if bitpix != DATATYPES[datatype].itemsize * 8:
        raise UnsupportedDatatypeError(f"bitpix {bitpix} inconsistent with datatype code {datatype}")

    spacing = tuple(float(p) for p in pixdim[1:4])
    if not all(np.isfinite(s) and s > 0 for s in spacing):
        raise SpacingError(f"pixdim[1..3] = {spacing} must be positive")

    if not np.isfinite(vox_offset) or vox_offset < HEADER_SIZE:
        offset = DEFAULT_VOX_OFFSET
    else:
        offset = int(vox_offset)
    return VolumeHeader(tuple(shape), spacing, datatype, order), offset


def read_volume(source: Source) -> LabelVolume:
    """Parse a ``.nii`` or ``.nii.gz`` stream (bytes, path or binary file).

    Raises a :class:`NiftiParseError` subclass naming the rejected field.
    """
    raw = _read_source(source)
    if raw[:2] == GZIP_PREFIX:
        raw = _gunzip(raw)
    header, offset = read_header(raw)
    dtype = header.dtype.newbyteorder(header.byte_order)
    count = int(np.prod(header.dims))
    needed = offset + count * dtype.itemsize
    if len(raw) < needed:
        raise TruncatedDataError(f"data section needs {needed} bytes, stream has {len(raw)}")
    flat = np.frombuffer(raw, dtype=dtype, count=count, offset=offset)
    voxels = flat.reshape(header.dims, order="F").astype(header.dtype)
    return LabelVolume(header, voxels)


def encode_volume(volume: LabelVolume, byte_order: str | None = None) -> bytes:
    """Serialize to an uncompressed single-file NIfTI-1 byte string."""
    header = volume.header
    order = byte_order or header.byte_order
    if order not in ("<", ">"):
        raise ValueError(f"byte_order must be '<' or '>', got {order!r}")
    dtype = header.dtype.newbyteorder(order)
    buf = bytearray(DEFAULT_VOX_OFFSET)
    struct.pack_into(order + "i", buf, 0, HEADER_SIZE)
    struct.pack_into(order + "8h", buf, 40, 3, *header.dims, 1, 1, 1, 1)
    struct.pack_into(order + "2h", buf, 70, header.datatype_code, dtype.itemsize * 8)
    struct.pack_into(order + "8f", buf, 76, 1.0, *header.spacing, 0.0, 0.0, 0.0, 0.0)
    struct.pack_into(order + "f", buf, 108, float(DEFAULT_VOX_OFFSET))
    struct.pack_into(order + "f", buf, 112, 1.0)  # scl_slope
    buf[123] = 2  # xyzt_units: mm
    buf[344:348] = MAGIC
    data = np.asarray(volume.voxels, dtype=dtype).tobytes(order="F")
    return bytes(buf) + data


def write_volume(
    volume: LabelVolume,
    destination: Union[str, os.PathLike, BinaryIO],
    *,
    compress: bool | None = None,
    byte_order: str | None = None,
) -> int:
    """Write ``volume`` and return the number of bytes written.

    Compression defaults to on when the destination path ends in ``.gz``.
    """
    payload = encode_volume(volume, byte_order)
    if compress is None:
        compress = isinstance(destination, (str, os.PathLike)) and str(destination).endswith(".gz")
    if compress:
        payload = gzip.compress(payload, mtime=0)
    if isinstance(destination, (str, os.PathLike)):
        with open(destination, "wb") as fh:
            fh.write(payload)
    else:
        destination.write(payload)
    return len(payload)


def check_same_geometry(a, b, rtol: float = SPACING_RTOL) -> None:
    """Raise GeometryMismatchError unless dims match exactly and spacing within ``rtol``."""
    if tuple(a.dims) != tuple(b.dims):
        raise GeometryMismatchError(f"dims differ: {tuple(a.dims)} vs {tuple(b.dims)}")
    for sa, sb in zip(a.spacing, b.spacing):
        if abs(sa - sb) > rtol * max(abs(sa), abs(sb)):
            raise GeometryMismatchError(f"spacing differs: {a.spacing} vs {b.spacing}")


__all__ = [
    "BinaryMask",
    "DATATYPES",
    "LabelVolume",
    "VolumeHeader",
    "binarize",
    "check_same_geometry",
    "encode_volume",
    "read_header",
    "read_volume",
    "write_volume",
]
