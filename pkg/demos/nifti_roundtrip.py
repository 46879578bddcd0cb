"""Write and read NIfTI-1 label volumes without external imaging libraries.

    python3 demos/nifti_roundtrip.py
"""

import tempfile
from pathlib import Path

import numpy as np

from lesionwise.errors import NiftiParseError
from lesionwise.nifti import LabelVolume, encode_volume, read_volume, write_volume

labels = np.zeros((32, 24, 16), dtype=np.int16)
labels[4:10, 4:10, 4:8] = 1
labels[20:28, 10:20, 6:12] = 2
volume = LabelVolume.from_array(labels, spacing=(0.9375, 0.9375, 3.0))

with tempfile.TemporaryDirectory() as tmp:
    for name, order in (("little.nii.gz", "<"), ("big.nii", ">")):
        path = Path(tmp) / name
        size = write_volume(volume, path, byte_order=order)
        back = read_volume(path)
        print(f"{name:<14} {size:>7} bytes  dims={back.dims} spacing={back.spacing} "
              f"dtype={back.voxels.dtype} equal={back == volume}")

raw = bytearray(encode_volume(volume))
raw[344:348] = b"nope"
try:
    read_volume(bytes(raw))
except NiftiParseError as exc:
    print(f"corrupted magic -> {type(exc).__name__} on field {exc.field!r}: {exc}")
