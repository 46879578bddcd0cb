import numpy as np
import pytest

from lesionwise.nifti import BinaryMask


def mask_from(coords, dims, spacing=(1.0, 1.0, 1.0)):
    bits = np.zeros(dims, dtype=bool)
    for c in coords:
        bits[tuple(c)] = True
    return BinaryMask(bits, spacing)


def box_mask(dims, lo, hi, spacing=(1.0, 1.0, 1.0)):
    bits = np.zeros(dims, dtype=bool)
    bits[lo[0]:hi[0], lo[1]:hi[1], lo[2]:hi[2]] = True
    return BinaryMask(bits, spacing)


def random_mask(rng, max_side=16, density=None, spacing=None, min_side=1):
    dims = tuple(int(x) for x in rng.integers(min_side, max_side + 1, size=3))
    if density is None:
        density = rng.uniform(0.1, 0.5)
    if spacing is None:
        spacing = (1.0, 1.0, 1.0)
    return BinaryMask(rng.random(dims) < density, spacing)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
