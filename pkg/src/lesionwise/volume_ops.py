"""Voxel-grid primitives: 26-connected components, one-voxel dilation,
surface extraction and anisotropic Euclidean distances.

Physical coordinates are voxel centres, ``index * spacing``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import ndimage

from .errors import EmptyMaskError
from .nifti import BinaryMask, check_same_geometry

CUBE = np.ones((3, 3, 3), dtype=bool)  # 26-neighbourhood plus centre
FACES = ndimage.generate_binary_structure(3, 1)  # 6-neighbourhood plus centre

Box = tuple[slice, slice, slice]


@dataclass(frozen=True)
class Component:
    id: int
    voxel_count: int
    bbox: Box


@dataclass(frozen=True, eq=False)
class LesionSet:
    """Labelled partition of a mask's foreground.

    ``labels`` holds the component id of every voxel (0 = background). Ids run
    1..n in order of each component's first voxel in a C-order scan.
    """

    labels: np.ndarray
    spacing: tuple[float, float, float]
    components: tuple[Component, ...] = field(default=())

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.labels.shape

    def __len__(self):
        return len(self.components)

    @property
    def ids(self) -> list[int]:
        return [c.id for c in self.components]

    def get(self, lesion_id: int) -> Component:
        for c in self.components:
            if c.id == lesion_id:
                return c
        raise KeyError(lesion_id)

    def coords(self, lesion_id: int) -> np.ndarray:
        """(N, 3) voxel indices of one component, C-order sorted."""
        box = self.get(lesion_id).bbox
        local = np.argwhere(self.labels[box] == lesion_id)
        return local + np.array([s.start for s in box])

    def mask(self, lesion_id: int) -> BinaryMask:
        return BinaryMask(self.labels == lesion_id, self.spacing)

    def subset(self, keep_ids) -> "LesionSet":
        """Drop every component not in ``keep_ids``; retained ids are unchanged."""
        keep = set(int(i) for i in keep_ids)
        components = tuple(c for c in self.components if c.id in keep)
        labels = self.labels.copy()
        for c in self.components:
            if c.id not in keep:
                region = labels[c.bbox]
                region[region == c.id] = 0
        labels.setflags(write=False)
        return LesionSet(labels, self.spacing, components)

    def partition(self) -> set[frozenset]:
        """Components as sets of flat voxel indices; label-free, for comparisons."""
        return {
            frozenset(np.ravel_multi_index(self.coords(c.id).T, self.dims).tolist())
            for c in self.components
        }


def foreground_box(bits: np.ndarray, pad: int = 0) -> Optional[Box]:
    """Bounding box of the nonzero voxels grown by ``pad`` and clipped to the grid."""
    lows, highs = [], []
    for axis in range(bits.ndim):
        other = tuple(a for a in range(bits.ndim) if a != axis)
        hit = np.flatnonzero(bits.any(axis=other))
        if hit.size == 0:
            return None
        lows.append(max(int(hit[0]) - pad, 0))
        highs.append(min(int(hit[-1]) + 1 + pad, bits.shape[axis]))
    return tuple(slice(lo, hi) for lo, hi in zip(lows, highs))


def union_box(boxes, shape, pad: int = 0) -> Box:
    lows = [min(b[a].start for b in boxes) for a in range(3)]
    highs = [max(b[a].stop for b in boxes) for a in range(3)]
    return tuple(
        slice(max(lo - pad, 0), min(hi + pad, n)) for lo, hi, n in zip(lows, highs, shape)
    )


def canonicalize(labels: np.ndarray) -> np.ndarray:
    """Renumber positive labels 1..n by first voxel in C-order scan.

    Input ids need not be contiguous; background (0) is kept.
    """
    boxes = ndimage.find_objects(labels)
    present = [(i + 1, box) for i, box in enumerate(boxes) if box is not None]
    if not present:
        return np.zeros(labels.shape, dtype=np.int32)
    firsts = []
    for lab, box in present:
        local = labels[box].ravel() == lab
        idx = np.unravel_index(int(np.argmax(local)), labels[box].shape)
        firsts.append(np.ravel_multi_index(tuple(s.start + j for s, j in zip(box, idx)), labels.shape))
    order = np.argsort(np.array(firsts), kind="stable")
    old_ids = np.array([present[i][0] for i in order])
    if np.array_equal(old_ids, np.arange(1, len(present) + 1)):
        return labels.astype(np.int32, copy=False)
    remap = np.zeros(len(boxes) + 1, dtype=np.int32)
    remap[old_ids] = np.arange(1, len(present) + 1, dtype=np.int32)
    return remap[labels]


def label_array(bits: np.ndarray) -> np.ndarray:
    """26-connected labelling with ids in first-encounter order."""
    labels, _ = ndimage.label(bits, structure=CUBE)
    return canonicalize(labels)


def lesion_set_from_labels(labels: np.ndarray, spacing) -> LesionSet:
    n = int(labels.max()) if labels.size else 0
    counts = np.bincount(labels.ravel(), minlength=n + 1)
    boxes = ndimage.find_objects(labels)
    components = tuple(
        Component(i + 1, int(counts[i + 1]), box) for i, box in enumerate(boxes) if box is not None
    )
    labels.setflags(write=False)
    return LesionSet(labels, tuple(spacing), components)


def connected_components(mask: BinaryMask) -> LesionSet:
    """26-connected components of the foreground."""
    labels = label_array(mask.bits)
    return lesion_set_from_labels(labels, mask.spacing)


def dilate_array(bits: np.ndarray) -> np.ndarray:
    out = np.zeros(bits.shape, dtype=bool)
    box = foreground_box(bits, pad=1)
    if box is not None:
        out[box] = ndimage.binary_dilation(bits[box], structure=CUBE)
    return out


def dilate_once(mask: BinaryMask) -> BinaryMask:
    """Dilation by the full 3x3x3 cube, clipped at the grid boundary."""
    return BinaryMask(dilate_array(mask.bits), mask.spacing)


def surface_array(bits: np.ndarray) -> np.ndarray:
    """Foreground voxels with a face neighbour that is background or off-grid."""
    bits = np.asarray(bits, dtype=bool)
    return bits & ~ndimage.binary_erosion(bits, structure=FACES, border_value=0)


def surface_voxels(mask: BinaryMask) -> np.ndarray:
    """(N, 3) indices of the surface voxels, C-order sorted."""
    return np.argwhere(surface_array(mask.bits))


@dataclass(frozen=True, eq=False)
class DistanceField:
    values: np.ndarray
    spacing: tuple[float, float, float]

    @property
    def dims(self):
        return self.values.shape


def distance_array(source: np.ndarray, spacing) -> np.ndarray:
    if not source.any():
        raise EmptyMaskError("empty distance source")
    return ndimage.distance_transform_edt(~source, sampling=tuple(float(s) for s in spacing))


def distance_field(source: BinaryMask) -> DistanceField:
    """Exact Euclidean distance (mm) from every voxel to the nearest source voxel."""
    values = distance_array(source.bits, source.spacing)
    values.setflags(write=False)
    return DistanceField(values, source.spacing)


def surface_distances(a: np.ndarray, b: np.ndarray, spacing) -> tuple[np.ndarray, np.ndarray]:
    """Directed surface distances a->b and b->a for two boolean grids.

    Works on the joint bounding box (grown by one voxel) so the cost follows
    the lesion size rather than the image size.
    """
    if not a.any() or not b.any():
        raise EmptyMaskError("surface distances need two nonempty masks")
    box = foreground_box(a | b, pad=1)
    a, b = a[box], b[box]
    sa, sb = surface_array(a), surface_array(b)
    d_ab = distance_array(sb, spacing)[sa]
    d_ba = distance_array(sa, spacing)[sb]
    return d_ab, d_ba


def directed_surface_distances(source: BinaryMask, target: BinaryMask) -> np.ndarray:
    """Distance (mm) from each surface voxel of ``source`` to the nearest surface
    voxel of ``target``, listed in C order of the source surface voxels."""
    check_same_geometry(source, target)
    if source.count == 0 or target.count == 0:
        raise EmptyMaskError("directed surface distances need two nonempty masks")
    return surface_distances(source.bits, target.bits, source.spacing)[0]
