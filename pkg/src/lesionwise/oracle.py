"""Brute-force reference implementations used to cross-check the fast path.

Nothing here calls into ``volume_ops`` or ``metrics``: components come from a
breadth-first flood fill, dilation and surfaces from explicit neighbour scans,
distances from all-pairs comparisons, and percentiles from sorted lists.
Everything is at least quadratic, so keep inputs to roughly 32^3 or less.
"""

from __future__ import annotations

import itertools
import math
from collections import deque
from fractions import Fraction

import numpy as np

from .errors import EmptyMaskError, NoEvaluableLesionsError
from .metrics import CaseMetrics, LesionScore, ScoringOptions
from .nifti import BinaryMask
from .volume_ops import Component, LesionSet

NEIGHBOURS_26 = [d for d in itertools.product((-1, 0, 1), repeat=3) if d != (0, 0, 0)]
NEIGHBOURS_6 = [(1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0), (0, 0, 1), (0, 0, -1)]


def _voxels(bits) -> list[tuple[int, int, int]]:
    """Foreground voxels in C-order scan."""
    bits = np.asarray(bits, dtype=bool)
    out = []
    nx, ny, nz = bits.shape
    for i in range(nx):
        for j in range(ny):
            for k in range(nz):
                if bits[i, j, k]:
                    out.append((i, j, k))
    return out


def _inside(v, shape) -> bool:
    return all(0 <= c < n for c, n in zip(v, shape))


def flood_fill(voxels, shape) -> list[list[tuple[int, int, int]]]:
    """26-connected groups of ``voxels`` (an iterable in scan order), in
    first-encounter order; each group lists its voxels in C order."""
    voxels = list(voxels)
    remaining = set(voxels)
    groups = []
    for start in voxels:
        if start not in remaining:
            continue
        remaining.discard(start)
        queue = deque([start])
        group = [start]
        while queue:
            x, y, z = queue.popleft()
            for dx, dy, dz in NEIGHBOURS_26:
                n = (x + dx, y + dy, z + dz)
                if n in remaining:
                    remaining.discard(n)
                    queue.append(n)
                    group.append(n)
        groups.append(sorted(group))
    return groups


def _lesion_set(groups, shape, spacing) -> LesionSet:
    labels = np.zeros(shape, dtype=np.int32)
    components = []
    for idx, group in enumerate(groups, start=1):
        arr = np.array(group)
        labels[tuple(arr.T)] = idx
        lo, hi = arr.min(axis=0), arr.max(axis=0) + 1
        components.append(Component(idx, len(group), tuple(slice(int(a), int(b)) for a, b in zip(lo, hi))))
    labels.setflags(write=False)
    return LesionSet(labels, tuple(spacing), tuple(components))


def oracle_components(mask: BinaryMask) -> LesionSet:
    """26-connected components by breadth-first flood fill."""
    groups = flood_fill(_voxels(mask.bits), mask.dims)
    return _lesion_set(groups, mask.dims, mask.spacing)


def oracle_dilate(bits) -> np.ndarray:
    """Every voxel within Chebyshev distance 1 of the foreground."""
    bits = np.asarray(bits, dtype=bool)
    out = np.zeros(bits.shape, dtype=bool)
    for v in _voxels(bits):
        out[v] = True
        for d in NEIGHBOURS_26:
            n = tuple(a + b for a, b in zip(v, d))
            if _inside(n, bits.shape):
                out[n] = True
    return out


def oracle_surface(bits) -> list[tuple[int, int, int]]:
    bits = np.asarray(bits, dtype=bool)
    out = []
    for v in _voxels(bits):
        for d in NEIGHBOURS_6:
            n = tuple(a + b for a, b in zip(v, d))
            if not _inside(n, bits.shape) or not bits[n]:
                out.append(v)
                break
    return out


def _pairwise(p, q, spacing) -> np.ndarray:
    p = np.asarray(p, dtype=float) * spacing
    q = np.asarray(q, dtype=float) * spacing
    diff = p[:, None, :] - q[None, :, :]
    return np.sqrt((diff**2).sum(axis=-1))


def oracle_distance_field(bits, spacing) -> np.ndarray:
    """Distance from every voxel to the nearest foreground voxel, all pairs."""
    bits = np.asarray(bits, dtype=bool)
    src = np.argwhere(bits)
    if len(src) == 0:
        raise EmptyMaskError("empty distance source")
    everywhere = np.argwhere(np.ones(bits.shape, dtype=bool))
    return _pairwise(everywhere, src, np.asarray(spacing, dtype=float)).min(axis=1).reshape(bits.shape)


def oracle_directed_distances(a, b, spacing) -> np.ndarray:
    sa, sb = oracle_surface(a), oracle_surface(b)
    if not sa or not sb:
        raise EmptyMaskError("directed surface distances need two nonempty masks")
    return _pairwise(sa, sb, np.asarray(spacing, dtype=float)).min(axis=1)


def oracle_percentile(values, q: float = 95.0, method: str = "interp") -> float:
    xs = sorted(float(v) for v in values)
    n = len(xs)
    if method == "nearest":
        rank = max(1, math.ceil(Fraction(q) * n / 100))
        return xs[rank - 1]
    pos = (n - 1) * q / 100.0
    lo = math.floor(pos)
    hi = min(lo + 1, n - 1)
    return xs[lo] + (xs[hi] - xs[lo]) * (pos - lo)


def oracle_hd95(a, b, spacing, method: str = "interp") -> float:
    """Pooled two-way surface distances, all pairs, then the 95th percentile."""
    a = np.asarray(a, dtype=bool)
    b = np.asarray(b, dtype=bool)
    if not a.any() or not b.any():
        raise EmptyMaskError("undefined hd95 on empty mask")
    pooled = list(oracle_directed_distances(a, b, spacing)) + list(oracle_directed_distances(b, a, spacing))
    return oracle_percentile(pooled, 95.0, method)


def oracle_lesions(bits) -> list[set]:
    """Lesions as sets of original voxels: flood fill the dilated mask, then
    keep only the voxels that were foreground before dilation."""
    bits = np.asarray(bits, dtype=bool)
    original = set(_voxels(bits))
    grown = flood_fill(_voxels(oracle_dilate(bits)), bits.shape)
    lesions = [set(v for v in g if v in original) for g in grown]
    lesions = [l for l in lesions if l]
    lesions.sort(key=min)
    return lesions


def oracle_score_case(
    reference: BinaryMask, prediction: BinaryMask, options: ScoringOptions | None = None
) -> CaseMetrics:
    """End-to-end lesion-wise score from brute-force primitives and set arithmetic."""
    options = options or ScoringOptions()
    shape, spacing = reference.dims, reference.spacing
    diagonal = math.sqrt(sum((n * s) ** 2 for n, s in zip(shape, spacing)))

    ref_all = oracle_lesions(reference.bits)
    refs = [l for l in ref_all if len(l) >= options.min_lesion_voxels]
    if not refs:
        raise NoEvaluableLesionsError("no evaluable reference lesions")
    preds = oracle_lesions(prediction.bits)

    scores, used = [], set()
    for idx, ref in enumerate(refs, start=1):
        if options.match == "dilated":
            grown = set()
            for v in ref:
                for d in [(0, 0, 0)] + NEIGHBOURS_26:
                    n = tuple(a + b for a, b in zip(v, d))
                    if _inside(n, shape):
                        grown.add(n)
            zone = grown
        else:
            zone = ref
        hits = [j for j, p in enumerate(preds) if p & zone]
        used.update(hits)
        if hits:
            union = set().union(*(preds[j] for j in hits))
            dsc = 2 * len(ref & union) / (len(ref) + len(union))
            ref_bits = np.zeros(shape, dtype=bool)
            ref_bits[tuple(np.array(sorted(ref)).T)] = True
            pred_bits = np.zeros(shape, dtype=bool)
            pred_bits[tuple(np.array(sorted(union)).T)] = True
            h = oracle_hd95(ref_bits, pred_bits, spacing, options.percentile)
            scores.append(LesionScore(idx, dsc, h, "TP", len(ref), tuple(j + 1 for j in hits)))
        else:
            scores.append(LesionScore(idx, 0.0, diagonal, "FN", len(ref)))

    n = len(scores)
    tp = sum(s.classification == "TP" for s in scores)
    return CaseMetrics(
        lesionwise_dsc=sum(s.dice for s in scores) / n,
        lesionwise_hd95=sum(s.hd95 for s in scores) / n,
        per_lesion=tuple(scores),
        L=n,
        TP=tp,
        FN=n - tp,
        FP=len(preds) - len(used),
        diagonal_mm=diagonal,
        excluded_reference_lesions=len(ref_all) - n,
        options=options,
    )
