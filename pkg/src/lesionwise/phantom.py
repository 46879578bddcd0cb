"""Synthetic reference/prediction volume pairs with known lesion layout.

Spheres are rasterized physically: a voxel belongs to the sphere when its
centre lies within ``size`` mm of the lesion centre. Boxes use ``size`` as a
half-extent in voxels. Centres and offsets are voxel indices.

When every lesion's footprint (reference, shifted prediction and noise) is at
least 4 voxels away from every other lesion's footprint in Chebyshev distance,
no two lesions can merge under the one-voxel dilation grouping and the manifest
marks the expected TP/FN/FP outcome as forced.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import PhantomSpecError
from .metrics import MATCH_MODES, MIN_LESION_VOXELS
from .nifti import LabelVolume

SHAPES = ("sphere", "box")
PRESENCE = ("reference", "prediction", "both")
MIN_SEPARATION = 4
NEIGHBOURS_6 = np.array([(1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0), (0, 0, 1), (0, 0, -1)])


@dataclass(frozen=True)
class LesionSpec:
    shape: str
    center: tuple[int, int, int]
    size: float
    present_in: str = "both"
    offset: tuple[int, int, int] = (0, 0, 0)
    prediction_size: Optional[float] = None

    def __post_init__(self):
        if self.shape not in SHAPES:
            raise PhantomSpecError(f"shape must be one of {SHAPES}, got {self.shape!r}")
        if self.present_in not in PRESENCE:
            raise PhantomSpecError(f"present_in must be one of {PRESENCE}, got {self.present_in!r}")
        if self.size <= 0 or (self.prediction_size is not None and self.prediction_size <= 0):
            raise PhantomSpecError("lesion size must be positive")
        object.__setattr__(self, "center", tuple(int(c) for c in self.center))
        object.__setattr__(self, "offset", tuple(int(c) for c in self.offset))


@dataclass(frozen=True)
class PhantomSpec:
    dims: tuple[int, int, int]
    spacing: tuple[float, float, float] = (1.0, 1.0, 1.0)
    lesions: tuple[LesionSpec, ...] = ()
    seed: int = 0
    boundary_noise: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "dims", tuple(int(d) for d in self.dims))
        object.__setattr__(self, "spacing", tuple(float(s) for s in self.spacing))
        object.__setattr__(self, "lesions", tuple(self.lesions))
        if not 0.0 <= self.boundary_noise <= 1.0:
            raise PhantomSpecError("boundary_noise must lie in [0, 1]")

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, data) -> "PhantomSpec":
        data = dict(data)
        n_random = data.pop("random_lesions", None)
        lesions = tuple(LesionSpec(**l) for l in data.pop("lesions", ()))
        if n_random is not None:
            return random_spec(
                data.get("seed", 0),
                dims=data["dims"],
                spacing=data.get("spacing", (1.0, 1.0, 1.0)),
                n_lesions=n_random,
                boundary_noise=data.get("boundary_noise", 0.0),
            )
        return cls(lesions=lesions, **data)


def _extent(shape: str, size: float, spacing) -> np.ndarray:
    if shape == "sphere":
        return np.floor(size / np.asarray(spacing) + 1e-12).astype(int)
    return np.full(3, int(round(size)))


def rasterize(shape: str, center, size: float, spacing) -> np.ndarray:
    """(N, 3) voxel indices covered by one shape."""
    ext = _extent(shape, size, spacing)
    axes = [np.arange(-e, e + 1) for e in ext]
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, 3)
    if shape == "sphere":
        phys = grid * np.asarray(spacing)
        grid = grid[(phys**2).sum(axis=1) <= size**2 + 1e-9]
    return grid + np.asarray(center)


@dataclass
class _Rendered:
    reference: np.ndarray = field(default_factory=lambda: np.zeros((0, 3), dtype=int))
    prediction: np.ndarray = field(default_factory=lambda: np.zeros((0, 3), dtype=int))


def _check_inside(coords: np.ndarray, dims, which: str, index: int) -> None:
    if len(coords) and (coords.min() < 0 or np.any(coords.max(axis=0) >= np.asarray(dims))):
        raise PhantomSpecError(f"lesion {index} ({which}) falls outside the grid {tuple(dims)}")


def _add_noise(coords: np.ndarray, dims, p: float, rng: np.random.Generator) -> np.ndarray:
    """Grow a lesion by a random subset of its outside face neighbours."""
    existing = {tuple(c) for c in coords.tolist()}
    ring = sorted(
        {tuple(c) for c in (coords[:, None, :] + NEIGHBOURS_6[None]).reshape(-1, 3).tolist()} - existing
    )
    ring = [c for c in ring if all(0 <= x < n for x, n in zip(c, dims))]
    if not ring:
        return coords
    keep = rng.random(len(ring)) < p
    extra = np.array([c for c, k in zip(ring, keep) if k], dtype=int).reshape(-1, 3)
    return np.concatenate([coords, extra])


def _render(spec: PhantomSpec) -> list[_Rendered]:
    rng = np.random.default_rng(spec.seed)
    out = []
    for i, les in enumerate(spec.lesions):
        r = _Rendered()
        if les.present_in in ("reference", "both"):
            r.reference = rasterize(les.shape, les.center, les.size, spec.spacing)
            _check_inside(r.reference, spec.dims, "reference", i)
        if les.present_in in ("prediction", "both"):
            size = les.prediction_size if les.prediction_size is not None else les.size
            centre = np.asarray(les.center) + np.asarray(les.offset)
            r.prediction = rasterize(les.shape, centre, size, spec.spacing)
            _check_inside(r.prediction, spec.dims, "prediction", i)
            if spec.boundary_noise > 0:
                r.prediction = _add_noise(r.prediction, spec.dims, spec.boundary_noise, rng)
        out.append(r)
    return out


def _footprint_box(r: _Rendered):
    pts = np.concatenate([r.reference, r.prediction])
    return pts.min(axis=0), pts.max(axis=0)


def separated(rendered: Sequence[_Rendered], gap: int = MIN_SEPARATION) -> bool:
    """True when all lesion footprints are pairwise >= ``gap`` apart (Chebyshev)."""
    boxes = [_footprint_box(r) for r in rendered]
    for i in range(len(boxes)):
        for j in range(i + 1, len(boxes)):
            (lo_i, hi_i), (lo_j, hi_j) = boxes[i], boxes[j]
            axis_gap = np.maximum(lo_j - hi_i, lo_i - hi_j)
            if axis_gap.max() < gap:
                return False
    return True


def _grow(voxels: set, dims) -> set:
    """Voxels within Chebyshev distance 1 of ``voxels``, clipped to the grid."""
    steps = [(a, b, c) for a in (-1, 0, 1) for b in (-1, 0, 1) for c in (-1, 0, 1)]
    grown = {tuple(x + d for x, d in zip(v, step)) for v in voxels for step in steps}
    return {v for v in grown if all(0 <= x < n for x, n in zip(v, dims))}


def build_manifest(
    spec: PhantomSpec, rendered, min_lesion_voxels: int = MIN_LESION_VOXELS, match: str = "undilated"
) -> dict:
    """Expected per-lesion outcomes; ``match`` mirrors the scoring option of the same name."""
    if match not in MATCH_MODES:
        raise PhantomSpecError(f"match must be one of {MATCH_MODES}")
    forced = separated(rendered)
    lesions = []
    counts = {"L": 0, "TP": 0, "FN": 0, "FP": 0, "excluded": 0}
    for i, (les, r) in enumerate(zip(spec.lesions, rendered)):
        ref = {tuple(c) for c in r.reference.tolist()}
        pred = {tuple(c) for c in r.prediction.tolist()}
        overlap = len(ref & pred)
        hit = bool(overlap) if match == "undilated" else bool(_grow(ref, spec.dims) & pred)
        reference_outcome = None
        if ref:
            if len(ref) < min_lesion_voxels:
                reference_outcome = "excluded"
            else:
                reference_outcome = "TP" if hit else "FN"
        prediction_fp = bool(pred) and reference_outcome != "TP"
        if reference_outcome == "excluded":
            counts["excluded"] += 1
        elif reference_outcome is not None:
            counts["L"] += 1
            counts[reference_outcome] += 1
        counts["FP"] += int(prediction_fp)
        lesions.append(
            {
                "index": i,
                "shape": les.shape,
                "present_in": les.present_in,
                "reference_voxels": len(ref),
                "prediction_voxels": len(pred),
                "overlap_voxels": overlap,
                "reference_outcome": reference_outcome,
                "prediction_false_positive": prediction_fp,
            }
        )
    return {
        "spec": spec.to_dict(),
        "min_lesion_voxels": min_lesion_voxels,
        "match": match,
        "forced": forced,
        "expected": counts if forced else None,
        "lesions": lesions,
    }


def generate(
    spec: PhantomSpec, label: int = 1, min_lesion_voxels: int = MIN_LESION_VOXELS, match: str = "undilated"
) -> tuple[LabelVolume, LabelVolume, dict]:
    """Rasterize ``spec`` into (reference, prediction, manifest).

    Raises:
        PhantomSpecError: a lesion (after offset) does not fit in the grid.
    """
    rendered = _render(spec)
    ref = np.zeros(spec.dims, dtype=np.uint8)
    pred = np.zeros(spec.dims, dtype=np.uint8)
    for r in rendered:
        if len(r.reference):
            ref[tuple(r.reference.T)] = label
        if len(r.prediction):
            pred[tuple(r.prediction.T)] = label
    manifest = build_manifest(spec, rendered, min_lesion_voxels, match)
    return (
        LabelVolume.from_array(ref, spec.spacing, 2),
        LabelVolume.from_array(pred, spec.spacing, 2),
        manifest,
    )


def random_spec(
    seed: int,
    dims=(24, 24, 24),
    spacing=(1.0, 1.0, 1.0),
    n_lesions: int | None = None,
    boundary_noise: float = 0.0,
    max_size: float = 4.0,
    attempts: int = 200,
) -> PhantomSpec:
    """Random well-separated lesions mixing hits, misses, shifted and spurious predictions.

    Lesions that cannot be placed within ``attempts`` tries are dropped, so the
    result may hold fewer than ``n_lesions`` (never fewer than one).
    """
    rng = np.random.default_rng(seed)
    dims = tuple(int(d) for d in dims)
    spacing = tuple(float(s) for s in spacing)
    if n_lesions is None:
        n_lesions = int(rng.integers(1, 5))
    placed: list[LesionSpec] = []
    rendered: list[_Rendered] = []
    noise_pad = 1 if boundary_noise > 0 else 0
    for _ in range(n_lesions):
        for _ in range(attempts):
            shape = SHAPES[int(rng.integers(0, 2))]
            if shape == "sphere":
                size = float(rng.uniform(1.0, max_size)) * min(spacing)
            else:
                size = float(rng.integers(1, max(2, int(max_size)) + 1))
            present = PRESENCE[int(rng.choice(3, p=[0.2, 0.2, 0.6]))]
            offset = tuple(int(x) for x in rng.integers(-2, 3, size=3)) if present == "both" else (0, 0, 0)
            pred_size = None
            if present == "both" and rng.random() < 0.3:
                pred_size = size * float(rng.uniform(0.6, 1.4)) if shape == "sphere" else float(max(1, size + rng.integers(-1, 2)))
            ext = _extent(shape, max(size, pred_size or 0.0), spacing)
            margin = ext + np.abs(offset) + noise_pad
            if np.any(2 * margin + 1 > np.asarray(dims)):
                continue
            center = tuple(int(rng.integers(m, d - m)) for m, d in zip(margin, dims))
            candidate = LesionSpec(shape, center, size, present, offset, pred_size)
            trial = PhantomSpec(dims, spacing, (candidate,), seed, 0.0)
            r = _render(trial)[0]
            if noise_pad:
                lo, hi = _footprint_box(r)
                r = _Rendered(np.array([lo - 1, hi + 1]), np.zeros((0, 3), dtype=int))
            if separated(rendered + [r]):
                placed.append(candidate)
                rendered.append(r)
                break
    if not placed:
        raise PhantomSpecError(f"could not place any lesion in grid {dims}")
    return PhantomSpec(dims, spacing, tuple(placed), seed, boundary_noise)


def load_spec(path) -> PhantomSpec:
    with open(path) as fh:
        return PhantomSpec.from_dict(json.load(fh))
