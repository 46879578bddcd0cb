"""Lesion-wise case scoring.

A case is scored per reference lesion and averaged over the L lesions kept
after small-lesion filtering:

    dsc  = sum_i Dice(I_i) / (TP + FN)
    hd95 = sum_i HD95(I_i) / (TP + FN)

where ``I_i`` pairs reference lesion ``i`` with the union of the predicted
lesions that overlap it. Missed lesions score Dice 0 and the image diagonal as
HD95; predicted lesions overlapping nothing are counted but never scored.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .errors import EmptyMaskError, NoEvaluableLesionsError
from .nifti import BinaryMask, check_same_geometry
from .volume_ops import (
    CUBE,
    LesionSet,
    canonicalize,
    dilate_array,
    foreground_box,
    lesion_set_from_labels,
    surface_distances,
    union_box,
)

MIN_LESION_VOXELS = 50
PERCENTILE = 95.0
PERCENTILE_METHODS = {"interp": "linear", "nearest": "inverted_cdf"}
MATCH_MODES = ("undilated", "dilated")

HD95_CONVENTION = {
    "interp": "95th percentile of the pooled a->b and b->a surface distances, "
    "linear interpolation between order statistics",
    "nearest": "95th percentile of the pooled a->b and b->a surface distances, "
    "nearest rank (ceil(0.95 n)-th smallest)",
}


@dataclass(frozen=True)
class ScoringOptions:
    min_lesion_voxels: int = MIN_LESION_VOXELS
    percentile: str = "interp"
    match: str = "undilated"

    def __post_init__(self):
        if self.min_lesion_voxels < 0:
            raise ValueError("min_lesion_voxels must be >= 0")
        if self.percentile not in PERCENTILE_METHODS:
            raise ValueError(f"percentile must be one of {sorted(PERCENTILE_METHODS)}")
        if self.match not in MATCH_MODES:
            raise ValueError(f"match must be one of {MATCH_MODES}")

    def as_dict(self):
        return {
            "min_lesion_voxels": self.min_lesion_voxels,
            "percentile": self.percentile,
            "match": self.match,
            "hd95_convention": HD95_CONVENTION[self.percentile],
        }


# -- primitives ---------------------------------------------------------------


def dice_arrays(a: np.ndarray, b: np.ndarray) -> float:
    na, nb = int(np.count_nonzero(a)), int(np.count_nonzero(b))
    if na + nb == 0:
        raise EmptyMaskError("undefined dice on empty pair")
    return 2.0 * int(np.count_nonzero(a & b)) / (na + nb)


def dice(a: BinaryMask, b: BinaryMask) -> float:
    """Dice coefficient 2|A∩B| / (|A|+|B|)."""
    check_same_geometry(a, b)
    return dice_arrays(a.bits, b.bits)


def percentile95(values, method: str = "interp") -> float:
    return float(np.percentile(np.asarray(values, dtype=float), PERCENTILE, method=PERCENTILE_METHODS[method]))


def hd95_arrays(a: np.ndarray, b: np.ndarray, spacing, method: str = "interp") -> float:
    if not a.any() or not b.any():
        raise EmptyMaskError("undefined hd95 on empty mask")
    d_ab, d_ba = surface_distances(a, b, spacing)
    return percentile95(np.concatenate([d_ab, d_ba]), method)


def hd95(a: BinaryMask, b: BinaryMask, method: str = "interp") -> float:
    """95th percentile of the pooled two-way surface distances (mm)."""
    check_same_geometry(a, b)
    return hd95_arrays(a.bits, b.bits, a.spacing, method)


def image_diagonal(dims, spacing) -> float:
    """Physical length (mm) of the image diagonal, the HD95 assigned to a missed lesion."""
    return math.sqrt(sum((n * s) ** 2 for n, s in zip(dims, spacing)))


# -- lesion grouping ----------------------------------------------------------


def identify_lesions(mask: BinaryMask) -> LesionSet:
    """Group the foreground into lesions.

    Components are found on the one-voxel dilation of the mask, then mapped
    back onto the original voxels: nearby blobs whose dilations touch become a
    single lesion, and voxel counts refer to the undilated mask.
    """
    bits = mask.bits
    labels = np.zeros(bits.shape, dtype=np.int32)
    box = foreground_box(bits, pad=1)
    if box is not None:
        crop = bits[box]
        grown, _ = ndimage.label(ndimage.binary_dilation(crop, structure=CUBE), structure=CUBE)
        grown[~crop] = 0
        labels[box] = canonicalize(grown)
    return lesion_set_from_labels(labels, mask.spacing)


def filter_small_reference_lesions(lesions: LesionSet, threshold: int = MIN_LESION_VOXELS) -> LesionSet:
    """Drop lesions with fewer than ``threshold`` voxels (a lesion of exactly
    ``threshold`` voxels is kept)."""
    return lesions.subset(c.id for c in lesions.components if c.voxel_count >= threshold)


# -- matching -----------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class LesionPairing:
    """One reference lesion and the predicted lesions overlapping it.

    ``reference_bits`` / ``prediction_bits`` are crops to ``box`` of the
    reference lesion and of the union of its matched predicted lesions.
    """

    reference_lesion_id: int
    matched_prediction_ids: tuple[int, ...]
    reference_voxel_count: int
    box: tuple
    reference_bits: np.ndarray
    prediction_bits: np.ndarray

    @property
    def classification(self) -> str:
        return "TP" if self.matched_prediction_ids else "FN"


@dataclass(frozen=True, eq=False)
class MatchResult:
    pairings: tuple[LesionPairing, ...]
    false_positive_prediction_ids: tuple[int, ...]

    @property
    def L(self) -> int:
        return len(self.pairings)

    @property
    def TP(self) -> int:
        return sum(p.classification == "TP" for p in self.pairings)

    @property
    def FN(self) -> int:
        return sum(p.classification == "FN" for p in self.pairings)

    @property
    def FP(self) -> int:
        return len(self.false_positive_prediction_ids)


def match_lesions(reference: LesionSet, prediction: LesionSet, match: str = "undilated") -> MatchResult:
    """Pair each reference lesion with every predicted lesion sharing a voxel with it.

    With ``match="dilated"`` a predicted lesion matches when it touches the
    one-voxel dilation of the reference lesion instead.
    """
    if match not in MATCH_MODES:
        raise ValueError(f"match must be one of {MATCH_MODES}")
    check_same_geometry(reference, prediction)
    shape = reference.dims
    pred_boxes = {c.id: c.bbox for c in prediction.components}
    pairings = []
    matched_any: set[int] = set()
    for comp in reference.components:
        if match == "dilated":
            box = union_box([comp.bbox], shape, pad=1)
            region = dilate_array(reference.labels[box] == comp.id)
        else:
            box = comp.bbox
            region = reference.labels[box] == comp.id
        hits = np.unique(prediction.labels[box][region])
        matched = tuple(int(h) for h in hits if h != 0)
        matched_any.update(matched)

        pair_box = union_box([comp.bbox] + [pred_boxes[m] for m in matched], shape, pad=1)
        ref_bits = reference.labels[pair_box] == comp.id
        pred_bits = np.isin(prediction.labels[pair_box], matched) if matched else np.zeros_like(ref_bits)
        pairings.append(
            LesionPairing(comp.id, matched, comp.voxel_count, pair_box, ref_bits, pred_bits)
        )
    fps = tuple(c.id for c in prediction.components if c.id not in matched_any)
    return MatchResult(tuple(pairings), fps)


# -- case score ---------------------------------------------------------------


@dataclass(frozen=True)
class LesionScore:
    lesion_id: int
    dice: float
    hd95: float
    classification: str
    reference_voxel_count: int
    matched_prediction_ids: tuple[int, ...] = ()

    def as_dict(self):
        return {
            "lesion_id": self.lesion_id,
            "classification": self.classification,
            "dice": self.dice,
            "hd95": self.hd95,
            "reference_voxel_count": self.reference_voxel_count,
            "matched_prediction_ids": list(self.matched_prediction_ids),
        }


@dataclass(frozen=True)
class CaseMetrics:
    lesionwise_dsc: float
    lesionwise_hd95: float
    per_lesion: tuple[LesionScore, ...]
    L: int
    TP: int
    FN: int
    FP: int
    diagonal_mm: float
    excluded_reference_lesions: int = 0
    options: ScoringOptions = field(default_factory=ScoringOptions)

    def as_dict(self):
        return {
            "dsc": self.lesionwise_dsc,
            "hd95": self.lesionwise_hd95,
            "L": self.L,
            "TP": self.TP,
            "FN": self.FN,
            "FP": self.FP,
            "diagonal_mm": self.diagonal_mm,
            "excluded_reference_lesions": self.excluded_reference_lesions,
            "per_lesion": [s.as_dict() for s in self.per_lesion],
        }


def aggregate(per_lesion, match: MatchResult, diagonal: float, excluded: int, options) -> CaseMetrics:
    n = len(per_lesion)
    return CaseMetrics(
        lesionwise_dsc=sum(s.dice for s in per_lesion) / n,
        lesionwise_hd95=sum(s.hd95 for s in per_lesion) / n,
        per_lesion=tuple(per_lesion),
        L=match.L,
        TP=match.TP,
        FN=match.FN,
        FP=match.FP,
        diagonal_mm=diagonal,
        excluded_reference_lesions=excluded,
        options=options,
    )


@dataclass(frozen=True, eq=False)
class PreparedReference:
    """Reference lesions computed once and reused across predictions."""

    mask: BinaryMask
    all_lesions: LesionSet
    lesions: LesionSet
    options: ScoringOptions

    @property
    def excluded(self) -> int:
        return len(self.all_lesions) - len(self.lesions)


def prepare_reference(reference: BinaryMask, options: ScoringOptions | None = None) -> PreparedReference:
    options = options or ScoringOptions()
    all_lesions = identify_lesions(reference)
    kept = filter_small_reference_lesions(all_lesions, options.min_lesion_voxels)
    if len(kept) == 0:
        raise NoEvaluableLesionsError(
            f"no evaluable reference lesions ({len(all_lesions)} found, none with "
            f">= {options.min_lesion_voxels} voxels)"
        )
    return PreparedReference(reference, all_lesions, kept, options)


def score_prepared(ref: PreparedReference, prediction: BinaryMask) -> CaseMetrics:
    check_same_geometry(ref.mask, prediction)
    options = ref.options
    spacing = ref.mask.spacing
    diagonal = image_diagonal(ref.mask.dims, spacing)
    matched = match_lesions(ref.lesions, identify_lesions(prediction), options.match)
    per_lesion = []
    for p in matched.pairings:
        if p.classification == "TP":
            d = dice_arrays(p.reference_bits, p.prediction_bits)
            h = hd95_arrays(p.reference_bits, p.prediction_bits, spacing, options.percentile)
        else:
            d, h = 0.0, diagonal
        per_lesion.append(
            LesionScore(p.reference_lesion_id, d, h, p.classification, p.reference_voxel_count, p.matched_prediction_ids)
        )
    return aggregate(per_lesion, matched, diagonal, ref.excluded, options)


def score_case(reference: BinaryMask, prediction: BinaryMask, options: ScoringOptions | None = None) -> CaseMetrics:
    """Lesion-wise Dice and HD95 for one reference/prediction pair.

    Raises:
        GeometryMismatchError: dims differ or spacing differs by more than 1e-3 relative.
        NoEvaluableLesionsError: no reference lesion survives the size filter.
    """
    check_same_geometry(reference, prediction)
    return score_prepared(prepare_reference(reference, options), prediction)
