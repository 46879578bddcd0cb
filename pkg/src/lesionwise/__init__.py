"""Lesion-wise scoring of 3D segmentation masks.

Reads NIfTI-1 label volumes, groups each mask into lesions (one-voxel
dilation followed by 26-connected labelling), scores every reference lesion
with Dice and HD95, and ranks teams by their per-case ranks.
"""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    GeometryMismatchError,
    LesionwiseError,
    NiftiParseError,
    NoEvaluableLesionsError,
)
from .metrics import (  # noqa: E402
    CaseMetrics,
    ScoringOptions,
    dice,
    filter_small_reference_lesions,
    hd95,
    identify_lesions,
    image_diagonal,
    match_lesions,
    score_case,
)
from .nifti import BinaryMask, LabelVolume, VolumeHeader, binarize, read_volume, write_volume  # noqa: E402
from .ranking import MetricTable, brats_scores, per_case_ranks, summary_stats  # noqa: E402
from .volume_ops import (  # noqa: E402
    connected_components,
    dilate_once,
    directed_surface_distances,
    distance_field,
    surface_voxels,
)
