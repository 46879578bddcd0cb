import io
import math

import numpy as np
import pytest

from lesionwise.errors import PhantomSpecError
from lesionwise.metrics import ScoringOptions, image_diagonal, score_case
from lesionwise.nifti import binarize, encode_volume
from lesionwise.oracle import oracle_score_case
from lesionwise.phantom import LesionSpec, PhantomSpec, generate, random_spec, rasterize


def test_sphere_rasterization_is_physical():
    pts = rasterize("sphere", (5, 5, 5), 2.0, (1.0, 1.0, 2.0))
    offsets = {tuple(p - 5) for p in pts}
    assert (2, 0, 0) in offsets and (0, 0, 1) in offsets
    assert (0, 0, 2) not in offsets
    assert all((dx**2 + dy**2 + (2 * dz) ** 2) <= 4 for dx, dy, dz in offsets)
    # radius 2 mm, spacing 1 mm: 33 voxel centres within the ball
    assert len(rasterize("sphere", (5, 5, 5), 2.0, (1.0, 1.0, 1.0))) == 33


def test_box_rasterization():
    assert len(rasterize("box", (4, 4, 4), 1, (1.0, 1.0, 1.0))) == 27


def test_identical_pair():
    spec = PhantomSpec((20, 20, 20), lesions=(LesionSpec("sphere", (10, 10, 10), 4.0),))
    ref, pred, manifest = generate(spec)
    assert ref == pred
    result = score_case(binarize(ref), binarize(pred))
    assert (result.lesionwise_dsc, result.lesionwise_hd95) == (1.0, 0.0)
    assert manifest["forced"] and manifest["expected"]["TP"] == 1


def test_one_copied_one_missed():
    spec = PhantomSpec(
        (24, 24, 24),
        (1.0, 1.0, 1.0),
        (LesionSpec("box", (5, 5, 5), 2, "both"), LesionSpec("box", (17, 17, 17), 2, "reference")),
    )
    ref, pred, manifest = generate(spec)
    result = score_case(binarize(ref), binarize(pred))
    assert result.lesionwise_dsc == 0.5
    assert result.lesionwise_hd95 == pytest.approx(image_diagonal((24, 24, 24), (1, 1, 1)) / 2, abs=1e-9)
    assert manifest["expected"] == {"L": 2, "TP": 1, "FN": 1, "FP": 0, "excluded": 0}


def test_seeded_generation_is_byte_identical():
    for seed in (0, 7, 123):
        a = generate(random_spec(seed, boundary_noise=0.3))
        b = generate(random_spec(seed, boundary_noise=0.3))
        assert encode_volume(a[0]) == encode_volume(b[0])
        assert encode_volume(a[1]) == encode_volume(b[1])
        assert a[2] == b[2]


def test_out_of_bounds():
    with pytest.raises(PhantomSpecError):
        generate(PhantomSpec((10, 10, 10), lesions=(LesionSpec("box", (1, 5, 5), 2),)))
    with pytest.raises(PhantomSpecError):
        generate(PhantomSpec((10, 10, 10), lesions=(LesionSpec("box", (5, 5, 5), 2, "both", (4, 0, 0)),)))


def test_bad_descriptor():
    with pytest.raises(PhantomSpecError):
        LesionSpec("torus", (1, 1, 1), 1)
    with pytest.raises(PhantomSpecError):
        LesionSpec("box", (1, 1, 1), 1, "nowhere")


def test_manifest_marks_unseparated_layout():
    spec = PhantomSpec(
        (20, 20, 20),
        lesions=(LesionSpec("box", (5, 5, 5), 2), LesionSpec("box", (10, 5, 5), 2)),
    )
    assert generate(spec)[2]["forced"] is False


def test_spec_dict_roundtrip():
    spec = random_spec(5, boundary_noise=0.1)
    assert PhantomSpec.from_dict(spec.to_dict()) == spec
    again = PhantomSpec.from_dict({"dims": [24, 24, 24], "seed": 5, "random_lesions": 3})
    assert again == random_spec(5, dims=(24, 24, 24), n_lesions=3)


def test_forced_classifications_match(rng):
    checked = 0
    for seed in range(40):
        spec = random_spec(seed, dims=(20, 20, 20), boundary_noise=0.2 * (seed % 2))
        ref, pred, manifest = generate(spec, min_lesion_voxels=15)
        if not manifest["forced"] or manifest["expected"]["L"] == 0:
            continue
        result = score_case(binarize(ref), binarize(pred), ScoringOptions(15))
        e = manifest["expected"]
        assert (result.L, result.TP, result.FN, result.FP) == (e["L"], e["TP"], e["FN"], e["FP"])
        checked += 1
    assert checked >= 20


def test_manifest_follows_match_mode():
    # prediction sits right next to the reference box without overlapping it
    spec = PhantomSpec((20, 20, 20), lesions=(LesionSpec("box", (8, 8, 8), 2, "both", (5, 0, 0)),))
    for match, outcome in (("undilated", "FN"), ("dilated", "TP")):
        ref, pred, manifest = generate(spec, min_lesion_voxels=10, match=match)
        assert manifest["lesions"][0]["reference_outcome"] == outcome
        result = score_case(binarize(ref), binarize(pred), ScoringOptions(10, match=match))
        assert result.TP == manifest["expected"]["TP"]
