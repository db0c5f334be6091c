"""Landmark tracks: gap interpolation, temporal smoothing, similarity
alignment, mouth ROI geometry, and the frame-crop pipeline."""
import numpy as np
import pytest

from avsrkit.errors import (
    AllInvalidError,
    BoundsError,
    DegenerateSourceError,
    OutOfFrameWarning,
)
from avsrkit.landmarks import (
    CropPlan,
    LandmarkPreprocessor,
    LandmarkTrack,
    SimilarityTransform,
    align_track,
    apply_frames,
    estimate_similarity,
    flip_points,
    interpolate_gaps,
    mouth_roi,
    plan_augmentation,
    read_landmarks,
    read_reference,
    smooth,
    write_landmarks,
)

from _oracles import naive_interpolate, naive_moving_average


def random_track(rng, t, all_valid=True):
    frames = rng.normal(loc=100.0, scale=20.0, size=(t, 68, 2))
    valid = np.ones(t, dtype=bool)
    if not all_valid and t > 2:
        holes = rng.choice(t, size=max(1, t // 4), replace=False)
        valid[holes] = False
        valid[0] = valid[-1] = valid[int(rng.integers(t))] = True
    return LandmarkTrack(frames, valid)


# ----------------------------------------------------------------------
# Track container
# ----------------------------------------------------------------------

def test_track_shape_and_freeze():
    rng = np.random.default_rng(401)
    track = random_track(rng, 5)
    assert track.frame_count == 5
    with pytest.raises(ValueError):
        track.frames[0, 0, 0] = 1.0
    with pytest.raises(ValueError):
        LandmarkTrack(np.zeros((3, 60, 2)), np.ones(3, dtype=bool))
    with pytest.raises(AllInvalidError):
        LandmarkTrack(np.zeros((3, 68, 2)), np.zeros(3, dtype=bool))


# ----------------------------------------------------------------------
# Interpolation and smoothing
# ----------------------------------------------------------------------

def test_interpolation_matches_per_coordinate_oracle():
    rng = np.random.default_rng(409)
    for _ in range(50):
        t = int(rng.integers(3, 40))
        track = random_track(rng, t, all_valid=False)
        got = interpolate_gaps(track)
        want = naive_interpolate(track.frames, track.valid)
        np.testing.assert_allclose(got.frames, want, atol=1e-9)
        assert got.all_valid()
        kept = track.valid
        np.testing.assert_array_equal(got.frames[kept], track.frames[kept])


def test_interpolation_is_idempotent():
    rng = np.random.default_rng(419)
    track = random_track(rng, 20, all_valid=False)
    once = interpolate_gaps(track)
    twice = interpolate_gaps(once)
    np.testing.assert_array_equal(once.frames, twice.frames)


def test_interpolation_holds_edges():
    """Invalid leading or trailing frames copy the nearest valid frame."""
    frames = np.zeros((4, 68, 2))
    frames[1] = 10.0
    frames[2] = 20.0
    valid = np.array([False, True, True, False])
    out = interpolate_gaps(LandmarkTrack(frames, valid))
    np.testing.assert_allclose(out.frames[0], 10.0)
    np.testing.assert_allclose(out.frames[3], 20.0)


def test_smoothing_matches_boundary_shrunk_mean():
    rng = np.random.default_rng(421)
    for window in (1, 2, 5, 12):
        t = int(rng.integers(window, window + 30))
        track = random_track(rng, t)
        got = smooth(track, window)
        back = window // 2
        fwd = window - back - 1
        want = naive_moving_average(track.frames.reshape(t, -1), back, fwd)
        np.testing.assert_allclose(got.frames.reshape(t, -1), want, atol=1e-9)


def test_smoothing_is_linear():
    rng = np.random.default_rng(431)
    a = random_track(rng, 25)
    b = random_track(rng, 25)
    combo = LandmarkTrack(2.0 * a.frames + 3.0 * b.frames, a.valid)
    lhs = smooth(combo, 12).frames
    rhs = 2.0 * smooth(a, 12).frames + 3.0 * smooth(b, 12).frames
    np.testing.assert_allclose(lhs, rhs, atol=1e-9)


def test_smoothing_linear_ramp_interior_shift():
    """A centered mean of window 12 (6 back, 5 forward) shifts a unit
    ramp by exactly -0.5 in the interior; flat signals are unchanged."""
    t = 40
    ramp = np.arange(t, dtype=float)
    frames = np.tile(ramp[:, None, None], (1, 68, 2))
    out = smooth(LandmarkTrack(frames, np.ones(t, dtype=bool)), 12)
    interior = out.frames[6 : t - 5, 0, 0]
    np.testing.assert_allclose(interior, ramp[6 : t - 5] - 0.5, atol=1e-9)
    flat = np.tile(np.full(t, 7.0)[:, None, None], (1, 68, 2))
    out2 = smooth(LandmarkTrack(flat, np.ones(t, dtype=bool)), 12)
    np.testing.assert_allclose(out2.frames, 7.0, atol=1e-12)


def test_smoothing_requires_valid_track():
    frames = np.zeros((5, 68, 2))
    valid = np.array([True, False, True, True, True])
    with pytest.raises(ValueError):
        smooth(LandmarkTrack(frames, valid), 3)


# ----------------------------------------------------------------------
# Similarity alignment
# ----------------------------------------------------------------------

def test_similarity_recovers_planted_transform():
    """Scale 2, rotation 30 degrees, translation (5, -3), recovered to
    machine precision from clean correspondences."""
    rng = np.random.default_rng(433)
    src = rng.normal(size=(68, 2)) * 10.0
    angle = np.pi / 6.0
    rot = np.array(
        [[np.cos(angle), -np.sin(angle)], [np.sin(angle), np.cos(angle)]]
    )
    dst = 2.0 * src @ rot.T + np.array([5.0, -3.0])
    est = estimate_similarity(src, dst)
    np.testing.assert_allclose(est.scale, 2.0, atol=1e-9)
    np.testing.assert_allclose(est.rotation, angle, atol=1e-9)
    np.testing.assert_allclose(est.translation, [5.0, -3.0], atol=1e-9)
    np.testing.assert_allclose(est.residual, 0.0, atol=1e-9)
    np.testing.assert_allclose(est.apply(src), dst, atol=1e-9)


def test_similarity_residual_is_a_minimum():
    """No nearby scale/rotation/translation does better than the
    estimate on noisy correspondences."""
    rng = np.random.default_rng(439)
    src = rng.normal(size=(68, 2)) * 8.0
    angle = 0.7
    rot = np.array(
        [[np.cos(angle), -np.sin(angle)], [np.sin(angle), np.cos(angle)]]
    )
    dst = 1.4 * src @ rot.T + np.array([2.0, 9.0]) + rng.normal(size=(68, 2)) * 0.5
    est = estimate_similarity(src, dst)

    def objective(scale, theta, tx, ty):
        r = np.array(
            [[np.cos(theta), -np.sin(theta)], [np.sin(theta), np.cos(theta)]]
        )
        mapped = scale * src @ r.T + np.array([tx, ty])
        return float(np.sum((mapped - dst) ** 2))

    base = objective(est.scale, est.rotation, *est.translation)
    np.testing.assert_allclose(base, est.residual, atol=1e-9)
    for _ in range(100):
        d = rng.normal(size=4) * 0.01
        perturbed = objective(
            est.scale + d[0],
            est.rotation + d[1],
            est.translation[0] + d[2],
            est.translation[1] + d[3],
        )
        assert perturbed >= base - 1e-12


def test_similarity_rejects_degenerate_source():
    with pytest.raises(DegenerateSourceError):
        estimate_similarity(np.ones((68, 2)), np.ones((68, 2)))


def test_similarity_matrix_matches_apply():
    """matrix is the 2 x 2 scale-rotation block; apply adds translation."""
    rng = np.random.default_rng(443)
    t = SimilarityTransform(1.5, 0.3, (2.0, -1.0))
    assert t.matrix.shape == (2, 2)
    np.testing.assert_allclose(np.linalg.det(t.matrix), 1.5**2, atol=1e-12)
    pts = rng.normal(size=(10, 2))
    via_matrix = pts @ t.matrix.T + np.array([2.0, -1.0])
    np.testing.assert_allclose(t.apply(pts), via_matrix, atol=1e-12)


def test_align_track_maps_every_frame_to_reference_shape():
    rng = np.random.default_rng(449)
    reference = rng.normal(size=(68, 2)) * 10.0
    frames = []
    for i in range(6):
        angle = 0.1 * i
        rot = np.array(
            [[np.cos(angle), -np.sin(angle)], [np.sin(angle), np.cos(angle)]]
        )
        frames.append((1.0 + 0.1 * i) * reference @ rot.T + i)
    track = LandmarkTrack(np.array(frames), np.ones(6, dtype=bool))
    aligned, transforms = align_track(track, reference)
    assert len(transforms) == 6
    for t in range(6):
        np.testing.assert_allclose(aligned.frames[t], reference, atol=1e-6)


# ----------------------------------------------------------------------
# ROI and crops
# ----------------------------------------------------------------------

def test_mouth_roi_centers_on_median_centroid():
    frames = np.full((5, 68, 2), 50.0)
    frames[:, 48:68, 0] = 80.0
    frames[:, 48:68, 1] = 60.0
    track = LandmarkTrack(frames, np.ones(5, dtype=bool))
    plan = mouth_roi(track, roi_size=40)
    assert plan.roi_center == (80, 60)
    assert plan.roi_origin == (60, 40)


def test_mouth_roi_ignores_outlier_frames():
    """The median center shrugs off one wild frame that would drag a
    mean by dozens of pixels."""
    frames = np.full((9, 68, 2), 50.0)
    frames[:, 48:68, :] = 100.0
    frames[4, 48:68, :] = 900.0
    track = LandmarkTrack(frames, np.ones(9, dtype=bool))
    plan = mouth_roi(track, roi_size=40)
    assert plan.roi_center == (100, 100)


def test_mouth_roi_clamps_into_image_with_warning():
    frames = np.full((3, 68, 2), 5.0)
    track = LandmarkTrack(frames, np.ones(3, dtype=bool))
    with pytest.warns(OutOfFrameWarning):
        plan = mouth_roi(track, image_size=(100, 100), roi_size=40)
    assert plan.roi_origin == (0, 0)
    with pytest.raises(BoundsError):
        mouth_roi(track, image_size=(30, 30), roi_size=40)


def test_plan_augmentation_is_seeded_and_in_bounds():
    base = CropPlan((60, 60), roi_size=120)
    a = plan_augmentation(base, np.random.default_rng(5), crop_size=112)
    b = plan_augmentation(base, np.random.default_rng(5), crop_size=112)
    assert a == b
    assert a.aug_offset is not None
    dx, dy = a.aug_offset
    assert 0 <= dx <= 8 and 0 <= dy <= 8
    flips = {
        plan_augmentation(base, np.random.default_rng(s)).flip for s in range(30)
    }
    assert flips == {True, False}


def test_crop_plan_validation():
    with pytest.raises(ValueError):
        CropPlan((0, 0), roi_size=100, crop_size=120)
    with pytest.raises(ValueError):
        CropPlan((0, 0), roi_size=120, crop_size=112, aug_offset=(9, 0))
    plan = CropPlan((60, 60), roi_size=120, crop_size=112, aug_offset=(8, 0))
    assert plan.to_json()["aug_offset"] == [8, 0]


def test_apply_frames_crop_flip_grayscale_normalize():
    rng = np.random.default_rng(457)
    frames = rng.random((4, 60, 70, 3))
    plan = CropPlan((30, 28), roi_size=20, crop_size=16, aug_offset=(2, 3), flip=True)
    out = apply_frames(frames, plan, grayscale=True, mean=0.5, var=4.0)
    assert out.shape == (4, 16, 16, 1)
    x0, y0 = plan.roi_origin
    window = frames[:, y0 + 3 : y0 + 19, x0 + 2 : x0 + 18, :]
    flipped = window[:, :, ::-1, :]
    luma = (
        0.299 * flipped[..., 0] + 0.587 * flipped[..., 1] + 0.114 * flipped[..., 2]
    )
    want = (luma[..., None] - 0.5) / 2.0
    np.testing.assert_allclose(out, want, atol=1e-12)


def test_apply_frames_single_channel_passthrough():
    rng = np.random.default_rng(461)
    frames = rng.random((2, 30, 30, 1))
    plan = CropPlan((15, 15), roi_size=20, crop_size=20)
    out = apply_frames(frames, plan)
    assert out.shape == (2, 20, 20, 1)
    x0, y0 = plan.roi_origin
    np.testing.assert_allclose(
        out, frames[:, y0 : y0 + 20, x0 : x0 + 20, :], atol=1e-12
    )


def test_apply_frames_bounds_check():
    frames = np.zeros((1, 30, 30, 1))
    plan = CropPlan((5, 5), roi_size=20, crop_size=20)
    with pytest.raises(BoundsError):
        apply_frames(frames, plan)


def test_flip_points_mirrors_x_only():
    pts = np.array([[0.0, 5.0], [9.0, 2.0]])
    out = flip_points(pts, width=10)
    np.testing.assert_allclose(out, [[9.0, 5.0], [0.0, 2.0]])


def test_flip_commutes_with_odd_sized_centered_crop():
    """With an odd ROI in the image center, mirroring the image then
    cropping equals cropping then mirroring the crop."""
    rng = np.random.default_rng(463)
    width = 41
    frames = rng.random((2, 41, width, 1))
    plan = CropPlan((20, 20), roi_size=21, crop_size=21)
    flipped_plan = CropPlan((20, 20), roi_size=21, crop_size=21, flip=True)
    crop_then_flip = apply_frames(frames, flipped_plan)
    mirrored = frames[:, :, ::-1, :]
    flip_then_crop = apply_frames(mirrored, plan)
    np.testing.assert_allclose(crop_then_flip, flip_then_crop, atol=1e-12)


# ----------------------------------------------------------------------
# CSV io and the preprocessor
# ----------------------------------------------------------------------

def test_landmark_csv_round_trip(tmp_path):
    rng = np.random.default_rng(467)
    track = random_track(rng, 7, all_valid=False)
    p = tmp_path / "track.csv"
    write_landmarks(p, track)
    again = read_landmarks(p)
    np.testing.assert_allclose(again.frames, track.frames, atol=1e-9)
    np.testing.assert_array_equal(again.valid, track.valid)


def test_landmark_csv_rejects_malformed_rows(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("frame,point,x,y,valid\n0,0,1.0,2.0,1\n")
    with pytest.raises(ValueError):
        read_landmarks(p)  # frame 0 has 1 point, not 68


def test_read_reference_single_frame(tmp_path):
    rng = np.random.default_rng(479)
    track = random_track(rng, 1)
    p = tmp_path / "ref.csv"
    write_landmarks(p, track)
    ref = read_reference(p)
    assert ref.shape == (68, 2)
    np.testing.assert_allclose(ref, track.frames[0], atol=1e-9)


def test_preprocessor_end_to_end():
    rng = np.random.default_rng(487)
    reference = rng.normal(loc=60.0, scale=10.0, size=(68, 2))
    raw = reference + rng.normal(size=(12, 68, 2)) * 0.5
    valid = np.ones(12, dtype=bool)
    valid[4] = False
    track = LandmarkTrack(raw, valid)

    prep = LandmarkPreprocessor(window=5, roi_size=40, crop_size=36, augment=True, seed=3)
    prep.fit(reference)
    out = prep.transform(track)
    assert out.frame_count == 12
    assert out.all_valid()
    assert len(prep.transforms_) == 12
    assert prep.plan_.aug_offset is not None
    assert prep.plan_.crop_size == 36

    again = LandmarkPreprocessor(
        window=5, roi_size=40, crop_size=36, augment=True, seed=3
    ).fit(reference)
    out2 = again.transform(track)
    np.testing.assert_array_equal(out.frames, out2.frames)
    assert again.plan_ == prep.plan_


def test_preprocessor_get_params():
    prep = LandmarkPreprocessor(window=7)
    assert prep.get_params()["window"] == 7
    prep.set_params(roi_size=100)
    assert prep.roi_size == 100
