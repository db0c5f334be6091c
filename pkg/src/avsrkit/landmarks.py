"""Facial-landmark track geometry for mouth-region preprocessing.

A track is one 68-point landmark set per video frame plus a validity
mask for frames where detection failed.  The pipeline fills gaps by
linear interpolation, smooths with a centered moving average, aligns
each frame to a reference landmark set with a least-squares similarity
transform, and fixes one 120 by 120 mouth crop box for the whole
sequence.  Augmentation geometry (sub-crop offset, horizontal flip) is
drawn once per sequence and applied identically to every frame.
"""
from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from ._validation import check_rng
from .errors import (
    AllInvalidError,
    BoundsError,
    DegenerateSourceError,
    OutOfFrameWarning,
)

POINT_COUNT = 68
MOUTH_POINTS = slice(48, 68)
LUMA_WEIGHTS = (0.299, 0.587, 0.114)
DEFAULT_ROI_SIZE = 120
DEFAULT_CROP_SIZE = 112
DEFAULT_SMOOTH_WINDOW = 12


@dataclass(frozen=True)
class LandmarkTrack:
    """Per-frame 68-point coordinates with a frame validity mask."""

    frames: np.ndarray  # T x 68 x 2, (x, y) pixels
    valid: np.ndarray  # T booleans

    def __post_init__(self):
        arr = np.asarray(self.frames, dtype=np.float64)
        if arr.ndim != 3 or arr.shape[1] != POINT_COUNT or arr.shape[2] != 2:
            raise ValueError(
                f"frames must be T x {POINT_COUNT} x 2, got shape {arr.shape}"
            )
        mask = np.asarray(self.valid, dtype=bool)
        if mask.shape != (arr.shape[0],):
            raise ValueError(
                f"valid mask must have shape ({arr.shape[0]},), got {mask.shape}"
            )
        if arr.shape[0] == 0 or not mask.any():
            raise AllInvalidError("track has no valid frame")
        arr = arr.copy()
        arr.setflags(write=False)
        mask = mask.copy()
        mask.setflags(write=False)
        object.__setattr__(self, "frames", arr)
        object.__setattr__(self, "valid", mask)

    @property
    def frame_count(self) -> int:
        return self.frames.shape[0]

    def all_valid(self) -> bool:
        return bool(self.valid.all())


def interpolate_gaps(track: LandmarkTrack) -> LandmarkTrack:
    """Fill invalid frames by per-coordinate linear interpolation.

    Interior gaps interpolate between the nearest valid neighbors;
    leading and trailing gaps copy the nearest valid frame.  Applying
    the function twice changes nothing.
    """
    if track.all_valid():
        return track
    t = track.frame_count
    anchors = np.flatnonzero(track.valid)
    flat = track.frames.reshape(t, -1)
    filled = np.empty_like(flat)
    grid = np.arange(t, dtype=np.float64)
    for col in range(flat.shape[1]):
        filled[:, col] = np.interp(grid, anchors, flat[anchors, col])
    return LandmarkTrack(filled.reshape(t, POINT_COUNT, 2), np.ones(t, dtype=bool))


def smooth(track: LandmarkTrack, window: int = DEFAULT_SMOOTH_WINDOW) -> LandmarkTrack:
    """Centered moving average over each coordinate.

    An even window of width w covers w//2 frames back and w - w//2 - 1
    forward; the window shrinks at sequence boundaries instead of
    padding.  The track must be fully valid (interpolate first).
    """
    if window < 1:
        raise ValueError(f"window must be positive, got {window}")
    if not track.all_valid():
        raise ValueError("smooth requires a fully valid track; interpolate first")
    t = track.frame_count
    back = window // 2
    fwd = window - back - 1
    out = np.empty_like(track.frames)
    for i in range(t):
        lo = max(0, i - back)
        hi = min(t, i + fwd + 1)
        out[i] = track.frames[lo:hi].mean(axis=0)
    return LandmarkTrack(out, np.ones(t, dtype=bool))


@dataclass(frozen=True)
class SimilarityTransform:
    """Uniform scale, rotation and translation: x -> s * R(theta) x + t."""

    scale: float
    rotation: float  # radians
    translation: tuple[float, float]
    residual: float = 0.0  # fit objective at the estimate, when estimated

    def __post_init__(self):
        if not self.scale > 0:
            raise ValueError(f"scale must be positive, got {self.scale}")

    @property
    def matrix(self) -> np.ndarray:
        c, s = np.cos(self.rotation), np.sin(self.rotation)
        return self.scale * np.array([[c, -s], [s, c]])

    def apply(self, points: np.ndarray) -> np.ndarray:
        pts = np.asarray(points, dtype=np.float64)
        return pts @ self.matrix.T + np.asarray(self.translation)


def estimate_similarity(source: np.ndarray, reference: np.ndarray) -> SimilarityTransform:
    """Least-squares similarity transform taking source onto reference.

    Minimizes the total squared distance between transformed source
    points and reference points over scale, rotation and translation.
    The attained objective value is stored on the result as
    ``residual``; an exact similarity image recovers the transform to
    floating-point accuracy.
    """
    x = np.asarray(source, dtype=np.float64)
    y = np.asarray(reference, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 2 or x.shape[1] != 2:
        raise ValueError(f"point sets must share shape (n, 2), got {x.shape}, {y.shape}")
    n = x.shape[0]
    mu_x = x.mean(axis=0)
    mu_y = y.mean(axis=0)
    xc = x - mu_x
    yc = y - mu_y
    var_x = float(np.sum(xc * xc)) / n
    if var_x == 0.0:
        raise DegenerateSourceError("source points are all coincident")
    cov = (yc.T @ xc) / n
    u, d, vt = np.linalg.svd(cov)
    sign = np.ones(2)
    if np.linalg.det(u @ vt) < 0:
        sign[-1] = -1.0
    rot = u @ np.diag(sign) @ vt
    scale = float(np.sum(d * sign)) / var_x
    if not scale > 0:
        raise DegenerateSourceError("degenerate correspondence yields non-positive scale")
    angle = float(np.arctan2(rot[1, 0], rot[0, 0]))
    translation = mu_y - scale * (rot @ mu_x)
    fitted = SimilarityTransform(
        scale, angle, (float(translation[0]), float(translation[1]))
    )
    residual = float(np.sum(np.square(fitted.apply(x) - y)))
    return replace(fitted, residual=residual)


@dataclass(frozen=True)
class CropPlan:
    """One crop geometry shared by every frame of a sequence."""

    roi_center: tuple[int, int]  # (x, y) pixel center of the mouth box
    roi_size: int = DEFAULT_ROI_SIZE
    aug_offset: tuple[int, int] | None = None  # (dx, dy) of the training sub-crop
    flip: bool = False
    crop_size: int = DEFAULT_CROP_SIZE

    def __post_init__(self):
        if self.roi_size <= 0:
            raise ValueError(f"roi_size must be positive, got {self.roi_size}")
        if not 0 < self.crop_size <= self.roi_size:
            raise ValueError(
                f"crop_size must lie in (0, {self.roi_size}], got {self.crop_size}"
            )
        if self.aug_offset is not None:
            dx, dy = self.aug_offset
            span = self.roi_size - self.crop_size
            if not (0 <= dx <= span and 0 <= dy <= span):
                raise ValueError(
                    f"aug_offset {self.aug_offset} puts the {self.crop_size}-crop "
                    f"outside the {self.roi_size}-ROI"
                )

    @property
    def roi_origin(self) -> tuple[int, int]:
        """Top-left (x, y) of the ROI box."""
        half = self.roi_size // 2
        return (self.roi_center[0] - half, self.roi_center[1] - half)

    def to_json(self) -> dict:
        return {
            "roi_center": list(self.roi_center),
            "roi_size": self.roi_size,
            "aug_offset": None if self.aug_offset is None else list(self.aug_offset),
            "flip": self.flip,
            "crop_size": self.crop_size,
        }


def mouth_roi(
    track: LandmarkTrack,
    image_size: tuple[int, int] | None = None,
    roi_size: int = DEFAULT_ROI_SIZE,
) -> CropPlan:
    """Fix the sequence's mouth crop box.

    The box centers on the per-coordinate median over frames of the
    mouth-landmark centroid (points 48 to 67), rounded to integer
    pixels, so a single outlier frame cannot move it.  With
    ``image_size`` as (height, width) the box is clamped inside the
    image under an OutOfFrameWarning; a box larger than the image
    raises BoundsError.
    """
    if not track.all_valid():
        raise ValueError("mouth_roi requires a fully valid track; interpolate first")
    centroids = track.frames[:, MOUTH_POINTS, :].mean(axis=1)  # T x 2
    center = np.rint(np.median(centroids, axis=0)).astype(int)
    cx, cy = int(center[0]), int(center[1])
    if image_size is not None:
        height, width = image_size
        if roi_size > width or roi_size > height:
            raise BoundsError(
                f"{roi_size}-pixel box cannot fit a {height} x {width} image"
            )
        half = roi_size // 2
        x0 = cx - half
        y0 = cy - half
        x0_c = min(max(x0, 0), width - roi_size)
        y0_c = min(max(y0, 0), height - roi_size)
        if (x0_c, y0_c) != (x0, y0):
            warnings.warn(
                f"mouth box at ({x0}, {y0}) clamped to ({x0_c}, {y0_c}) "
                f"for a {height} x {width} image",
                OutOfFrameWarning,
                stacklevel=2,
            )
            cx, cy = x0_c + half, y0_c + half
    return CropPlan(
        (cx, cy), roi_size=roi_size, crop_size=min(DEFAULT_CROP_SIZE, roi_size)
    )


def plan_augmentation(
    plan: CropPlan,
    rng: np.random.Generator | int | None = None,
    crop_size: int = DEFAULT_CROP_SIZE,
) -> CropPlan:
    """Draw the sequence's training-crop offset and flip decision.

    The sub-crop origin is uniform over every position that keeps it
    inside the ROI; the horizontal flip fires with probability one
    half.  Applying the returned plan to each frame reproduces these
    choices identically.
    """
    gen = check_rng(rng)
    span = plan.roi_size - crop_size
    if span < 0:
        raise ValueError(f"crop_size {crop_size} exceeds roi_size {plan.roi_size}")
    dx = int(gen.integers(0, span + 1))
    dy = int(gen.integers(0, span + 1))
    flip = bool(gen.random() < 0.5)
    return replace(plan, aug_offset=(dx, dy), flip=flip, crop_size=crop_size)


def flip_points(points: np.ndarray, width: int) -> np.ndarray:
    """Mirror x coordinates across a width-pixel image."""
    pts = np.asarray(points, dtype=np.float64).copy()
    pts[..., 0] = (width - 1) - pts[..., 0]
    return pts


def apply_frames(
    frames: np.ndarray,
    plan: CropPlan,
    grayscale: bool = True,
    mean: float = 0.0,
    var: float = 1.0,
) -> np.ndarray:
    """Crop, optionally sub-crop and flip, then grayscale and normalize.

    ``frames`` is T x H x W x C with C of 1 or 3.  Every frame gets the
    same geometry.  Grayscale conversion uses luma weights
    0.299, 0.587, 0.114; normalization is (x - mean) / sqrt(var).
    BoundsError if the plan's box leaves the image.
    """
    arr = np.asarray(frames, dtype=np.float64)
    if arr.ndim != 4 or arr.shape[3] not in (1, 3):
        raise ValueError(
            f"frames must be T x H x W x C with C in {{1, 3}}, got shape {arr.shape}"
        )
    if not var > 0:
        raise ValueError(f"var must be positive, got {var}")
    _, height, width, channels = arr.shape
    x0, y0 = plan.roi_origin
    if x0 < 0 or y0 < 0 or x0 + plan.roi_size > width or y0 + plan.roi_size > height:
        raise BoundsError(
            f"ROI origin ({x0}, {y0}) size {plan.roi_size} leaves the "
            f"{height} x {width} image"
        )
    out = arr[:, y0 : y0 + plan.roi_size, x0 : x0 + plan.roi_size, :]
    if plan.aug_offset is not None:
        dx, dy = plan.aug_offset
        out = out[:, dy : dy + plan.crop_size, dx : dx + plan.crop_size, :]
    if plan.flip:
        out = out[:, :, ::-1, :]
    if grayscale and channels == 3:
        weights = np.asarray(LUMA_WEIGHTS)
        out = np.tensordot(out, weights, axes=([3], [0]))[..., np.newaxis]
    return (out - mean) / np.sqrt(var)


# ----------------------------------------------------------------------
# CSV I/O: rows of frame,point,x,y,valid
# ----------------------------------------------------------------------

_CSV_HEADER = ["frame", "point", "x", "y", "valid"]


def write_landmarks(path: str | Path, track: LandmarkTrack) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(_CSV_HEADER)
        for t in range(track.frame_count):
            flag = int(track.valid[t])
            for p in range(POINT_COUNT):
                x, y = track.frames[t, p]
                writer.writerow([t, p, repr(float(x)), repr(float(y)), flag])


def read_landmarks(path: str | Path) -> LandmarkTrack:
    """Read a track written as frame,point,x,y,valid rows.

    Every frame must carry all 68 points, and a frame's valid flag must
    not vary between its rows.
    """
    rows: dict[int, dict[int, tuple[float, float]]] = {}
    flags: dict[int, int] = {}
    with open(path, newline="") as f:
        reader = csv.DictReader(f)
        if reader.fieldnames is None or [c.strip() for c in reader.fieldnames] != _CSV_HEADER:
            raise ValueError(
                f"{path}: expected header {','.join(_CSV_HEADER)}, "
                f"got {reader.fieldnames}"
            )
        for line in reader:
            t = int(line["frame"])
            p = int(line["point"])
            flag = int(line["valid"])
            if not 0 <= p < POINT_COUNT:
                raise ValueError(f"{path}: point index {p} outside 0..{POINT_COUNT - 1}")
            if t in flags and flags[t] != flag:
                raise ValueError(f"{path}: frame {t} has conflicting valid flags")
            flags[t] = flag
            rows.setdefault(t, {})[p] = (float(line["x"]), float(line["y"]))
    if not rows:
        raise AllInvalidError(f"{path}: no landmark rows")
    t_count = max(rows) + 1
    if sorted(rows) != list(range(t_count)):
        raise ValueError(f"{path}: frame indices are not contiguous from 0")
    frames = np.zeros((t_count, POINT_COUNT, 2))
    valid = np.zeros(t_count, dtype=bool)
    for t in range(t_count):
        pts = rows[t]
        if len(pts) != POINT_COUNT:
            raise ValueError(
                f"{path}: frame {t} has {len(pts)} points, need {POINT_COUNT}"
            )
        for p, (x, y) in pts.items():
            frames[t, p] = (x, y)
        valid[t] = bool(flags[t])
    return LandmarkTrack(frames, valid)


def read_reference(path: str | Path) -> np.ndarray:
    """Read a single-frame landmark file as a 68 x 2 reference set."""
    track = read_landmarks(path)
    if track.frame_count != 1:
        raise ValueError(
            f"{path}: reference must hold exactly one frame, got {track.frame_count}"
        )
    if not track.valid[0]:
        raise AllInvalidError(f"{path}: reference frame is marked invalid")
    return np.asarray(track.frames[0])


def align_track(
    track: LandmarkTrack, reference: np.ndarray
) -> tuple[LandmarkTrack, list[SimilarityTransform]]:
    """Map every frame onto the reference landmark set.

    Returns the aligned track plus the per-frame transforms (useful for
    warping the matching video frames with the same geometry).
    """
    if not track.all_valid():
        raise ValueError("align_track requires a fully valid track; interpolate first")
    transforms = []
    aligned = np.empty_like(track.frames)
    for t in range(track.frame_count):
        tf = estimate_similarity(track.frames[t], reference)
        transforms.append(tf)
        aligned[t] = tf.apply(track.frames[t])
    return LandmarkTrack(aligned, np.ones(track.frame_count, dtype=bool)), transforms


class LandmarkPreprocessor(BaseEstimator, TransformerMixin):
    """Gap filling, smoothing, reference alignment and crop planning.

    ``fit`` takes the 68 x 2 reference landmark set; ``transform`` maps
    a LandmarkTrack to its aligned, smoothed counterpart and leaves the
    per-frame transforms on ``transforms_`` and the sequence crop plan
    on ``plan_``.
    """

    def __init__(
        self,
        window: int = DEFAULT_SMOOTH_WINDOW,
        roi_size: int = DEFAULT_ROI_SIZE,
        crop_size: int = DEFAULT_CROP_SIZE,
        augment: bool = False,
        seed: int = 0,
        image_size: tuple[int, int] | None = None,
    ):
        self.window = window
        self.roi_size = roi_size
        self.crop_size = crop_size
        self.augment = augment
        self.seed = seed
        self.image_size = image_size

    def fit(self, X, y=None) -> "LandmarkPreprocessor":
        ref = np.asarray(X, dtype=np.float64)
        if ref.shape != (POINT_COUNT, 2):
            raise ValueError(
                f"reference must be {POINT_COUNT} x 2 points, got shape {ref.shape}"
            )
        self.reference_ = ref
        return self

    def transform(self, X: LandmarkTrack) -> LandmarkTrack:
        if not hasattr(self, "reference_"):
            raise RuntimeError("fit the preprocessor with a reference set first")
        track = smooth(interpolate_gaps(X), self.window)
        aligned, transforms = align_track(track, self.reference_)
        plan = mouth_roi(aligned, self.image_size, self.roi_size)
        if self.augment:
            plan = plan_augmentation(
                plan, np.random.default_rng(self.seed), self.crop_size
            )
        self.transforms_ = transforms
        self.plan_ = plan
        return aligned
