"""Stream fusion numerics and the audio/visual frame-rate calculus.

The fused representation concatenates a per-frame-normalized visual
sequence with a per-frame-normalized audio sequence at a shared 25 Hz
rate.  Upstream of that sits the 1:2 rate contract: the raw-waveform
front end emits one vector per hop, the clip is padded (front-first)
and at most one trailing vector truncated so the front end produces
exactly twice the visual frame count, and a stride-2 convolution halves
it back to the visual rate.  Everything here is the deterministic
arithmetic around those trained components, not the components
themselves.
"""
from __future__ import annotations

import struct
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from ._validation import as_float_matrix
from .errors import (
    DegenerateFrameWarning,
    FrameCountMismatchError,
    InfeasiblePlanError,
    OddFrameCountError,
    RateMismatchError,
)

MODALITIES = ("audio", "visual", "fused")

FEAT_MAGIC = b"FEATSEQ1"

DEFAULT_WINDOW = 400  # samples at 16 kHz: 25 ms analysis window
DEFAULT_HOP = 320  # samples at 16 kHz: one vector every 20 ms


@dataclass(frozen=True)
class FeatureSequence:
    """Rate-tagged N x D matrix of per-frame feature vectors."""

    frames: np.ndarray
    modality: str
    rate_hz: float

    def __post_init__(self):
        arr = as_float_matrix(self.frames, "frames").copy()
        arr.setflags(write=False)
        object.__setattr__(self, "frames", arr)
        if self.modality not in MODALITIES:
            raise ValueError(f"modality must be one of {MODALITIES}, got {self.modality!r}")
        if not self.rate_hz > 0:
            raise ValueError(f"rate_hz must be positive, got {self.rate_hz}")

    @property
    def frame_count(self) -> int:
        return self.frames.shape[0]

    @property
    def dim(self) -> int:
        return self.frames.shape[1]


@dataclass(frozen=True)
class NormParams:
    """Per-feature affine parameters; epsilon guards the variance."""

    gain: np.ndarray | float = 1.0
    bias: np.ndarray | float = 0.0
    epsilon: float = 1e-5

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")


def layer_norm(seq: FeatureSequence, params: NormParams = NormParams()) -> FeatureSequence:
    """Normalize every frame to zero mean and unit variance over its
    features (epsilon inside the square root), then scale and shift.

    Keeping each modality at unit per-frame variance is what stops one
    stream from dominating the concatenated representation.  Constant
    frames come out as all zeros and raise DegenerateFrameWarning.
    """
    x = seq.frames
    if x.shape[1] < 2:
        raise ValueError(f"layer_norm needs at least 2 features, got {x.shape[1]}")
    mean = x.mean(axis=1, keepdims=True)
    var = x.var(axis=1, keepdims=True)
    degenerate = int(np.sum(var[:, 0] <= params.epsilon))
    if degenerate:
        warnings.warn(
            f"{degenerate} constant or near-constant frame(s); epsilon dominates "
            "their variance",
            DegenerateFrameWarning,
            stacklevel=2,
        )
    normed = (x - mean) / np.sqrt(var + params.epsilon)
    out = normed * np.asarray(params.gain) + np.asarray(params.bias)
    return FeatureSequence(out, seq.modality, seq.rate_hz)


def fuse(
    audio: FeatureSequence,
    visual: FeatureSequence,
    audio_params: NormParams = NormParams(),
    visual_params: NormParams = NormParams(),
) -> FeatureSequence:
    """Concatenate the normalized streams on the feature axis, visual
    half first, at their common frame rate."""
    if audio.frame_count != visual.frame_count:
        raise FrameCountMismatchError(
            f"audio has {audio.frame_count} frames, visual has {visual.frame_count}"
        )
    if audio.rate_hz != visual.rate_hz:
        raise RateMismatchError(
            f"audio at {audio.rate_hz} Hz, visual at {visual.rate_hz} Hz"
        )
    left = layer_norm(visual, visual_params)
    right = layer_norm(audio, audio_params)
    fused = np.concatenate([left.frames, right.frames], axis=1)
    return FeatureSequence(fused, "fused", audio.rate_hz)


@dataclass(frozen=True)
class RateAlignmentPlan:
    """Padding and truncation that make the front end emit exactly
    2 * visual_frames vectors."""

    sample_count: int
    visual_frames: int
    pad_front: int
    pad_back: int
    truncate_frames: int
    window: int
    hop: int

    @property
    def padded_samples(self) -> int:
        return self.sample_count + self.pad_front + self.pad_back

    @property
    def frontend_frames(self) -> int:
        """Vectors after truncation: always 2 * visual_frames."""
        raw = (self.padded_samples - self.window) // self.hop + 1
        return raw - self.truncate_frames


def frames_for_samples(samples: int, window: int, hop: int) -> int:
    """Front-end output length for a given sample count (0 if the
    window does not fit)."""
    if samples < window:
        return 0
    return (samples - window) // hop + 1


def plan_rate_alignment(
    sample_count: int,
    visual_frames: int,
    window: int = DEFAULT_WINDOW,
    hop: int = DEFAULT_HOP,
) -> RateAlignmentPlan:
    """Minimal front-first padding (plus at most one trailing-vector
    truncation) reaching a perfect 1:2 visual:front-end frame ratio.

    Feasibility caps the correction at one visual frame period: audio
    longer than 2 * visual_frames + 1 vectors, or needing more than two
    hops of padding, is treated as inconsistent input rather than
    silently stretched.
    """
    if visual_frames < 1:
        raise ValueError(f"visual_frames must be >= 1, got {visual_frames}")
    if not 1 <= hop <= window:
        raise ValueError(f"need window >= hop >= 1, got window={window} hop={hop}")
    if sample_count < 0:
        raise ValueError(f"sample_count must be >= 0, got {sample_count}")
    target = 2 * visual_frames
    have = frames_for_samples(sample_count, window, hop)
    if have > target + 1:
        raise InfeasiblePlanError(
            f"{sample_count} samples already yield {have} front-end frames; "
            f"at most one may be truncated to reach {target}"
        )
    # smallest padded length producing at least the target frame count
    need = max(0, window + (target - 1) * hop - sample_count)
    if need > 2 * hop:
        raise InfeasiblePlanError(
            f"{sample_count} samples need {need} samples of padding to reach "
            f"{target} front-end frames; more than one visual frame period"
        )
    pad_front = (need + 1) // 2
    pad_back = need // 2
    produced = frames_for_samples(sample_count + need, window, hop)
    truncate = produced - target
    return RateAlignmentPlan(
        sample_count, visual_frames, pad_front, pad_back, truncate, window, hop
    )


def strided_downsample(
    seq: FeatureSequence,
    kernel: np.ndarray,
    stride: int = 2,
) -> FeatureSequence:
    """Cross-correlation along time with symmetric zero padding of
    (K - 1) / 2 and the given stride; halves the frame count at the
    default stride 2.
    """
    kernel = np.asarray(kernel, dtype=np.float64)
    if kernel.ndim != 3:
        raise ValueError(f"kernel must be K x D_in x D_out, got shape {kernel.shape}")
    K, d_in, d_out = kernel.shape
    if K % 2 != 1:
        raise ValueError(f"kernel width must be odd, got {K}")
    if stride < 1:
        raise ValueError(f"stride must be >= 1, got {stride}")
    x = seq.frames
    if x.shape[0] % stride != 0:
        raise OddFrameCountError(
            f"{x.shape[0]} frames are not divisible by stride {stride}"
        )
    if x.shape[1] != d_in:
        raise ValueError(f"input is {x.shape[1]}-D, kernel expects {d_in}")
    half = (K - 1) // 2
    padded = np.zeros((x.shape[0] + 2 * half, d_in))
    if x.shape[0]:
        padded[half : half + x.shape[0]] = x
    n_out = x.shape[0] // stride
    out = np.zeros((n_out, d_out))
    starts = np.arange(n_out) * stride
    for k in range(K):
        out += padded[starts + k] @ kernel[k]
    return FeatureSequence(out, seq.modality, seq.rate_hz / stride)


# ----------------------------------------------------------------------
# Serialization
# ----------------------------------------------------------------------

_MODALITY_CODE = {name: i for i, name in enumerate(MODALITIES)}


def write_features(path: str | Path, seq: FeatureSequence) -> None:
    """Binary container: magic, u32 N, u32 D, u8 modality, f64 rate,
    then N * D little-endian doubles row-major."""
    header = FEAT_MAGIC + struct.pack(
        "<IIBd", seq.frame_count, seq.dim, _MODALITY_CODE[seq.modality], seq.rate_hz
    )
    Path(path).write_bytes(
        header + np.ascontiguousarray(seq.frames, dtype="<f8").tobytes()
    )


def read_features(path: str | Path) -> FeatureSequence:
    raw = Path(path).read_bytes()
    if raw[: len(FEAT_MAGIC)] != FEAT_MAGIC:
        raise ValueError(f"{path} is not a feature-sequence container")
    n, d, code, rate = struct.unpack_from("<IIBd", raw, len(FEAT_MAGIC))
    body = np.frombuffer(raw, dtype="<f8", offset=len(FEAT_MAGIC) + 17)
    if body.size != n * d:
        raise ValueError(f"feature payload has {body.size} values, expected {n * d}")
    if code >= len(MODALITIES):
        raise ValueError(f"unknown modality code {code}")
    return FeatureSequence(
        body.reshape(n, d).astype(np.float64), MODALITIES[code], float(rate)
    )


class ModalityFuser(BaseEstimator, TransformerMixin):
    """Estimator-style front end over ``fuse``; stateless, so ``fit``
    only validates."""

    def __init__(self, epsilon: float = 1e-5):
        self.epsilon = epsilon

    def fit(self, X=None, y=None) -> "ModalityFuser":
        return self

    def transform(self, X) -> FeatureSequence:
        """X is an (audio, visual) FeatureSequence pair."""
        audio, visual = X
        params = NormParams(epsilon=self.epsilon)
        return fuse(audio, visual, params, params)
