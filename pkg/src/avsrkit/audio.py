"""Waveform ingestion, normalization and SNR-controlled noise synthesis.

Noise lives in the time domain throughout.  ``mix_at_snr`` scales an
additive noise signal so the measured signal-to-noise ratio of the mix
is exactly the requested decibel value; ``synth_babble`` overlays 20
seeded speech crops and ``synth_human_noise`` splices consecutive
one-second crops from distinct sources.  Corpus augmentation applies
noise per utterance with a fixed probability, under seeds derived from
(corpus seed, utterance id) so parallel execution order can never
change any output byte.
"""
from __future__ import annotations

import wave
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from ._validation import derive_seed
from .errors import (
    ConstantSignalError,
    InsufficientSourcesError,
    RateMismatchError,
    SilentNoiseError,
    SourceTooShortError,
)

BABBLE_SOURCE_COUNT = 20


@dataclass(frozen=True)
class AudioSignal:
    """Mono waveform: float amplitudes plus a sample rate in Hz."""

    samples: np.ndarray
    sample_rate: int = 16000

    def __post_init__(self):
        arr = np.asarray(self.samples, dtype=np.float64)
        if arr.ndim != 1:
            raise ValueError(f"samples must be 1-D, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("samples must be finite")
        if not self.sample_rate > 0:
            raise ValueError(f"sample_rate must be positive, got {self.sample_rate}")
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "samples", arr)

    def __len__(self) -> int:
        return self.samples.shape[0]

    @property
    def duration(self) -> float:
        return len(self) / self.sample_rate


def power(samples: np.ndarray) -> float:
    """Mean squared amplitude over the whole signal."""
    return float(np.mean(np.square(samples))) if len(samples) else 0.0


def normalize(signal: AudioSignal) -> AudioSignal:
    """Shift and scale to zero mean, unit variance (population convention)."""
    x = signal.samples
    if len(x) < 2:
        raise ConstantSignalError(f"cannot normalize {len(x)} sample(s)")
    if np.ptp(x) == 0.0:
        # exact all-equal test; the computed variance of a constant
        # signal can be a rounding residue rather than zero
        raise ConstantSignalError("constant signal has no variance to normalize")
    mean = float(np.mean(x))
    var = float(np.var(x))
    if var == 0.0:
        raise ConstantSignalError("signal variance underflowed to zero")
    return AudioSignal((x - mean) / np.sqrt(var), signal.sample_rate)


def _fit_noise_length(
    noise: AudioSignal, n: int, rng: np.random.Generator | None
) -> np.ndarray:
    """Crop or cyclically tile noise to n samples.

    Longer noise is cropped at a seeded random offset when a generator
    is supplied, from the head otherwise; shorter noise tiles.
    """
    x = noise.samples
    if len(x) == n:
        return x
    if len(x) > n:
        start = int(rng.integers(0, len(x) - n + 1)) if rng is not None else 0
        return x[start : start + n]
    reps = -(-n // len(x))
    return np.tile(x, reps)[:n]


def mix_at_snr(
    signal: AudioSignal,
    noise: AudioSignal,
    snr_db: float,
    rng: np.random.Generator | None = None,
) -> AudioSignal:
    """Add noise scaled so the result sits at exactly snr_db decibels.

    The scale k = sqrt(P_signal / (P_noise * 10^(snr_db / 10))) makes
    10 * log10(P_signal / P_scaled_noise) equal the request up to float
    rounding; scaling the signal by a > 0 scales the output by a.
    """
    if signal.sample_rate != noise.sample_rate:
        raise RateMismatchError(
            f"signal at {signal.sample_rate} Hz, noise at {noise.sample_rate} Hz"
        )
    if len(noise) == 0 or power(noise.samples) == 0.0:
        raise SilentNoiseError("noise has zero power")
    if len(signal) == 0 or power(signal.samples) == 0.0:
        # the scale would collapse to zero and the request would be
        # silently ignored; better to surface the degenerate input
        raise ConstantSignalError("silent signal has no SNR reference")
    fitted = _fit_noise_length(noise, len(signal), rng)
    p_noise = power(fitted)
    if p_noise == 0.0:
        raise SilentNoiseError("noise is silent over the mixing window")
    k = np.sqrt(power(signal.samples) / (p_noise * 10.0 ** (snr_db / 10.0)))
    return AudioSignal(signal.samples + k * fitted, signal.sample_rate)


def _common_rate(sources: Sequence[AudioSignal]) -> int:
    rates = {s.sample_rate for s in sources}
    if len(rates) != 1:
        raise RateMismatchError(f"sources mix sample rates {sorted(rates)}")
    return rates.pop()


def _unit_power(samples: np.ndarray, rate: int) -> AudioSignal:
    p = power(samples)
    if p == 0.0:
        raise SilentNoiseError("synthesized noise is silent")
    return AudioSignal(samples / np.sqrt(p), rate)


def synth_babble(
    sources: Sequence[AudioSignal], target_len: int, seed: int
) -> AudioSignal:
    """Overlay seeded crops of 20 distinct sources, unit-power normalized.

    Sources shorter than the target tile cyclically from a seeded start;
    longer ones contribute a contiguous seeded crop.
    """
    if len(sources) < BABBLE_SOURCE_COUNT:
        raise InsufficientSourcesError(
            f"babble needs {BABBLE_SOURCE_COUNT} sources, got {len(sources)}"
        )
    for i, s in enumerate(sources):
        if len(s) == 0 or power(s.samples) == 0.0:
            raise SilentNoiseError(f"source {i} is silent")
    rate = _common_rate(sources)
    rng = np.random.default_rng(seed)
    picks = rng.choice(len(sources), size=BABBLE_SOURCE_COUNT, replace=False)
    total = np.zeros(target_len)
    for i in picks:
        x = sources[int(i)].samples
        if len(x) >= target_len:
            start = int(rng.integers(0, len(x) - target_len + 1))
            total += x[start : start + target_len]
        else:
            start = int(rng.integers(0, len(x)))
            idx = (start + np.arange(target_len)) % len(x)
            total += x[idx]
    return _unit_power(total, rate)


def synth_human_noise(
    sources: Sequence[AudioSignal], target_len: int, seed: int
) -> AudioSignal:
    """Concatenate seeded one-second crops from distinct sources to the
    target length (final crop truncated), unit-power normalized."""
    rate = _common_rate(sources)
    one_sec = int(rate)
    for i, s in enumerate(sources):
        if len(s) < one_sec:
            raise SourceTooShortError(
                f"source {i} is {len(s)} samples, need a full second ({one_sec})"
            )
    crops_needed = -(-target_len // one_sec)
    if crops_needed > len(sources):
        raise InsufficientSourcesError(
            f"{target_len} samples need {crops_needed} distinct sources, "
            f"got {len(sources)}"
        )
    rng = np.random.default_rng(seed)
    picks = rng.choice(len(sources), size=crops_needed, replace=False)
    pieces = []
    for i in picks:
        x = sources[int(i)].samples
        start = int(rng.integers(0, len(x) - one_sec + 1))
        pieces.append(x[start : start + one_sec])
    joined = np.concatenate(pieces)[:target_len]
    return _unit_power(joined, rate)


@dataclass(frozen=True)
class NoiseSpec:
    """What to mix and how often; seeds make the whole corpus pass a
    pure function of its inputs."""

    kind: str = "babble"
    snr_db: float = 5.0
    apply_prob: float = 0.25
    seed: int = 0
    path: str | None = None  # noise file for kind="file"

    def __post_init__(self):
        if self.kind not in ("babble", "human", "file"):
            raise ValueError(f"kind must be babble, human or file, got {self.kind!r}")
        if not 0.0 <= self.apply_prob <= 1.0:
            raise ValueError(f"apply_prob must lie in [0, 1], got {self.apply_prob}")
        if self.kind == "file" and self.path is None:
            raise ValueError("kind='file' needs a noise path")


def noise_decision(spec: NoiseSpec, utterance_id: str, namespace: str = "train") -> bool:
    """Deterministic per-utterance coin flip at apply_prob."""
    rng = np.random.default_rng(derive_seed(spec.seed, namespace, "apply", utterance_id))
    return bool(rng.random() < spec.apply_prob)


def augment_corpus(
    utterances: Sequence[tuple[str, AudioSignal]],
    spec: NoiseSpec,
    noise_sources: Sequence[AudioSignal] | None = None,
    namespace: str = "train",
) -> tuple[list[tuple[str, AudioSignal]], dict]:
    """Mix noise into each utterance independently with apply_prob.

    ``noise_sources`` defaults to the corpus signals themselves.  For
    babble, the 20 contributing sources are drawn once per corpus seed
    and shared by every utterance; crop offsets stay per-utterance.
    Per-utterance failures land in the report instead of aborting the
    corpus, and ``namespace`` separates training-time from
    evaluation-time noise streams.
    """
    if noise_sources is not None:
        sources = list(noise_sources)
    else:
        # Default to the corpus itself, keyed by id so caller ordering
        # can never leak into the seeded pool draw.
        sources = [sig for _, sig in sorted(utterances, key=lambda pair: pair[0])]
    babble_pool: list[AudioSignal] | None = None
    if spec.kind == "babble" and len(sources) >= BABBLE_SOURCE_COUNT:
        pool_rng = np.random.default_rng(derive_seed(spec.seed, namespace, "babble-pool"))
        picks = pool_rng.choice(len(sources), size=BABBLE_SOURCE_COUNT, replace=False)
        babble_pool = [sources[int(i)] for i in picks]
    file_noise = None
    if spec.kind == "file":
        if spec.path is None:
            raise ValueError("kind='file' needs a noise path")
        file_noise = read_wav(spec.path)

    out: list[tuple[str, AudioSignal]] = []
    noised: list[str] = []
    clean: list[str] = []
    errors: dict[str, str] = {}
    for uid, sig in utterances:
        if not noise_decision(spec, uid, namespace):
            out.append((uid, sig))
            clean.append(uid)
            continue
        try:
            utt_seed = derive_seed(spec.seed, namespace, "noise", uid)
            if spec.kind == "babble":
                noise = synth_babble(
                    babble_pool if babble_pool is not None else sources,
                    len(sig),
                    utt_seed,
                )
            elif spec.kind == "human":
                noise = synth_human_noise(sources, len(sig), utt_seed)
            else:
                noise = file_noise
            mixed = mix_at_snr(sig, noise, spec.snr_db, np.random.default_rng(utt_seed))
            out.append((uid, mixed))
            noised.append(uid)
        except Exception as exc:  # keep going; the report carries the failure
            out.append((uid, sig))
            errors[uid] = f"{type(exc).__name__}: {exc}"
    report = {
        "kind": spec.kind,
        "snr_db": spec.snr_db,
        "apply_prob": spec.apply_prob,
        "seed": spec.seed,
        "namespace": namespace,
        "babble_pool_size": BABBLE_SOURCE_COUNT if babble_pool is not None else None,
        "noised": noised,
        "clean": clean,
        "errors": errors,
    }
    return out, report


# ----------------------------------------------------------------------
# WAV I/O (RIFF/WAVE, mono, 16-bit PCM)
# ----------------------------------------------------------------------


def read_wav(path: str | Path) -> AudioSignal:
    """Read mono 16-bit PCM; amplitudes map to [-1, 1)."""
    with wave.open(str(path), "rb") as f:
        if f.getnchannels() != 1:
            raise ValueError(f"{path} has {f.getnchannels()} channels, need mono")
        if f.getsampwidth() != 2:
            raise ValueError(f"{path} is {8 * f.getsampwidth()}-bit, need 16-bit PCM")
        rate = f.getframerate()
        raw = f.readframes(f.getnframes())
    ints = np.frombuffer(raw, dtype="<i2")
    return AudioSignal(ints.astype(np.float64) / 32768.0, rate)


def write_wav(path: str | Path, signal: AudioSignal) -> None:
    """Write mono 16-bit PCM; amplitudes clip to the representable range."""
    scaled = np.rint(signal.samples * 32768.0)
    ints = np.clip(scaled, -32768, 32767).astype("<i2")
    with wave.open(str(path), "wb") as f:
        f.setnchannels(1)
        f.setsampwidth(2)
        f.setframerate(int(signal.sample_rate))
        f.writeframes(ints.tobytes())


class SnrNoiseMixer(BaseEstimator, TransformerMixin):
    """Estimator-style front end over ``augment_corpus``.

    ``fit`` takes the noise source signals; ``transform`` maps a list of
    (utterance_id, AudioSignal) pairs to its augmented counterpart and
    leaves the run report on ``report_``.
    """

    def __init__(
        self,
        kind: str = "babble",
        snr_db: float = 5.0,
        apply_prob: float = 0.25,
        seed: int = 0,
        namespace: str = "train",
    ):
        self.kind = kind
        self.snr_db = snr_db
        self.apply_prob = apply_prob
        self.seed = seed
        self.namespace = namespace

    def fit(self, X=None, y=None) -> "SnrNoiseMixer":
        self.sources_ = list(X) if X is not None else None
        return self

    def transform(self, X) -> list[tuple[str, AudioSignal]]:
        spec = NoiseSpec(self.kind, self.snr_db, self.apply_prob, self.seed)
        sources = getattr(self, "sources_", None)
        out, report = augment_corpus(X, spec, sources, self.namespace)
        self.report_ = report
        return out
