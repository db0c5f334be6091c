"""Sequence-decoding and evaluation toolkit for audio-visual speech
recognition: alignment-marginal lattice losses, joint lattice/attention
beam search with score fusion, stream fusion and rate alignment,
SNR-exact noise synthesis, landmark preprocessing geometry, and word
error rate scoring.
"""

from . import errors
from ._validation import derive_seed
from .audio import (
    AudioSignal,
    NoiseSpec,
    SnrNoiseMixer,
    augment_corpus,
    mix_at_snr,
    noise_decision,
    normalize,
    power,
    read_wav,
    synth_babble,
    synth_human_noise,
    write_wav,
)
from .decoder import (
    DecodeResult,
    DecoderConfig,
    Hypothesis,
    JointDecoder,
    combine_scores,
    decode,
    exhaustive_oracle,
    greedy_ctc,
)
from .demo import build_demo_corpus, render_report, render_table, run_demo
from .fusion import (
    FeatureSequence,
    ModalityFuser,
    NormParams,
    RateAlignmentPlan,
    frames_for_samples,
    fuse,
    layer_norm,
    plan_rate_alignment,
    read_features,
    strided_downsample,
    write_features,
)
from .landmarks import (
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
from .lattice import (
    PosteriorGrid,
    PrefixState,
    ctc_forward_loss,
    ctc_gradient,
    grid_from_json,
    grid_to_json,
    min_alignable_frames,
    prefix_extend,
    prefix_extend_batch,
    prefix_init,
    read_grid,
    write_grid,
)
from .manifest import Record, load_manifest, save_manifest
from .scorers import (
    BigramScorer,
    HybridLossConfig,
    Scorer,
    ScorerState,
    TableScorer,
    UniformScorer,
    check_scorer,
    cross_entropy_loss,
    hybrid_loss,
    teacher_forcing_matrix,
)
from .vocab import DEFAULT_VOCAB, SymbolTable, Vocabulary, make_teacher_target
from .wer import Step, WerBreakdown, align_words, corpus_wer, score_pair, tokenize

__version__ = "0.1.0"

__all__ = [
    "AudioSignal",
    "BigramScorer",
    "CropPlan",
    "DEFAULT_VOCAB",
    "DecodeResult",
    "DecoderConfig",
    "FeatureSequence",
    "HybridLossConfig",
    "Hypothesis",
    "JointDecoder",
    "LandmarkPreprocessor",
    "LandmarkTrack",
    "ModalityFuser",
    "NoiseSpec",
    "NormParams",
    "PosteriorGrid",
    "PrefixState",
    "RateAlignmentPlan",
    "Record",
    "Scorer",
    "ScorerState",
    "SimilarityTransform",
    "SnrNoiseMixer",
    "Step",
    "SymbolTable",
    "TableScorer",
    "UniformScorer",
    "Vocabulary",
    "WerBreakdown",
    "align_track",
    "align_words",
    "apply_frames",
    "augment_corpus",
    "build_demo_corpus",
    "check_scorer",
    "combine_scores",
    "corpus_wer",
    "cross_entropy_loss",
    "ctc_forward_loss",
    "ctc_gradient",
    "decode",
    "derive_seed",
    "errors",
    "estimate_similarity",
    "exhaustive_oracle",
    "flip_points",
    "frames_for_samples",
    "fuse",
    "greedy_ctc",
    "grid_from_json",
    "grid_to_json",
    "hybrid_loss",
    "interpolate_gaps",
    "layer_norm",
    "load_manifest",
    "make_teacher_target",
    "min_alignable_frames",
    "mix_at_snr",
    "mouth_roi",
    "noise_decision",
    "normalize",
    "plan_augmentation",
    "plan_rate_alignment",
    "power",
    "prefix_extend",
    "prefix_extend_batch",
    "prefix_init",
    "read_features",
    "read_grid",
    "read_landmarks",
    "read_reference",
    "read_wav",
    "render_report",
    "render_table",
    "run_demo",
    "save_manifest",
    "score_pair",
    "smooth",
    "strided_downsample",
    "synth_babble",
    "synth_human_noise",
    "teacher_forcing_matrix",
    "tokenize",
    "write_features",
    "write_grid",
    "write_landmarks",
    "write_wav",
]
