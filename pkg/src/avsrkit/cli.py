"""Command-line entry point wiring the toolkit's modules together.

Every subcommand is a deterministic function of its flags, input bytes
and seed.  Usage mistakes exit 2 (argparse); data problems exit 1 with
a one-line machine-readable JSON object on standard error.  Commands
print human-readable results on standard output and, where a
``--report`` flag exists, write the full machine-readable JSON
alongside.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from ._validation import derive_seed
from .audio import (
    NoiseSpec,
    mix_at_snr,
    noise_decision,
    read_wav,
    synth_babble,
    synth_human_noise,
    write_wav,
)
from .decoder import DecoderConfig, DecodeResult, decode, greedy_ctc
from .demo import render_report, render_table, run_demo
from .errors import AvsrKitError
from .lattice import ctc_forward_loss, read_grid
from .landmarks import (
    LandmarkPreprocessor,
    read_landmarks,
    read_reference,
)
from .scorers import BigramScorer, Scorer, TableScorer, UniformScorer
from .vocab import DEFAULT_VOCAB, Vocabulary
from .wer import corpus_wer

_BABBLE_MIN = 20


def _load_vocab(path: str | None) -> Vocabulary:
    return DEFAULT_VOCAB if path is None else Vocabulary.from_file(path)


def _build_scorer(spec: str, vocab: Vocabulary) -> Scorer:
    """Parse a scorer spec: uniform, table:<json>, or bigram:<corpus>."""
    if spec == "uniform":
        return UniformScorer(vocab)
    kind, sep, path = spec.partition(":")
    if sep and kind == "table":
        return TableScorer.from_file(path, vocab)
    if sep and kind == "bigram":
        with open(path) as f:
            texts = [line.strip() for line in f if line.strip()]
        return BigramScorer(vocab=vocab).fit(texts)
    raise ValueError(
        f"scorer spec {spec!r} not understood; use uniform, table:<file> "
        "or bigram:<file>"
    )


def _write_report(path: str | None, payload: dict) -> None:
    if path is not None:
        Path(path).write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n")


def cmd_decode(args: argparse.Namespace) -> int:
    vocab = _load_vocab(args.vocab)
    grid = read_grid(args.grid, vocab)
    if args.mode == "greedy":
        tokens = greedy_ctc(grid)
        text = vocab.decode_tokens(tokens)
        print(text)
        _write_report(
            args.report,
            {"mode": "greedy", "transcript": text, "tokens": list(tokens)},
        )
        return 0
    alpha = {"ctc": 1.0, "attention": 0.0}.get(args.mode, args.alpha)
    config = DecoderConfig(alpha=alpha, beam_width=args.beam_width, l_max=args.l_max)
    scorer = _build_scorer(args.scorer, vocab)
    result: DecodeResult = decode(grid, scorer, config, context=args.context)
    print(result.text)
    report = result.to_report()
    report["mode"] = args.mode
    _write_report(args.report, report)
    return 0


def cmd_ctc_loss(args: argparse.Namespace) -> int:
    vocab = _load_vocab(args.vocab)
    grid = read_grid(args.grid, vocab)
    target = vocab.encode_text(args.text)
    loss = ctc_forward_loss(grid, target) + 0.0  # normalize -0.0
    print(f"{loss:.6f}")
    _write_report(
        args.report,
        {
            "loss": loss,
            "frames": grid.frame_count,
            "target_length": len(target),
            "text": args.text,
        },
    )
    return 0


def cmd_wer(args: argparse.Namespace) -> int:
    refs = Path(args.ref).read_text().splitlines()
    hyps = Path(args.hyp).read_text().splitlines()
    if len(refs) != len(hyps):
        raise ValueError(
            f"line count mismatch: {len(refs)} references, {len(hyps)} hypotheses"
        )
    if not refs:
        raise ValueError("reference file is empty")
    aggregate, per_pair = corpus_wer(list(zip(refs, hyps)))
    print(f"WER {aggregate.wer:.4f}")
    print(
        f"S={aggregate.substitutions} D={aggregate.deletions} "
        f"I={aggregate.insertions} N={aggregate.ref_len}"
    )
    if args.per_utt is not None:
        _write_report(
            args.per_utt,
            {
                "aggregate": aggregate.to_json(),
                "utterances": [
                    {"line": i + 1, "reference": r, "hypothesis": h, **b.to_json()}
                    for i, ((r, h), b) in enumerate(zip(zip(refs, hyps), per_pair))
                ],
            },
        )
    return 0


def _noise_sources(directory: str | None, need_hint: str) -> list:
    if directory is None:
        raise ValueError(f"--sources <dir> is required for {need_hint} noise")
    paths = sorted(Path(directory).glob("*.wav"))
    if not paths:
        raise ValueError(f"no .wav files under {directory}")
    return [read_wav(p) for p in paths]


def cmd_mix_noise(args: argparse.Namespace) -> int:
    signal = read_wav(args.in_path)
    uid = Path(args.in_path).stem
    kind, sep, noise_path = args.noise.partition(":")
    if kind not in ("babble", "human", "file"):
        raise ValueError(f"--noise must be babble, human or file:<path>, got {args.noise!r}")
    if kind == "file" and not sep:
        raise ValueError("file noise needs a path: --noise file:<path>")
    spec = NoiseSpec(
        kind=kind,
        snr_db=args.snr_db,
        apply_prob=args.prob,
        seed=args.seed,
        path=noise_path or None,
    )
    applied = noise_decision(spec, uid)
    if applied:
        utt_seed = derive_seed(spec.seed, "train", "noise", uid)
        if kind == "babble":
            noise = synth_babble(
                _noise_sources(args.sources, "babble"), len(signal), utt_seed
            )
        elif kind == "human":
            noise = synth_human_noise(
                _noise_sources(args.sources, "human"), len(signal), utt_seed
            )
        else:
            noise = read_wav(noise_path)
        out = mix_at_snr(signal, noise, spec.snr_db, np.random.default_rng(utt_seed))
    else:
        out = signal
    write_wav(args.out_path, out)
    print(
        json.dumps(
            {
                "utterance": uid,
                "applied": applied,
                "kind": kind,
                "snr_db": spec.snr_db,
                "apply_prob": spec.apply_prob,
                "seed": spec.seed,
                "out": str(args.out_path),
            },
            sort_keys=True,
        )
    )
    return 0


def cmd_prep_landmarks(args: argparse.Namespace) -> int:
    track = read_landmarks(args.track)
    reference = read_reference(args.reference)
    image_size = None
    if args.image_size is not None:
        h, _, w = args.image_size.partition("x")
        image_size = (int(h), int(w))
    pre = LandmarkPreprocessor(
        window=args.window,
        roi_size=args.roi_size,
        crop_size=args.crop_size,
        augment=args.aug,
        seed=args.seed,
        image_size=image_size,
    )
    pre.fit(reference).transform(track)
    payload = {
        "utterance": Path(args.track).stem,
        "frames": track.frame_count,
        "window": args.window,
        "transforms": [
            {
                "scale": t.scale,
                "rotation": t.rotation,
                "translation": list(t.translation),
                "residual": t.residual,
            }
            for t in pre.transforms_
        ],
        "plan": pre.plan_.to_json(),
    }
    text = json.dumps(payload, sort_keys=True, indent=2)
    if args.out is not None:
        Path(args.out).write_text(text + "\n")
        print(f"wrote {args.out}")
    else:
        print(text)
    return 0


def cmd_align_rate(args: argparse.Namespace) -> int:
    from .fusion import plan_rate_alignment

    plan = plan_rate_alignment(args.samples, args.visual_frames, args.window, args.hop)
    frontend = plan.frontend_frames  # already net of any truncated vector
    print(f"front-end frames: {frontend}")
    print(f"fused frames: {args.visual_frames}")
    print(
        f"pad front/back: {plan.pad_front}/{plan.pad_back}, "
        f"truncated: {plan.truncate_frames}"
    )
    _write_report(
        args.report,
        {
            "samples": args.samples,
            "visual_frames": args.visual_frames,
            "window": args.window,
            "hop": args.hop,
            "pad_front": plan.pad_front,
            "pad_back": plan.pad_back,
            "truncate_frames": plan.truncate_frames,
            "frontend_frames": frontend,
            "fused_frames": args.visual_frames,
        },
    )
    return 0


def cmd_demo(args: argparse.Namespace) -> int:
    report = run_demo(seed=args.seed, n_utterances=args.utterances, noise=args.noise)
    sys.stdout.write(render_table(report))
    if args.out is not None:
        Path(args.out).write_text(render_report(report))
        print(f"wrote {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="avsrkit",
        description="Sequence decoding and evaluation toolkit for "
        "audio-visual speech recognition.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    fmt = argparse.ArgumentDefaultsHelpFormatter

    p = sub.add_parser(
        "decode",
        formatter_class=fmt,
        help="beam-search decode a posterior grid with score fusion",
    )
    p.add_argument("--grid", required=True, help="posterior grid file (binary or JSON)")
    p.add_argument(
        "--scorer",
        default="uniform",
        help="uniform, table:<json file>, or bigram:<transcript file>",
    )
    p.add_argument("--alpha", type=float, default=0.1, help="lattice score weight")
    p.add_argument("--beam-width", type=int, default=5, help="hypotheses kept per length")
    p.add_argument("--l-max", type=int, default=None, help="max output length (default: frame count)")
    p.add_argument(
        "--mode",
        choices=("joint", "ctc", "attention", "greedy"),
        default="joint",
        help="joint fusion, single-score, or frame-wise greedy collapse",
    )
    p.add_argument("--context", default=None, help="utterance id the scorer must match")
    p.add_argument("--vocab", default=None, help="JSON symbol list overriding the default")
    p.add_argument("--report", default=None, help="write ranked hypotheses as JSON here")
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser(
        "ctc-loss",
        formatter_class=fmt,
        help="alignment-marginal negative log-likelihood of a transcript",
    )
    p.add_argument("--grid", required=True, help="posterior grid file (binary or JSON)")
    p.add_argument("--text", required=True, help="target transcript")
    p.add_argument("--vocab", default=None, help="JSON symbol list overriding the default")
    p.add_argument("--report", default=None, help="write loss details as JSON here")
    p.set_defaults(func=cmd_ctc_loss)

    p = sub.add_parser(
        "wer", formatter_class=fmt, help="word error rate between two transcript files"
    )
    p.add_argument("--ref", required=True, help="reference file, one utterance per line")
    p.add_argument("--hyp", required=True, help="hypothesis file, line-aligned with --ref")
    p.add_argument("--per-utt", default=None, help="write per-utterance breakdowns here")
    p.set_defaults(func=cmd_wer)

    p = sub.add_parser(
        "mix-noise", formatter_class=fmt, help="add noise to a waveform at an exact SNR"
    )
    p.add_argument("--in", dest="in_path", required=True, help="input WAV (mono 16-bit)")
    p.add_argument("--out", dest="out_path", required=True, help="output WAV path")
    p.add_argument("--snr-db", type=float, default=5.0, help="target signal-to-noise ratio")
    p.add_argument(
        "--noise", default="babble", help="babble, human, or file:<wav path>"
    )
    p.add_argument("--prob", type=float, default=0.25, help="per-utterance apply probability")
    p.add_argument("--seed", type=int, default=0, help="corpus seed")
    p.add_argument(
        "--sources", default=None, help="directory of source WAVs for babble/human noise"
    )
    p.set_defaults(func=cmd_mix_noise)

    p = sub.add_parser(
        "prep-landmarks",
        formatter_class=fmt,
        help="interpolate, smooth and align a landmark track; plan the mouth crop",
    )
    p.add_argument("--track", required=True, help="landmark CSV (frame,point,x,y,valid)")
    p.add_argument("--reference", required=True, help="single-frame reference landmark CSV")
    p.add_argument("--window", type=int, default=12, help="smoothing window width")
    p.add_argument("--roi-size", type=int, default=120, help="mouth box side in pixels")
    p.add_argument("--crop-size", type=int, default=112, help="training sub-crop side")
    p.add_argument("--aug", action="store_true", help="draw a seeded sub-crop and flip")
    p.add_argument("--seed", type=int, default=0, help="augmentation seed")
    p.add_argument("--image-size", default=None, help="HxW bounds for box clamping")
    p.add_argument("--out", default=None, help="write the JSON here instead of stdout")
    p.set_defaults(func=cmd_prep_landmarks)

    p = sub.add_parser(
        "align-rate",
        formatter_class=fmt,
        help="pad/truncate plan making audio frames exactly twice the visual count",
    )
    p.add_argument("--visual-frames", type=int, required=True, help="visual frame count")
    p.add_argument("--samples", type=int, required=True, help="audio sample count")
    p.add_argument("--window", type=int, default=400, help="front-end window in samples")
    p.add_argument("--hop", type=int, default=320, help="front-end hop in samples")
    p.add_argument("--report", default=None, help="write the plan as JSON here")
    p.set_defaults(func=cmd_align_rate)

    p = sub.add_parser(
        "demo",
        formatter_class=fmt,
        help="synthetic corpus comparing greedy, single-score and fused decoding",
    )
    p.add_argument("--seed", type=int, default=7, help="corpus seed")
    p.add_argument("--utterances", type=int, default=12, help="corpus size")
    p.add_argument(
        "--noise",
        type=float,
        default=0.3,
        help="grid noise level; above 0.1 greedy merges doubled letters",
    )
    p.add_argument("--out", default=None, help="write the byte-stable JSON report here")
    p.set_defaults(func=cmd_demo)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except BrokenPipeError:
        return 1
    except (AvsrKitError, ValueError, OSError, json.JSONDecodeError) as exc:
        sys.stderr.write(
            json.dumps({"error": type(exc).__name__, "message": str(exc)}) + "\n"
        )
        return 1


if __name__ == "__main__":
    sys.exit(main())
