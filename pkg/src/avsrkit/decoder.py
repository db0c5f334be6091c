"""Joint lattice/scorer one-pass beam search with shallow fusion.

The decoder walks hypothesis levels synchronously: every surviving
prefix is extended by every decodable symbol, extensions ending in
[EOS/SOS] move to the finished pool with the complete-sequence lattice
score, and the rest compete for the beam on the fused score

    joint = alpha * ctc_prefix_score + (1 - alpha) * attention_score.

``exhaustive_oracle`` removes the beam approximation entirely by
enumerating and scoring every candidate sequence through the
complete-sequence lattice loss, which makes pruning soundness checkable
on desk-scale instances.  ``greedy_ctc`` is the no-search baseline.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from sklearn.base import BaseEstimator

from .errors import (
    EmptyResultError,
    ScorerMismatchError,
    SearchSpaceTooLargeError,
    UnalignableError,
)
from .lattice import (
    PosteriorGrid,
    PrefixState,
    ctc_forward_loss,
    prefix_extend_batch,
    prefix_init,
)
from .scorers import Scorer, ScorerState, UniformScorer, check_scorer
from .vocab import DEFAULT_VOCAB, SymbolTable, Vocabulary


@dataclass(frozen=True)
class DecoderConfig:
    """Search knobs: fusion weight, beam width, maximum output length.

    ``l_max=None`` means the frame count of the grid being decoded.
    """

    alpha: float = 0.1
    beam_width: int = 5
    l_max: int | None = None

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must lie in [0, 1], got {self.alpha}")
        if self.beam_width < 1:
            raise ValueError(f"beam_width must be >= 1, got {self.beam_width}")
        if self.l_max is not None and self.l_max < 0:
            raise ValueError(f"l_max must be >= 0, got {self.l_max}")


def combine_scores(alpha: float, ctc_score: float, att_score: float) -> float:
    """Shallow fusion; the endpoints return the surviving term literally
    so an exact-zero (-inf) on the unused side cannot poison the sum."""
    if alpha == 0.0:
        return float(att_score)
    if alpha == 1.0:
        return float(ctc_score)
    return alpha * float(ctc_score) + (1.0 - alpha) * float(att_score)


@dataclass(frozen=True)
class Hypothesis:
    """One decoded prefix with both scoring routes attached.

    Partial hypotheses carry the prefix-probability score in
    ``ctc_score``; complete ones end with [EOS/SOS] and carry the
    complete-sequence form instead.
    """

    tokens: tuple[int, ...]
    ctc_score: float
    att_score: float
    joint_score: float
    complete: bool
    prefix_state: PrefixState | None = field(repr=False, default=None)
    attn_state: ScorerState | None = field(repr=False, default=None)

    @property
    def char_tokens(self) -> tuple[int, ...]:
        """Tokens without the terminating [EOS/SOS]."""
        return self.tokens[:-1] if self.complete else self.tokens


def _rank_key(h: Hypothesis):
    # highest joint score first; ties broken lexicographically on the
    # character tokens, shorter sequences first
    return (-h.joint_score, h.char_tokens)


@dataclass(frozen=True)
class DecodeResult:
    """Best hypothesis plus the full ranked finished pool."""

    best: Hypothesis
    ranking: tuple[Hypothesis, ...]
    forced_eos: bool
    vocab: Vocabulary | SymbolTable = field(repr=False, default=DEFAULT_VOCAB)

    @property
    def tokens(self) -> tuple[int, ...]:
        return self.best.tokens

    @property
    def text(self) -> str | None:
        if isinstance(self.vocab, Vocabulary):
            return self.vocab.decode_tokens(self.best.tokens)
        return None

    def to_report(self) -> dict:
        def entry(h: Hypothesis) -> dict:
            e = {
                "tokens": list(h.tokens),
                "ctc_score": h.ctc_score,
                "att_score": h.att_score,
                "joint_score": h.joint_score,
            }
            if isinstance(self.vocab, Vocabulary):
                e["text"] = self.vocab.decode_tokens(h.tokens)
            return e

        return {
            "best": entry(self.best),
            "ranking": [entry(h) for h in self.ranking],
            "forced_eos": self.forced_eos,
        }


def _check_scorer_fit(grid: PosteriorGrid, scorer: Scorer, context: str | None) -> None:
    try:
        check_scorer(scorer, context)
    except ValueError as exc:
        raise ScorerMismatchError(str(exc)) from exc
    width = np.asarray(scorer.log_dist(scorer.start(context))).shape[0]
    expected = len(grid.vocab.decodable_ids)
    if width != expected:
        raise ScorerMismatchError(
            f"scorer emits {width}-wide distributions, grid vocabulary "
            f"needs {expected}"
        )


def decode(
    grid: PosteriorGrid,
    scorer: Scorer,
    config: DecoderConfig = DecoderConfig(),
    context: str | None = None,
) -> DecodeResult:
    """Level-synchronous beam search over the fused objective.

    Levels run 1..l_max; each level extends every active hypothesis by
    every decodable symbol, routes [EOS/SOS] extensions to the finished
    pool, and prunes the rest to ``beam_width`` survivors.  The finished
    pool is never pruned and the final ranking compares complete
    hypotheses of different lengths directly, with no length
    normalization.
    """
    grid.validate()
    _check_scorer_fit(grid, scorer, context)
    vocab = grid.vocab
    alpha = config.alpha
    T = grid.frame_count
    l_max = T if config.l_max is None else config.l_max
    eos = vocab.eos_sos_id
    eos_col = vocab.decodable_index(eos)
    symbols = np.array([i for i in vocab.decodable_ids if i != eos], dtype=np.int64)
    sym_cols = np.array([vocab.decodable_index(int(c)) for c in symbols])

    root = Hypothesis(
        tokens=(),
        ctc_score=0.0,
        att_score=0.0,
        joint_score=combine_scores(alpha, 0.0, 0.0),
        complete=False,
        prefix_state=prefix_init(grid),
        attn_state=scorer.start(context),
    )
    active: list[Hypothesis] = [root]
    finished: list[Hypothesis] = []

    def close(h: Hypothesis, dist: np.ndarray) -> Hypothesis:
        ctc_eos = h.prefix_state.eos_score()
        att_eos = h.att_score + float(dist[eos_col])
        return Hypothesis(
            tokens=h.tokens + (eos,),
            ctc_score=ctc_eos,
            att_score=att_eos,
            joint_score=combine_scores(alpha, ctc_eos, att_eos),
            complete=True,
        )

    for _level in range(1, l_max + 1):
        candidates = []
        for h in active:
            dist = np.asarray(scorer.log_dist(h.attn_state), dtype=np.float64)
            finished.append(close(h, dist))
            last = h.tokens[-1] if h.tokens else None
            gamma_n, gamma_b, psi, pscore = prefix_extend_batch(
                grid, h.prefix_state, last, symbols
            )
            att = h.att_score + dist[sym_cols]
            for k in range(len(symbols)):
                joint = combine_scores(alpha, float(pscore[k]), float(att[k]))
                candidates.append((joint, h, k, gamma_n, gamma_b, psi, pscore, att))
        candidates.sort(key=lambda c: (-c[0], c[1].tokens + (int(symbols[c[2]]),)))
        survivors = candidates[: config.beam_width]
        active = []
        for joint, h, k, gamma_n, gamma_b, psi, pscore, att in survivors:
            c = int(symbols[k])
            active.append(
                Hypothesis(
                    tokens=h.tokens + (c,),
                    ctc_score=float(pscore[k]),
                    att_score=float(att[k]),
                    joint_score=joint,
                    complete=False,
                    prefix_state=PrefixState(
                        gamma_n[:, k].copy(), gamma_b[:, k].copy(), float(psi[k])
                    ),
                    attn_state=ScorerState(
                        h.attn_state.tokens + (c,), float(att[k]), context
                    ),
                )
            )

    # Hypotheses surviving the last level have l_max characters; their
    # EOS completion cannot happen inside the loop (there is no level
    # l_max + 1), so close them here.  These are ordinary completions:
    # length counts characters only, the closing marker rides free.
    for h in active:
        dist = np.asarray(scorer.log_dist(h.attn_state), dtype=np.float64)
        finished.append(close(h, dist))

    forced = False
    if not finished:
        # Defensive: the root closes at level 1 and final survivors
        # close above, so an empty pool should be impossible.
        forced = True
        for h in active:
            dist = np.asarray(scorer.log_dist(h.attn_state), dtype=np.float64)
            finished.append(close(h, dist))
    if not finished:
        raise EmptyResultError("search produced no complete hypothesis")

    ranking = tuple(sorted(finished, key=_rank_key))
    return DecodeResult(ranking[0], ranking, forced, vocab)


def exhaustive_oracle(
    grid: PosteriorGrid,
    scorer: Scorer,
    config: DecoderConfig = DecoderConfig(),
    context: str | None = None,
    guard: int = 10**6,
) -> tuple[tuple[int, ...], float]:
    """Score every candidate sequence of length <= l_max and return the
    argmax (tokens including the closing [EOS/SOS], joint score).

    The lattice side is computed through the complete-sequence forward
    loss rather than the decoder's prefix recursion, so agreement with
    ``decode`` exercises two independent routes to the same objective.
    """
    vocab = grid.vocab
    alpha = config.alpha
    l_max = grid.frame_count if config.l_max is None else config.l_max
    chars = [i for i in vocab.decodable_ids if i != vocab.eos_sos_id]
    total = 0
    count = 1
    for _ in range(l_max + 1):
        total += count
        if total > guard:
            raise SearchSpaceTooLargeError(
                f"enumeration would visit more than {guard} sequences"
            )
        count *= len(chars)
    eos = vocab.eos_sos_id

    best_key = None
    best: tuple[tuple[int, ...], float] | None = None

    def consider(seq: tuple[int, ...]) -> None:
        nonlocal best, best_key
        try:
            ctc = -ctc_forward_loss(grid, list(seq))
        except UnalignableError:
            ctc = -np.inf
        att = scorer.sequence_score(list(seq) + [eos], context)
        joint = combine_scores(alpha, ctc, att)
        key = (-joint, seq)
        if best_key is None or key < best_key:
            best_key = key
            best = (seq + (eos,), joint)

    def walk(seq: tuple[int, ...]) -> None:
        consider(seq)
        if len(seq) < l_max:
            for c in chars:
                walk(seq + (c,))

    walk(())
    assert best is not None
    return best


def greedy_ctc(grid: PosteriorGrid) -> list[int]:
    """Per-frame argmax, collapse repeats, drop blanks; the no-search
    baseline."""
    path = np.argmax(grid.log_probs, axis=1)
    blank = grid.vocab.blank_id
    out: list[int] = []
    prev = None
    for tok in path:
        tok = int(tok)
        if tok != prev and tok != blank:
            out.append(tok)
        prev = tok
    return out


class JointDecoder(BaseEstimator):
    """Estimator-style front end over ``decode``.

    ``predict`` maps grids to transcripts; ``score`` is word accuracy
    (1 - corpus WER), so higher is better.
    """

    def __init__(
        self,
        alpha: float = 0.1,
        beam_width: int = 5,
        l_max: int | None = None,
        scorer: Scorer | None = None,
    ):
        self.alpha = alpha
        self.beam_width = beam_width
        self.l_max = l_max
        self.scorer = scorer

    def _config(self) -> DecoderConfig:
        return DecoderConfig(self.alpha, self.beam_width, self.l_max)

    def _scorer_for(self, grid: PosteriorGrid) -> Scorer:
        return self.scorer if self.scorer is not None else UniformScorer(grid.vocab)

    def decode_grid(self, grid: PosteriorGrid, context: str | None = None) -> DecodeResult:
        return decode(grid, self._scorer_for(grid), self._config(), context)

    def predict(
        self,
        grids: Iterable[PosteriorGrid],
        contexts: Sequence[str] | None = None,
    ) -> list[str]:
        out = []
        for i, grid in enumerate(grids):
            context = contexts[i] if contexts is not None else None
            result = self.decode_grid(grid, context)
            if result.text is None:
                raise ValueError("predict needs grids carrying a full vocabulary")
            out.append(result.text)
        return out

    def score(
        self,
        grids: Iterable[PosteriorGrid],
        references: Sequence[str],
        contexts: Sequence[str] | None = None,
    ) -> float:
        from .wer import corpus_wer

        hyps = self.predict(grids, contexts)
        aggregate, _ = corpus_wer(list(zip(references, hyps)))
        return 1.0 - aggregate.wer
