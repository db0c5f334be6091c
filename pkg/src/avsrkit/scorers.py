"""Label-sequence scorers and the losses built on their step distributions.

A scorer models p(y_l | y_1..y_{l-1}) over the decodable symbols
(characters plus [EOS/SOS], never [blank]).  The beam decoder consumes
scorers through three calls: ``start`` opens a state at [SOS],
``log_dist`` returns the next-symbol log-distribution indexed by
``decodable_index``, and ``step`` consumes one symbol and reports its
log-probability.  States are immutable values, so one parent state can
fan out to many children in parallel.

``TableScorer`` replays per-step distributions keyed by prefix string (a
file-backed stand-in for a trained autoregressive decoder),
``BigramScorer`` fits add-k smoothed character bigrams from transcripts,
``UniformScorer`` is the flat baseline.  ``cross_entropy_loss`` scores a
teacher-forced step matrix with label smoothing, and ``hybrid_loss``
interpolates it with the lattice loss.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np
from sklearn.base import BaseEstimator

from .errors import (
    BlankTokenError,
    ContextMismatchError,
    LengthMismatchError,
)
from .vocab import DEFAULT_VOCAB, SymbolTable, Vocabulary


@dataclass(frozen=True)
class ScorerState:
    """Consumed symbols (vocabulary ids) plus their accumulated log-prob."""

    tokens: tuple[int, ...]
    cumulative: float
    context: str | None = None


class Scorer:
    """Base class wiring ``step`` through ``log_dist``."""

    vocab: Vocabulary | SymbolTable = DEFAULT_VOCAB

    def start(self, context: str | None = None) -> ScorerState:
        return ScorerState((), 0.0, context)

    def log_dist(self, state: ScorerState) -> np.ndarray:
        raise NotImplementedError

    def step(self, state: ScorerState, token_id: int) -> tuple[ScorerState, float]:
        """Consume one symbol; returns the new state and its log-probability."""
        if token_id == self.vocab.blank_id:
            raise BlankTokenError("scorers never consume [blank]")
        inc = float(self.log_dist(state)[self.vocab.decodable_index(token_id)])
        child = ScorerState(state.tokens + (int(token_id),), state.cumulative + inc, state.context)
        return child, inc

    def sequence_score(self, tokens: Sequence[int], context: str | None = None) -> float:
        """Log-probability of a full symbol sequence (caller includes EOS)."""
        state = self.start(context)
        for tok in tokens:
            state, _ = self.step(state, tok)
        return state.cumulative


class UniformScorer(Scorer):
    """Flat distribution over the decodable symbols; the no-model baseline."""

    def __init__(self, vocab: Vocabulary | SymbolTable = DEFAULT_VOCAB):
        self.vocab = vocab
        n = len(vocab.decodable_ids)
        self._dist = np.full(n, -np.log(n))
        self._dist.setflags(write=False)

    def log_dist(self, state: ScorerState) -> np.ndarray:
        return self._dist


class TableScorer(Scorer):
    """Replays per-step distributions keyed by the decoded prefix string.

    ``steps[l]`` maps each prefix of length l to the distribution over
    its next symbol; prefixes missing from the table, and steps past its
    end, fall back to uniform.  A table may be bound to one utterance
    id, in which case starting it under a different context is an error
    rather than a silent mismatch.
    """

    def __init__(
        self,
        steps: Sequence[Mapping[str, Sequence[float]]],
        vocab: Vocabulary = DEFAULT_VOCAB,
        utterance: str | None = None,
        tol: float = 1e-6,
    ):
        self.vocab = vocab
        self.utterance = utterance
        n = len(vocab.decodable_ids)
        table: list[dict[str, np.ndarray]] = []
        for l, level in enumerate(steps):
            rows = {}
            for prefix, row in level.items():
                arr = np.asarray(row, dtype=np.float64)
                if arr.ndim != 1 or arr.shape[0] != n:
                    raise LengthMismatchError(
                        f"step {l} prefix {prefix!r} has {arr.size} entries, expected {n}"
                    )
                mass = _log_mass(arr)
                if not np.isfinite(mass) or abs(mass) > tol:
                    raise ValueError(
                        f"step {l} prefix {prefix!r} is not a normalized "
                        f"log-distribution (log mass {mass:.3e})"
                    )
                arr.setflags(write=False)
                rows[prefix] = arr
            table.append(rows)
        self._steps = table
        self._uniform = np.full(n, -np.log(n))
        self._uniform.setflags(write=False)

    def start(self, context: str | None = None) -> ScorerState:
        if (
            context is not None
            and self.utterance is not None
            and context != self.utterance
        ):
            raise ContextMismatchError(
                f"table is bound to {self.utterance!r}, got context {context!r}"
            )
        return ScorerState((), 0.0, context)

    def log_dist(self, state: ScorerState) -> np.ndarray:
        l = len(state.tokens)
        if l < len(self._steps):
            prefix = self.vocab.decode_tokens(state.tokens)
            hit = self._steps[l].get(prefix)
            if hit is not None:
                return hit
        return self._uniform

    @classmethod
    def from_file(cls, path: str | Path, vocab: Vocabulary = DEFAULT_VOCAB) -> "TableScorer":
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
        return cls(doc["steps"], vocab, utterance=doc.get("utterance"))

    def to_json(self) -> str:
        doc: dict = {"steps": [{p: r.tolist() for p, r in lvl.items()} for lvl in self._steps]}
        if self.utterance is not None:
            doc["utterance"] = self.utterance
        return json.dumps(doc)


class BigramScorer(Scorer, BaseEstimator):
    """Add-k smoothed character bigram model fitted from transcripts.

    [EOS/SOS] doubles as the start-of-sequence context, and every
    transcript contributes one terminal transition into it, so the
    fitted model puts real mass on ending a sequence.
    """

    def __init__(self, add_k: float = 1.0, vocab: Vocabulary = DEFAULT_VOCAB):
        self.add_k = add_k
        self.vocab = vocab

    def fit(self, texts: Iterable[str], y=None) -> "BigramScorer":
        n = len(self.vocab.decodable_ids)
        sos = self.vocab.decodable_index(self.vocab.eos_sos_id)
        counts = np.zeros((n, n))
        for text in texts:
            ids = [self.vocab.decodable_index(t) for t in self.vocab.encode_text(text)]
            prev = sos
            for idx in ids + [sos]:
                counts[prev, idx] += 1.0
                prev = idx
        smoothed = counts + self.add_k
        self.log_table_ = np.log(smoothed) - np.log(smoothed.sum(axis=1, keepdims=True))
        self.log_table_.setflags(write=False)
        return self

    def log_dist(self, state: ScorerState) -> np.ndarray:
        if not hasattr(self, "log_table_"):
            raise RuntimeError("BigramScorer must be fitted before scoring")
        if state.tokens:
            prev = self.vocab.decodable_index(state.tokens[-1])
        else:
            prev = self.vocab.decodable_index(self.vocab.eos_sos_id)
        return self.log_table_[prev]


def _log_mass(row: np.ndarray) -> float:
    m = np.max(row)
    if not np.isfinite(m):
        return float(m)
    return float(m + np.log(np.sum(np.exp(row - m))))


def check_scorer(scorer: Scorer, context: str | None = None) -> None:
    """Reject scorers whose start distribution is non-deterministic or
    unnormalized; decoding with either would be silently meaningless."""
    state = scorer.start(context)
    first = np.array(scorer.log_dist(state), dtype=np.float64, copy=True)
    second = np.asarray(scorer.log_dist(state), dtype=np.float64)
    if first.shape != second.shape or not np.array_equal(first, second):
        raise ValueError("scorer step distribution is not deterministic")
    mass = _log_mass(first)
    if not np.isfinite(mass) or abs(mass) > 1e-6:
        raise ValueError(f"scorer distribution is not normalized (log mass {mass:.3e})")


# ----------------------------------------------------------------------
# Losses
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class HybridLossConfig:
    """Interpolation weight on the CTC term and the label-smoothing mass."""

    ctc_weight: float = 0.2
    smoothing: float = 0.01

    def __post_init__(self):
        if not 0.0 <= self.ctc_weight <= 1.0:
            raise ValueError(f"ctc_weight must lie in [0, 1], got {self.ctc_weight}")
        if not 0.0 <= self.smoothing < 1.0:
            raise ValueError(f"smoothing must lie in [0, 1), got {self.smoothing}")


def teacher_forcing_matrix(
    scorer: Scorer,
    target: Sequence[int],
    context: str | None = None,
) -> np.ndarray:
    """L x |U| matrix of step distributions along the teacher sequence.

    Row l is the scorer's distribution after consuming target[:l]; the
    target should end with [EOS/SOS] so the final row scores sequence
    termination.
    """
    state = scorer.start(context)
    rows = []
    for tok in target:
        rows.append(np.asarray(scorer.log_dist(state), dtype=np.float64))
        state, _ = scorer.step(state, tok)
    n = len(scorer.vocab.decodable_ids)
    return np.array(rows, dtype=np.float64).reshape(len(rows), n)


def cross_entropy_loss(
    step_log_probs: np.ndarray,
    target: Sequence[int],
    smoothing: float = 0.01,
    vocab: Vocabulary | SymbolTable = DEFAULT_VOCAB,
) -> float:
    """Label-smoothed negative log-likelihood of a teacher-forced target.

    ``step_log_probs`` has one row per target symbol, laid out over the
    decodable set; ``target`` ends with [EOS/SOS].  Smoothing spreads
    that fraction of the target mass uniformly over all decodable
    symbols.
    """
    lp = np.asarray(step_log_probs, dtype=np.float64)
    ids = [int(t) for t in target]
    if lp.ndim != 2 or lp.shape[0] != len(ids):
        raise LengthMismatchError(
            f"step matrix has {lp.shape[0] if lp.ndim == 2 else 'bad'} rows, "
            f"target has {len(ids)} symbols"
        )
    if lp.shape[1] != len(vocab.decodable_ids):
        raise LengthMismatchError(
            f"step matrix is {lp.shape[1]} wide, decodable set has "
            f"{len(vocab.decodable_ids)} symbols"
        )
    if not ids or ids[-1] != vocab.eos_sos_id:
        raise ValueError("teacher target must end with [EOS/SOS]")
    cols = [vocab.decodable_index(t) for t in ids]
    hits = lp[np.arange(len(ids)), cols]
    total = -(1.0 - smoothing) * np.sum(hits) - smoothing * np.sum(np.mean(lp, axis=1))
    return float(total)


def hybrid_loss(
    ctc_nll: float,
    ce_nll: float,
    config: HybridLossConfig = HybridLossConfig(),
) -> float:
    """Weighted training loss: ctc_weight * ctc + (1 - ctc_weight) * ce."""
    lam = config.ctc_weight
    return lam * float(ctc_nll) + (1.0 - lam) * float(ce_nll)
