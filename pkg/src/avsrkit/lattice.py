"""CTC mathematics over per-frame posterior grids.

Three groups of operations live here, all in natural-log domain with
``-inf`` as the exact-zero sentinel:

* the blank-augmented forward recursion (training loss) and its
  forward-backward analytic gradient,
* the prefix-probability forward variables used by the beam decoder:
  for a decoded prefix, ``gamma_n[t]`` / ``gamma_b[t]`` hold the mass of
  CTC paths through frame t that end in the prefix's last symbol /
  in blank, and ``psi`` holds the total mass of complete label
  sequences that extend the prefix strictly,
* serialization of the T x V grid (binary container plus a JSON mirror
  for hand-written fixtures).

Everything is a pure function over immutable grids; prefix states are
independent values and safe to extend in parallel.
"""
from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from ._validation import as_float_matrix, check_token_ids
from .errors import (
    BlankExtensionError,
    EmptyGridError,
    UnalignableError,
)
from .vocab import DEFAULT_VOCAB, SymbolTable, Vocabulary

NEG_INF = -np.inf

GRID_MAGIC = b"CTCGRID1"


@dataclass(frozen=True)
class PosteriorGrid:
    """T x V lattice of per-frame log-probabilities (the decoder's input)."""

    log_probs: np.ndarray
    vocab: Vocabulary | SymbolTable = DEFAULT_VOCAB

    def __post_init__(self):
        # copy before freezing so the caller's array is never locked
        arr = as_float_matrix(self.log_probs, "log_probs").copy()
        arr.setflags(write=False)
        object.__setattr__(self, "log_probs", arr)
        if arr.shape[0] == 0:
            raise EmptyGridError("grid has zero frames")
        if arr.shape[1] != self.vocab.size:
            raise ValueError(
                f"grid has {arr.shape[1]} columns, vocabulary has {self.vocab.size}"
            )

    @property
    def frame_count(self) -> int:
        return self.log_probs.shape[0]

    @property
    def vocab_size(self) -> int:
        return self.log_probs.shape[1]

    def validate(self, tol: float = 1e-6) -> None:
        """Check that every row is a normalized log-distribution."""
        lp = self.log_probs
        if np.any(np.isnan(lp)) or np.any(lp == np.inf):
            raise ValueError("grid entries must be finite or -inf")
        row_mass = logsumexp_rows(lp)
        if np.any(np.abs(row_mass) > tol):
            worst = int(np.argmax(np.abs(row_mass)))
            raise ValueError(
                f"row {worst} is not normalized (log mass {row_mass[worst]:.3e})"
            )

    @classmethod
    def from_probs(cls, probs, vocab: Vocabulary | SymbolTable = DEFAULT_VOCAB) -> "PosteriorGrid":
        p = as_float_matrix(probs, "probs")
        with np.errstate(divide="ignore"):
            return cls(np.log(p), vocab)


def logsumexp_rows(lp: np.ndarray) -> np.ndarray:
    """Row-wise log-sum-exp, safe for rows of all -inf."""
    m = np.max(lp, axis=1)
    safe_m = np.where(np.isfinite(m), m, 0.0)
    s = np.sum(np.exp(lp - safe_m[:, None]), axis=1)
    with np.errstate(divide="ignore"):
        return np.where(np.isfinite(m), safe_m + np.log(s), m)


def _logaddexp(a, b):
    # np.logaddexp handles the -inf sentinel without warnings
    return np.logaddexp(a, b)


# ----------------------------------------------------------------------
# Forward loss and gradient (blank-augmented lattice)
# ----------------------------------------------------------------------


def _expanded_labels(target: Sequence[int], blank: int) -> np.ndarray:
    """Interleave blanks: [b, s1, b, s2, ..., b]."""
    ext = np.full(2 * len(target) + 1, blank, dtype=np.int64)
    ext[1::2] = target
    return ext


def min_alignable_frames(target: Sequence[int]) -> int:
    """Shortest T that can emit the target: length plus repeat separators."""
    repeats = sum(1 for a, b in zip(target, target[1:]) if a == b)
    return len(target) + repeats


def _check_loss_inputs(grid: PosteriorGrid, target: Sequence[int]) -> list[int]:
    blank = grid.vocab.blank_id
    ids = check_token_ids(target, grid.vocab_size)
    if blank in ids:
        raise BlankExtensionError("target may not contain the blank symbol")
    if grid.frame_count < min_alignable_frames(ids):
        raise UnalignableError(
            f"{grid.frame_count} frames cannot emit a target needing "
            f">= {min_alignable_frames(ids)}"
        )
    return ids


def _forward_alphas(lp: np.ndarray, ext: np.ndarray) -> np.ndarray:
    """alpha[t, s]: log-mass of paths through expanded state s at frame t,
    emission at t included."""
    T = lp.shape[0]
    S = len(ext)
    alpha = np.full((T, S), NEG_INF)
    alpha[0, 0] = lp[0, ext[0]]
    if S > 1:
        alpha[0, 1] = lp[0, ext[1]]
    # skip transition allowed into non-blank states that differ from s-2
    can_skip = np.zeros(S, dtype=bool)
    if S > 2:
        can_skip[2:] = (ext[2:] != ext[0]) & (ext[2:] != ext[:-2])
    for t in range(1, T):
        stay = alpha[t - 1]
        step = np.full(S, NEG_INF)
        step[1:] = alpha[t - 1, :-1]
        skip = np.full(S, NEG_INF)
        skip[2:] = np.where(can_skip[2:], alpha[t - 1, :-2], NEG_INF)
        alpha[t] = _logaddexp(_logaddexp(stay, step), skip) + lp[t, ext]
    return alpha


def ctc_forward_loss(grid: PosteriorGrid, target: Sequence[int]) -> float:
    """Negative log-likelihood of the target under CTC collapse rules.

    Sums, over every frame-level path that collapses to the target, the
    product of per-frame symbol probabilities; the standard lattice
    recursion makes this O(T * L).
    """
    ids = _check_loss_inputs(grid, target)
    lp = grid.log_probs
    blank = grid.vocab.blank_id
    if not ids:
        return float(-np.sum(lp[:, blank]))
    ext = _expanded_labels(ids, blank)
    alpha = _forward_alphas(lp, ext)
    total = _logaddexp(alpha[-1, -1], alpha[-1, -2])
    return float(-total)


def ctc_gradient(grid: PosteriorGrid, target: Sequence[int]) -> np.ndarray:
    """d(loss)/d(log_probs): T x V matrix, via forward-backward occupancy.

    The derivative is taken with respect to the grid's native log-domain
    entries, with no normalization constraint; entry (t, v) gets
    ``-mass(t, v) / p_total`` where mass(t, v) is the total probability
    of target-consistent paths that emit v at frame t.
    """
    ids = _check_loss_inputs(grid, target)
    lp = grid.log_probs
    blank = grid.vocab.blank_id
    T, V = lp.shape
    grad = np.zeros((T, V))
    if not ids:
        grad[:, blank] = -1.0
        return grad

    ext = _expanded_labels(ids, blank)
    S = len(ext)
    alpha = _forward_alphas(lp, ext)

    # beta[t, s]: log-mass of path suffixes over frames t+1..T given state s
    # at frame t (emission at t NOT included), so alpha + beta = through-mass.
    beta = np.full((T, S), NEG_INF)
    beta[-1, -1] = 0.0
    if S > 1:
        beta[-1, -2] = 0.0
    can_skip = np.zeros(S, dtype=bool)
    if S > 2:
        can_skip[2:] = (ext[2:] != ext[0]) & (ext[2:] != ext[:-2])
    for t in range(T - 2, -1, -1):
        nxt = beta[t + 1] + lp[t + 1, ext]
        stay = nxt
        step = np.full(S, NEG_INF)
        step[:-1] = nxt[1:]
        skip = np.full(S, NEG_INF)
        skip[:-2] = np.where(can_skip[2:], nxt[2:], NEG_INF)
        beta[t] = _logaddexp(_logaddexp(stay, step), skip)

    log_total = _logaddexp(alpha[-1, -1], alpha[-1, -2])
    through = alpha + beta  # T x S, log domain
    # accumulate states sharing a symbol (prob domain keeps this exact enough)
    shift = np.where(np.isfinite(log_total), log_total, 0.0)
    occupancy = np.exp(through - shift)
    for s in range(S):
        grad[:, ext[s]] -= occupancy[:, s]
    return grad


# ----------------------------------------------------------------------
# Prefix-probability forward variables (decoder side)
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class PrefixState:
    """Forward vectors of one decoded prefix, log domain.

    ``psi`` is the log-mass of all complete label sequences that extend
    this prefix by at least one symbol; together with ``eos_score`` it
    decomposes the cumulative prefix probability, so
    ``exp(psi) + exp(eos_score())`` is the total mass of complete
    sequences beginning with the prefix.
    """

    gamma_n: np.ndarray  # length T, paths ending in the prefix's last symbol
    gamma_b: np.ndarray  # length T, paths ending in blank
    psi: float

    def eos_score(self) -> float:
        """Log-mass of exactly this prefix as a complete sequence."""
        return float(_logaddexp(self.gamma_n[-1], self.gamma_b[-1]))

    def prefix_score(self) -> float:
        """Cumulative prefix probability (strict extensions plus the
        prefix itself); what the beam search ranks open hypotheses by."""
        return float(_logaddexp(self.psi, self.eos_score()))


def _log_diff(a: float, b: float) -> float:
    """log(exp(a) - exp(b)) for a >= b; float jitter pushing b past a
    collapses to the exact-zero sentinel."""
    if b >= a:
        return NEG_INF
    return a + np.log1p(-np.exp(b - a))


def prefix_init(grid: PosteriorGrid) -> PrefixState:
    """State of the empty ([SOS]) prefix: gamma_b is the running blank
    product, gamma_n identically zero, psi the mass left over for
    nonempty sequences."""
    lp = grid.log_probs
    blank = grid.vocab.blank_id
    gamma_b = np.cumsum(lp[:, blank])
    gamma_n = np.full(grid.frame_count, NEG_INF)
    psi = _log_diff(0.0, float(gamma_b[-1]))
    return PrefixState(gamma_n, gamma_b, psi)


def prefix_extend(
    grid: PosteriorGrid,
    parent: PrefixState,
    parent_last: int | None,
    c: int,
    c_is_eos: bool = False,
):
    """Extend a prefix by symbol c, or close it with [EOS/SOS].

    ``parent_last`` is the parent's final symbol id, or None for the
    empty prefix.  Returns a new PrefixState, or the scalar EOS-form log
    score ``log(gamma_n[T] + gamma_b[T])`` when ``c_is_eos``.  The
    running sum of first-emission events gives the cumulative prefix
    probability of the child; its strict-extension part lands in psi.
    """
    if c_is_eos:
        return parent.eos_score()
    if c == grid.vocab.blank_id:
        raise BlankExtensionError("cannot extend a prefix with [blank]")
    lp = grid.log_probs
    blank = grid.vocab.blank_id
    T = grid.frame_count

    gamma_n = np.full(T, NEG_INF)
    gamma_b = np.full(T, NEG_INF)
    gamma_n[0] = lp[0, c] if parent_last is None else NEG_INF
    cumulative = gamma_n[0]
    for t in range(1, T):
        if parent_last == c:
            phi = parent.gamma_b[t - 1]
        else:
            phi = _logaddexp(parent.gamma_b[t - 1], parent.gamma_n[t - 1])
        gamma_n[t] = _logaddexp(gamma_n[t - 1], phi) + lp[t, c]
        gamma_b[t] = _logaddexp(gamma_b[t - 1], gamma_n[t - 1]) + lp[t, blank]
        cumulative = _logaddexp(cumulative, phi + lp[t, c])
    exact = _logaddexp(gamma_n[-1], gamma_b[-1])
    return PrefixState(gamma_n, gamma_b, _log_diff(float(cumulative), float(exact)))


def prefix_extend_batch(
    grid: PosteriorGrid,
    parent: PrefixState,
    parent_last: int | None,
    symbols: np.ndarray,
):
    """Vectorized prefix_extend over several candidate symbols at once.

    Returns (gamma_n, gamma_b, psi, prefix_score) with shapes (T, K),
    (T, K), (K,), (K,), column k corresponding to symbols[k];
    prefix_score is the cumulative form the search ranks by.  This is
    the decoder's hot loop: one O(T) sweep covers the whole candidate
    set of a hypothesis.
    """
    lp = grid.log_probs
    blank = grid.vocab.blank_id
    T = grid.frame_count
    K = len(symbols)

    gamma_n = np.full((T, K), NEG_INF)
    gamma_b = np.full((T, K), NEG_INF)
    if parent_last is None:
        gamma_n[0] = lp[0, symbols]
    cumulative = gamma_n[0].copy()

    # phi differs only in the column repeating the parent's last symbol
    phi_base = _logaddexp(parent.gamma_b, parent.gamma_n)  # length T
    repeat_col = None
    if parent_last is not None:
        hits = np.nonzero(symbols == parent_last)[0]
        if hits.size:
            repeat_col = int(hits[0])

    lp_sym = lp[:, symbols]  # T x K
    lp_blank = lp[:, blank]  # T
    for t in range(1, T):
        phi = np.full(K, phi_base[t - 1])
        if repeat_col is not None:
            phi[repeat_col] = parent.gamma_b[t - 1]
        gamma_b[t] = _logaddexp(gamma_b[t - 1], gamma_n[t - 1]) + lp_blank[t]
        gamma_n[t] = _logaddexp(gamma_n[t - 1], phi) + lp_sym[t]
        cumulative = _logaddexp(cumulative, phi + lp_sym[t])
    exact = _logaddexp(gamma_n[-1], gamma_b[-1])
    psi = np.array([_log_diff(float(c), float(e)) for c, e in zip(cumulative, exact)])
    return gamma_n, gamma_b, psi, cumulative


# ----------------------------------------------------------------------
# Serialization
# ----------------------------------------------------------------------


def write_grid(path: str | Path, grid: PosteriorGrid) -> None:
    """Binary container: magic, u32 T, u32 V, u8 domain flag, f64 data LE."""
    lp = grid.log_probs
    header = GRID_MAGIC + struct.pack("<IIB", lp.shape[0], lp.shape[1], 1)
    Path(path).write_bytes(header + np.ascontiguousarray(lp, dtype="<f8").tobytes())


def read_grid(path: str | Path, vocab: Vocabulary | SymbolTable = DEFAULT_VOCAB) -> PosteriorGrid:
    """Read a grid from the binary container or its JSON mirror."""
    raw = Path(path).read_bytes()
    if raw[: len(GRID_MAGIC)] == GRID_MAGIC:
        t, v, flag = struct.unpack_from("<IIB", raw, len(GRID_MAGIC))
        body = np.frombuffer(raw, dtype="<f8", offset=len(GRID_MAGIC) + 9)
        if body.size != t * v:
            raise ValueError(f"grid payload has {body.size} values, expected {t * v}")
        data = body.reshape(t, v).astype(np.float64)
        if flag == 1:
            return PosteriorGrid(data, vocab)
        return PosteriorGrid.from_probs(data, vocab)
    return grid_from_json(raw.decode("utf-8"), vocab)


def grid_from_json(text: str, vocab: Vocabulary | SymbolTable = DEFAULT_VOCAB) -> PosteriorGrid:
    """JSON mirror: {"domain": "log"|"prob", "rows": [[...], ...]}."""
    doc = json.loads(text)
    rows = np.asarray(doc["rows"], dtype=np.float64)
    domain = doc.get("domain", "log")
    if domain == "log":
        return PosteriorGrid(rows, vocab)
    if domain == "prob":
        return PosteriorGrid.from_probs(rows, vocab)
    raise ValueError(f"unknown grid domain {domain!r}")


def grid_to_json(grid: PosteriorGrid) -> str:
    return json.dumps({"domain": "log", "rows": grid.log_probs.tolist()})
