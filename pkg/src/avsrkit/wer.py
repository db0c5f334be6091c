"""Word error rate with a full substitution/deletion/insertion breakdown.

Hypotheses are aligned to references by minimum edit distance over word
tokens; the rate is (S + D + I) / N with N the reference word count.
Corpus aggregation sums counts first (total errors over total reference
words), which is not the mean of the per-utterance rates.
"""
from __future__ import annotations

from dataclasses import dataclass

from .errors import EmptyReferenceError

MATCH = "match"
SUB = "sub"
DEL = "del"
INS = "ins"


@dataclass(frozen=True)
class WerBreakdown:
    substitutions: int
    deletions: int
    insertions: int
    ref_len: int

    @property
    def errors(self) -> int:
        return self.substitutions + self.deletions + self.insertions

    @property
    def wer(self) -> float:
        if self.ref_len == 0:
            raise EmptyReferenceError("word error rate undefined for an empty reference")
        return self.errors / self.ref_len

    def to_json(self) -> dict:
        return {
            "substitutions": self.substitutions,
            "deletions": self.deletions,
            "insertions": self.insertions,
            "ref_len": self.ref_len,
            "errors": self.errors,
            "wer": self.wer if self.ref_len else None,
        }


@dataclass(frozen=True)
class Step:
    """One alignment edge.  ref_word is None for insertions, hyp_word
    for deletions."""

    ref_word: str | None
    hyp_word: str | None
    op: str


def tokenize(text: str) -> list[str]:
    """Split a transcript into word tokens on whitespace runs."""
    return text.split()


def align_words(
    reference: list[str], hypothesis: list[str]
) -> tuple[WerBreakdown, list[Step]]:
    """Minimum-edit-distance alignment over word tokens.

    Returns the error breakdown together with one optimal alignment
    trace.  Among equal-cost alignments, substitution is preferred over
    insertion over deletion.  The substitution preference is global:
    the chosen alignment pairs as many reference words with hypothesis
    words as any optimal alignment can.  That pairing count depends
    only on the unordered pair of sequences, so swapping the arguments
    swaps deletions with insertions and keeps substitutions fixed.
    """
    n, m = len(reference), len(hypothesis)
    # dist minimizes edit cost; among min-cost paths, pairs maximizes
    # the number of diagonal (match or substitution) steps.
    dist = [[0] * (m + 1) for _ in range(n + 1)]
    pairs = [[0] * (m + 1) for _ in range(n + 1)]
    for i in range(1, n + 1):
        dist[i][0] = i
    for j in range(1, m + 1):
        dist[0][j] = j
    for i in range(1, n + 1):
        for j in range(1, m + 1):
            hit = 0 if reference[i - 1] == hypothesis[j - 1] else 1
            best = min(
                dist[i - 1][j - 1] + hit,  # match or substitution
                dist[i][j - 1] + 1,  # insertion
                dist[i - 1][j] + 1,  # deletion
            )
            dist[i][j] = best
            paired = 0
            if dist[i - 1][j - 1] + hit == best:
                paired = pairs[i - 1][j - 1] + 1
            if dist[i][j - 1] + 1 == best:
                paired = max(paired, pairs[i][j - 1])
            if dist[i - 1][j] + 1 == best:
                paired = max(paired, pairs[i - 1][j])
            pairs[i][j] = paired

    trace: list[Step] = []
    subs = dels = ins = 0
    i, j = n, m
    while i > 0 or j > 0:
        if i > 0 and j > 0:
            hit = 0 if reference[i - 1] == hypothesis[j - 1] else 1
            if (
                dist[i][j] == dist[i - 1][j - 1] + hit
                and pairs[i][j] == pairs[i - 1][j - 1] + 1
            ):
                op = MATCH if hit == 0 else SUB
                trace.append(Step(reference[i - 1], hypothesis[j - 1], op))
                subs += hit
                i -= 1
                j -= 1
                continue
        if (
            j > 0
            and dist[i][j] == dist[i][j - 1] + 1
            and pairs[i][j] == pairs[i][j - 1]
        ):
            trace.append(Step(None, hypothesis[j - 1], INS))
            ins += 1
            j -= 1
            continue
        trace.append(Step(reference[i - 1], None, DEL))
        dels += 1
        i -= 1
    trace.reverse()
    return WerBreakdown(subs, dels, ins, n), trace


def score_pair(reference: str, hypothesis: str) -> WerBreakdown:
    """Breakdown for one (reference text, hypothesis text) pair."""
    breakdown, _ = align_words(tokenize(reference), tokenize(hypothesis))
    return breakdown


def corpus_wer(
    pairs: list[tuple[str, str]]
) -> tuple[WerBreakdown, list[WerBreakdown]]:
    """Aggregate WER over (reference, hypothesis) text pairs.

    The aggregate divides summed errors by summed reference lengths;
    per-pair breakdowns come back alongside for reporting.
    """
    if not pairs:
        raise ValueError("corpus_wer needs at least one pair")
    per_pair = [score_pair(ref, hyp) for ref, hyp in pairs]
    agg = WerBreakdown(
        sum(b.substitutions for b in per_pair),
        sum(b.deletions for b in per_pair),
        sum(b.insertions for b in per_pair),
        sum(b.ref_len for b in per_pair),
    )
    return agg, per_pair
