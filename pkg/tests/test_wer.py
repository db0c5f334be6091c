"""Word error rate: minimal edit alignment, count conventions, and the
corpus aggregate."""
import numpy as np
import pytest

from avsrkit.errors import EmptyReferenceError
from avsrkit.wer import (
    Step,
    WerBreakdown,
    align_words,
    corpus_wer,
    score_pair,
    tokenize,
)

from _oracles import edit_distance

WORDS = ["THE", "A", "CAT", "SAT", "ON", "MAT", "DOG", "RAN", "BLUE", "SKY"]


def rand_words(rng, lo=0, hi=8):
    n = int(rng.integers(lo, hi + 1))
    return [WORDS[int(rng.integers(0, len(WORDS)))] for _ in range(n)]


# ----------------------------------------------------------------------
# Hand-counted fixtures
# ----------------------------------------------------------------------

HAND_CASES = [
    # reference, hypothesis, (S, D, I)
    ("THE CAT SAT", "THE CAT SAT", (0, 0, 0)),
    ("THE CAT SAT", "THE CAT", (0, 1, 0)),
    ("THE CAT", "THE CAT SAT", (0, 0, 1)),
    ("THE CAT SAT", "THE DOG SAT", (1, 0, 0)),
    ("THE CAT SAT", "", (0, 3, 0)),
    ("", "THE CAT", (0, 0, 2)),
    ("A B", "B A", (2, 0, 0)),  # two subs beat del + match + ins
    ("THE CAT SAT ON THE MAT", "THE CAT ON MAT", (0, 2, 0)),
    ("BLUE SKY", "THE BLUE SKY RAN", (0, 0, 2)),
    ("DOG DOG DOG", "DOG", (0, 2, 0)),
]


@pytest.mark.parametrize("ref,hyp,counts", HAND_CASES)
def test_hand_counted_pairs(ref, hyp, counts):
    got = score_pair(ref, hyp)
    assert (got.substitutions, got.deletions, got.insertions) == counts
    assert got.ref_len == len(tokenize(ref))


def test_wer_is_errors_over_reference_length():
    b = score_pair("THE CAT SAT", "THE DOG")
    assert b.errors == b.substitutions + b.deletions + b.insertions
    np.testing.assert_allclose(b.wer, b.errors / 3)


def test_empty_reference_rate_is_an_error():
    b = score_pair("", "SOMETHING")
    assert b.insertions == 1
    with pytest.raises(EmptyReferenceError):
        _ = b.wer


def test_tokenize_splits_on_any_whitespace():
    assert tokenize("  THE   CAT\tSAT \n") == ["THE", "CAT", "SAT"]
    assert tokenize("") == []


# ----------------------------------------------------------------------
# Agreement with the plain edit distance
# ----------------------------------------------------------------------

def test_total_errors_equal_levenshtein_distance():
    """2000 random pairs: S + D + I always equals the plain
    word-level edit distance computed independently."""
    rng = np.random.default_rng(501)
    for _ in range(2000):
        ref = rand_words(rng)
        hyp = rand_words(rng)
        b, steps = align_words(ref, hyp)
        assert b.errors == edit_distance(ref, hyp)
        assert b.ref_len == len(ref)
        replay_ref = [s.ref_word for s in steps if s.op in ("match", "sub", "del")]
        replay_hyp = [s.hyp_word for s in steps if s.op in ("match", "sub", "ins")]
        assert replay_ref == ref
        assert replay_hyp == hyp
        for s in steps:
            if s.op == "match":
                assert s.ref_word == s.hyp_word
            elif s.op == "sub":
                assert s.ref_word != s.hyp_word


def test_counts_mirror_under_swapping_arguments():
    """Swapping reference and hypothesis swaps deletions with
    insertions and preserves substitutions."""
    rng = np.random.default_rng(503)
    for _ in range(500):
        a = rand_words(rng)
        b = rand_words(rng)
        fwd, _ = align_words(a, b)
        rev, _ = align_words(b, a)
        assert fwd.substitutions == rev.substitutions
        assert fwd.deletions == rev.insertions
        assert fwd.insertions == rev.deletions


def test_errors_obey_the_triangle_inequality():
    rng = np.random.default_rng(509)
    for _ in range(300):
        a = rand_words(rng, 0, 6)
        b = rand_words(rng, 0, 6)
        c = rand_words(rng, 0, 6)
        ab = align_words(a, b)[0].errors
        bc = align_words(b, c)[0].errors
        ac = align_words(a, c)[0].errors
        assert ac <= ab + bc


def test_alignment_prefers_substitution_over_paired_indel():
    """When one word differs, a single substitution (not delete plus
    insert) is reported."""
    _, steps = align_words(["A", "CAT", "SAT"], ["A", "DOG", "SAT"])
    assert [s.op for s in steps] == ["match", "sub", "match"]


# ----------------------------------------------------------------------
# Corpus aggregation
# ----------------------------------------------------------------------

def test_corpus_wer_sums_counts_not_rates():
    """The corpus rate is total errors over total reference words, so a
    long utterance weighs more than a short one."""
    pairs = [
        ("THE CAT SAT ON THE MAT", "THE CAT SAT ON THE MAT"),  # 0/6
        ("A", "B"),  # 1/1
    ]
    agg, per = corpus_wer(pairs)
    assert agg.ref_len == 7
    assert agg.errors == 1
    np.testing.assert_allclose(agg.wer, 1 / 7)
    assert len(per) == 2
    assert per[0].errors == 0 and per[1].errors == 1
    # averaging the per-utterance rates would give 0.5, not 1/7
    assert abs(np.mean([0.0, 1.0]) - agg.wer) > 0.3


def test_corpus_wer_random_agreement():
    rng = np.random.default_rng(521)
    pairs = []
    for _ in range(50):
        pairs.append((" ".join(rand_words(rng, 1, 6)), " ".join(rand_words(rng))))
    agg, per = corpus_wer(pairs)
    assert agg.errors == sum(p.errors for p in per)
    assert agg.ref_len == sum(p.ref_len for p in per)
    assert agg.substitutions == sum(p.substitutions for p in per)


def test_breakdown_json_shape():
    b = WerBreakdown(substitutions=1, deletions=2, insertions=3, ref_len=10)
    doc = b.to_json()
    assert doc["substitutions"] == 1
    assert doc["errors"] == 6
    np.testing.assert_allclose(doc["wer"], 0.6)


def test_step_is_frozen_record():
    s = Step(ref_word="A", hyp_word="B", op="sub")
    with pytest.raises(AttributeError):
        s.op = "match"
