"""Label-side scorers, the scorer contract checker, and the hybrid
training loss."""
import json
import math

import numpy as np
import pytest

from avsrkit.errors import ContextMismatchError, LengthMismatchError
from avsrkit.scorers import (
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
from avsrkit.vocab import DEFAULT_VOCAB, SymbolTable, make_teacher_target


def test_uniform_scorer_is_flat_and_normalized():
    sc = UniformScorer(DEFAULT_VOCAB)
    dist = sc.log_dist(sc.start())
    n = len(DEFAULT_VOCAB.decodable_ids)
    np.testing.assert_allclose(dist, -math.log(n), atol=1e-12)
    np.testing.assert_allclose(np.logaddexp.reduce(dist), 0.0, atol=1e-12)


def test_uniform_sequence_score_is_length_times_log_n():
    sc = UniformScorer(DEFAULT_VOCAB)
    n = len(DEFAULT_VOCAB.decodable_ids)
    seq = make_teacher_target(DEFAULT_VOCAB, "HI")
    np.testing.assert_allclose(sc.sequence_score(seq), -3 * math.log(n), atol=1e-12)


def test_scorer_step_returns_increment():
    sc = UniformScorer(DEFAULT_VOCAB)
    state = sc.start()
    nxt, inc = sc.step(state, 0)
    assert isinstance(nxt, ScorerState)
    assert nxt.tokens == (0,)
    np.testing.assert_allclose(inc, -math.log(len(DEFAULT_VOCAB.decodable_ids)))


def test_table_scorer_serves_programmed_rows():
    """steps[l] keys prefixes of length l; lookups replay the rows."""
    st = SymbolTable(4)
    row_root = np.log(np.array([0.7, 0.2, 0.1]))
    row_after0 = np.log(np.array([0.1, 0.1, 0.8]))
    sc = TableScorer([{"": row_root}, {"0": row_after0}], st)
    s0 = sc.start()
    np.testing.assert_allclose(sc.log_dist(s0), row_root, atol=1e-12)
    s1, inc = sc.step(s0, 0)
    np.testing.assert_allclose(inc, row_root[0], atol=1e-12)
    np.testing.assert_allclose(sc.log_dist(s1), row_after0, atol=1e-12)


def test_table_scorer_falls_back_to_uniform_for_unknown_prefixes():
    st = SymbolTable(4)
    sc = TableScorer([{"": np.log([0.5, 0.25, 0.25])}], st)
    s0 = sc.start()
    n = len(st.decodable_ids)
    off_table, _ = sc.step(s0, 1)
    np.testing.assert_allclose(sc.log_dist(off_table), -math.log(n), atol=1e-12)
    deeper = TableScorer([{"": np.log([0.5, 0.25, 0.25])}, {}], st)
    s1, _ = deeper.step(deeper.start(), 0)
    np.testing.assert_allclose(deeper.log_dist(s1), -math.log(n), atol=1e-12)


def test_table_scorer_rejects_unnormalized_rows():
    st = SymbolTable(4)
    with pytest.raises(ValueError):
        TableScorer([{"": np.log([0.5, 0.25, 0.1])}], st)


def test_table_scorer_utterance_binding():
    """A table bound to one utterance refuses a different context but
    still starts with no context at all (standalone use)."""
    st = SymbolTable(4)
    sc = TableScorer([{"": np.log([0.5, 0.25, 0.25])}], st, utterance="utt-1")
    sc.start("utt-1")
    sc.start(None)
    with pytest.raises(ContextMismatchError):
        sc.start("utt-2")


def test_table_scorer_json_round_trip(tmp_path):
    row = np.log([0.5, 0.25, 0.25])
    sc = TableScorer([{"": row}], SymbolTable(4), utterance="u")
    p = tmp_path / "table.json"
    p.write_text(sc.to_json())
    again = TableScorer.from_file(p, SymbolTable(4))
    s = again.start("u")
    np.testing.assert_allclose(again.log_dist(s), row, atol=1e-12)
    payload = json.loads(p.read_text())
    assert payload["utterance"] == "u"


def test_bigram_add_k_by_hand():
    """Transition mass after fitting on AB, AB: count(A->B)=2 and the
    add-1 smoothing spreads one pseudo-count over the 39-way decodable
    set (EOS included, ordinary symbols of the unseen rows too)."""
    v = DEFAULT_VOCAB
    sc = BigramScorer(add_k=1.0, vocab=v).fit(["AB", "AB"])
    state = sc.start()
    state, _ = sc.step(state, v.encode_text("A")[0])
    dist = sc.log_dist(state)
    n = len(v.decodable_ids)
    b_col = v.decodable_index(v.encode_text("B")[0])
    want_b = math.log((2 + 1) / (2 + n))
    want_other = math.log(1 / (2 + n))
    np.testing.assert_allclose(dist[b_col], want_b, atol=1e-12)
    z_col = v.decodable_index(v.encode_text("Z")[0])
    np.testing.assert_allclose(dist[z_col], want_other, atol=1e-12)
    np.testing.assert_allclose(np.logaddexp.reduce(dist), 0.0, atol=1e-10)


def test_bigram_rows_are_context_dependent():
    v = DEFAULT_VOCAB
    sc = BigramScorer().fit(["THE CAT", "THE HAT"])
    s = sc.start()
    after_t, _ = sc.step(s, v.encode_text("T")[0])
    h_col = v.decodable_index(v.encode_text("H")[0])
    q_col = v.decodable_index(v.encode_text("Q")[0])
    dist = sc.log_dist(after_t)
    assert dist[h_col] > dist[q_col]


def test_check_scorer_accepts_the_stock_scorers():
    check_scorer(UniformScorer(DEFAULT_VOCAB))
    check_scorer(BigramScorer().fit(["HELLO WORLD"]))
    st = SymbolTable(5)
    check_scorer(
        TableScorer([{"": np.log([0.25, 0.25, 0.25, 0.25])}], st, utterance="u"), "u"
    )


def test_check_scorer_rejects_unnormalized_distributions():
    class Leaky(Scorer):
        def __init__(self):
            self.vocab = DEFAULT_VOCAB

        def log_dist(self, state):
            n = len(self.vocab.decodable_ids)
            return np.full(n, -math.log(n) - 0.5)

    with pytest.raises(ValueError):
        check_scorer(Leaky())


def test_check_scorer_rejects_wrong_width():
    class Narrow(Scorer):
        def __init__(self):
            self.vocab = DEFAULT_VOCAB

        def log_dist(self, state):
            return np.zeros(3)

    with pytest.raises(ValueError):
        check_scorer(Narrow())


# ----------------------------------------------------------------------
# Teacher forcing and the hybrid loss
# ----------------------------------------------------------------------

def test_teacher_forcing_matrix_shape_and_rows():
    v = DEFAULT_VOCAB
    sc = UniformScorer(v)
    target = make_teacher_target(v, "AB")
    mat = teacher_forcing_matrix(sc, target)
    assert mat.shape == (3, len(v.decodable_ids))
    np.testing.assert_allclose(mat, -math.log(len(v.decodable_ids)), atol=1e-12)


def test_cross_entropy_against_direct_summation():
    """Definition check: (1-eps) on the target hit plus eps spread
    uniformly, each term summed explicitly."""
    rng = np.random.default_rng(61)
    v = SymbolTable(5)
    n = len(v.decodable_ids)
    for _ in range(30):
        rows = int(rng.integers(1, 5))
        raw = rng.random((rows, n)) + 1e-3
        lp = np.log(raw / raw.sum(axis=1, keepdims=True))
        body = [int(rng.integers(0, v.size - 2)) for _ in range(rows - 1)]
        target = body + [v.eos_sos_id]
        eps = float(rng.choice([0.0, 0.01, 0.1]))
        got = cross_entropy_loss(lp, target, smoothing=eps, vocab=v)
        want = 0.0
        for r, tok in enumerate(target):
            hit = lp[r, v.decodable_index(tok)]
            want -= (1.0 - eps) * hit
            want -= eps * float(np.mean(lp[r]))
        np.testing.assert_allclose(got, want, atol=1e-9)


def test_cross_entropy_zero_smoothing_is_plain_nll():
    v = SymbolTable(4)
    n = len(v.decodable_ids)
    lp = np.log(np.full((2, n), 1.0 / n))
    target = [0, v.eos_sos_id]
    got = cross_entropy_loss(lp, target, smoothing=0.0, vocab=v)
    np.testing.assert_allclose(got, 2 * math.log(n), atol=1e-12)


def test_cross_entropy_requires_terminated_target():
    v = SymbolTable(4)
    lp = np.zeros((1, len(v.decodable_ids)))
    with pytest.raises(ValueError):
        cross_entropy_loss(lp, [0], vocab=v)


def test_cross_entropy_row_count_must_match():
    v = SymbolTable(4)
    lp = np.zeros((2, len(v.decodable_ids)))
    with pytest.raises(LengthMismatchError):
        cross_entropy_loss(lp, [v.eos_sos_id], vocab=v)


def test_hybrid_loss_is_convex_combination():
    cfg = HybridLossConfig(ctc_weight=0.2)
    np.testing.assert_allclose(hybrid_loss(10.0, 5.0, cfg), 0.2 * 10 + 0.8 * 5)
    lo = HybridLossConfig(ctc_weight=0.0)
    hi = HybridLossConfig(ctc_weight=1.0)
    assert hybrid_loss(10.0, 5.0, lo) == 5.0
    assert hybrid_loss(10.0, 5.0, hi) == 10.0


def test_hybrid_config_defaults_and_bounds():
    cfg = HybridLossConfig()
    assert cfg.ctc_weight == 0.2
    assert cfg.smoothing == 0.01
    with pytest.raises(ValueError):
        HybridLossConfig(ctc_weight=1.5)
    with pytest.raises(ValueError):
        HybridLossConfig(smoothing=-0.1)


def test_bigram_estimator_get_params_round_trip():
    sc = BigramScorer(add_k=2.0)
    params = sc.get_params()
    assert params["add_k"] == 2.0
    clone = BigramScorer(**{k: v for k, v in params.items()})
    assert clone.add_k == 2.0
