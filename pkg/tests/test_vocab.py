"""Symbol inventory, text round trips, and teacher-target framing."""
import json

import numpy as np
import pytest

from avsrkit.errors import BlankInTextError, UnknownCharacterError
from avsrkit.vocab import (
    DEFAULT_VOCAB,
    SymbolTable,
    Vocabulary,
    make_teacher_target,
)


def test_default_inventory_layout():
    """40 symbols: 26 letters, 10 digits, apostrophe, space, blank, EOS/SOS."""
    v = DEFAULT_VOCAB
    assert v.size == 40
    assert v.blank_id == 38
    assert v.eos_sos_id == 39
    assert v.encode_text("A") == [0]
    assert v.encode_text("Z") == [25]
    assert v.encode_text("0") == [26]
    assert v.encode_text("9") == [35]
    assert v.encode_text("'") == [36]
    assert v.space_id == 37


def test_blank_and_eos_are_not_decodable_text():
    v = DEFAULT_VOCAB
    assert v.blank_id not in v.decodable_ids
    assert v.eos_sos_id in v.decodable_ids
    with pytest.raises(BlankInTextError):
        v.decode_tokens([0, v.blank_id])


def test_encode_decode_round_trip():
    v = DEFAULT_VOCAB
    rng = np.random.default_rng(20)
    chars = [c for c in "ABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789' "]
    for _ in range(50):
        n = int(rng.integers(0, 12))
        text = "".join(rng.choice(chars) for _ in range(n))
        assert v.decode_tokens(v.encode_text(text)) == text


def test_unknown_character_reports_position():
    with pytest.raises(UnknownCharacterError) as exc:
        DEFAULT_VOCAB.encode_text("AB?C")
    assert "2" in str(exc.value)


def test_lowercase_folds_to_uppercase():
    """Encoding is case-insensitive; the inventory itself stays uppercase."""
    v = DEFAULT_VOCAB
    assert v.encode_text("hello") == v.encode_text("HELLO")
    assert v.decode_tokens(v.encode_text("hello")) == "HELLO"


def test_decodable_index_inverts_decodable_ids():
    v = DEFAULT_VOCAB
    for col, tok in enumerate(v.decodable_ids):
        assert v.decodable_index(tok) == col
    with pytest.raises(ValueError):
        v.decodable_index(v.blank_id)


def test_vocab_json_round_trip():
    v = DEFAULT_VOCAB
    again = Vocabulary.from_json(v.to_json())
    assert again.size == v.size
    assert again.encode_text("IT'S 9") == v.encode_text("IT'S 9")
    payload = json.loads(v.to_json())
    assert isinstance(payload, list) and len(payload) == 40


def test_vocab_from_file(tmp_path):
    p = tmp_path / "vocab.json"
    p.write_text(DEFAULT_VOCAB.to_json())
    v = Vocabulary.from_file(p)
    assert v.blank_id == DEFAULT_VOCAB.blank_id


def test_symbol_table_anonymous_inventory():
    """A bare symbol table pins blank and EOS/SOS to the last two slots."""
    st = SymbolTable(5)
    assert st.size == 5
    assert st.blank_id == 3
    assert st.eos_sos_id == 4
    assert st.decodable_ids == (0, 1, 2, 4)
    assert st.decodable_index(4) == 3
    with pytest.raises(ValueError):
        SymbolTable(2)


def test_symbol_table_decode_tokens_is_stable_key():
    st = SymbolTable(6)
    assert st.decode_tokens([0, 2, 1]) == "0.2.1"
    assert st.decode_tokens([]) == ""
    with pytest.raises(BlankInTextError):
        st.decode_tokens([st.blank_id])
    with pytest.raises(ValueError):
        st.decode_tokens([99])


def test_teacher_target_appends_terminator():
    v = DEFAULT_VOCAB
    assert make_teacher_target(v, "AB") == [0, 1, v.eos_sos_id]
    assert make_teacher_target(v, [4, 7]) == [4, 7, v.eos_sos_id]
    assert make_teacher_target(v, "") == [v.eos_sos_id]


def test_teacher_target_rejects_blank_and_eos_in_body():
    v = DEFAULT_VOCAB
    with pytest.raises(ValueError):
        make_teacher_target(v, [0, v.blank_id])
    with pytest.raises(ValueError):
        make_teacher_target(v, [v.eos_sos_id, 0])
