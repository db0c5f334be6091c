"""Character vocabulary and text <-> token codecs.

The toolkit operates on a 40-symbol character inventory: the 26 letters,
the 10 digits, the apostrophe, and special tokens for [space], [blank]
and [EOS/SOS].  One token id serves as both start- and end-of-sequence
marker.  Index order is fixed so that serialized grids and tables stay
portable: A-Z (0-25), 0-9 (26-35), apostrophe (36), [space] (37),
[blank] (38), [EOS/SOS] (39).
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .errors import BlankInTextError, UnknownCharacterError

SPACE_LABEL = "[space]"
BLANK_LABEL = "[blank]"
EOS_SOS_LABEL = "[EOS/SOS]"

_LETTERS = [chr(c) for c in range(ord("A"), ord("Z") + 1)]
_DIGITS = [chr(c) for c in range(ord("0"), ord("9") + 1)]
DEFAULT_SYMBOLS = _LETTERS + _DIGITS + ["'", SPACE_LABEL, BLANK_LABEL, EOS_SOS_LABEL]


@dataclass(frozen=True)
class Vocabulary:
    """Immutable 40-symbol table; safe to share across threads."""

    symbols: tuple[str, ...] = tuple(DEFAULT_SYMBOLS)
    _char_to_id: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if len(self.symbols) != 40:
            raise ValueError(f"expected 40 symbols, got {len(self.symbols)}")
        if len(set(self.symbols)) != len(self.symbols):
            raise ValueError("vocabulary symbols must be distinct")
        for label in (SPACE_LABEL, BLANK_LABEL, EOS_SOS_LABEL):
            if label not in self.symbols:
                raise ValueError(f"vocabulary is missing the {label} token")
        mapping = {}
        for i, sym in enumerate(self.symbols):
            mapping[" " if sym == SPACE_LABEL else sym] = i
        object.__setattr__(self, "_char_to_id", mapping)

    @property
    def size(self) -> int:
        return len(self.symbols)

    @property
    def blank_id(self) -> int:
        return self.symbols.index(BLANK_LABEL)

    @property
    def eos_sos_id(self) -> int:
        return self.symbols.index(EOS_SOS_LABEL)

    @property
    def space_id(self) -> int:
        return self.symbols.index(SPACE_LABEL)

    @property
    def decodable_ids(self) -> tuple[int, ...]:
        """Ids of the decodable set (everything except [blank]); size 39."""
        blank = self.blank_id
        return tuple(i for i in range(len(self.symbols)) if i != blank)

    def decodable_index(self, token_id: int) -> int:
        """Column of ``token_id`` in a matrix laid out over the decodable set."""
        blank = self.blank_id
        if token_id == blank:
            raise BlankInTextError("blank has no decodable-set column")
        return token_id if token_id < blank else token_id - 1

    def encode_text(self, text: str) -> list[int]:
        """Map text to token ids, case-folding to uppercase first.

        Raises UnknownCharacterError for anything outside letters, digits,
        apostrophe and space.
        """
        text = text.upper()
        ids = []
        for pos, ch in enumerate(text):
            try:
                ids.append(self._char_to_id[ch])
            except KeyError:
                raise UnknownCharacterError(ch, pos) from None
        return ids

    def decode_tokens(self, tokens: Sequence[int]) -> str:
        """Inverse of encode_text; [EOS/SOS] renders as the empty string."""
        blank = self.blank_id
        eos = self.eos_sos_id
        space = self.space_id
        chars = []
        for tok in tokens:
            tok = int(tok)
            if tok == blank:
                raise BlankInTextError(f"token id {tok} is [blank]")
            if tok == eos:
                continue
            chars.append(" " if tok == space else self.symbols[tok])
        return "".join(chars)

    def to_json(self) -> str:
        """Canonical serialization: a JSON array of 40 strings."""
        return json.dumps(list(self.symbols))

    @classmethod
    def from_json(cls, text: str) -> "Vocabulary":
        symbols = json.loads(text)
        if not isinstance(symbols, list) or not all(isinstance(s, str) for s in symbols):
            raise ValueError("vocabulary JSON must be an array of strings")
        return cls(tuple(symbols))

    @classmethod
    def from_file(cls, path: str | Path) -> "Vocabulary":
        return cls.from_json(Path(path).read_text(encoding="utf-8"))


@dataclass(frozen=True)
class SymbolTable:
    """Reduced symbol inventory sharing the standard layout.

    Plain ids 0..size-3 are ordinary symbols, size-2 is [blank] and
    size-1 is [EOS/SOS], mirroring the full vocabulary.  Grids, lattice
    recursions and the decoder accept these interchangeably with
    Vocabulary, which makes exhaustive desk-scale verification feasible
    (enumerations over 40 symbols are not).
    """

    size: int

    def __post_init__(self):
        if self.size < 3:
            raise ValueError(
                f"need at least one symbol plus [blank] and [EOS/SOS], got size {self.size}"
            )

    @property
    def blank_id(self) -> int:
        return self.size - 2

    @property
    def eos_sos_id(self) -> int:
        return self.size - 1

    @property
    def decodable_ids(self) -> tuple[int, ...]:
        blank = self.blank_id
        return tuple(i for i in range(self.size) if i != blank)

    def decodable_index(self, token_id: int) -> int:
        if token_id == self.blank_id:
            raise BlankInTextError("blank has no decodable-set column")
        return token_id if token_id < self.blank_id else token_id - 1

    def decode_tokens(self, tokens: Sequence[int]) -> str:
        """Stable textual key for a token sequence (dot-joined ids).

        Symbols here have no character rendering, but prefix-keyed
        scorers still need an injective string form.
        """
        parts = []
        for t in tokens:
            t = int(t)
            if not 0 <= t < self.size:
                raise ValueError(f"token id {t} outside 0..{self.size - 1}")
            if t == self.blank_id:
                raise BlankInTextError("blank cannot appear in decoded output")
            parts.append(str(t))
        return ".".join(parts)


DEFAULT_VOCAB = Vocabulary()


def make_teacher_target(vocab: Vocabulary, text_or_ids: str | Iterable[int]) -> list[int]:
    """Token ids for teacher forcing: the transcript followed by [EOS/SOS].

    The transcript body may not contain [blank] or [EOS/SOS]; the
    terminator is appended here, exactly once.
    """
    if isinstance(text_or_ids, str):
        ids = vocab.encode_text(text_or_ids)
    else:
        ids = [int(i) for i in text_or_ids]
        for tok in ids:
            if not 0 <= tok < vocab.size:
                raise ValueError(f"token id {tok} outside 0..{vocab.size - 1}")
            if tok == vocab.blank_id:
                raise BlankInTextError("[blank] cannot appear in a transcript")
            if tok == vocab.eos_sos_id:
                raise ValueError("[EOS/SOS] belongs at the end only; it is appended")
    return ids + [vocab.eos_sos_id]
