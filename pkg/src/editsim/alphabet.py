"""Alphabets and symbol-encoded strings.

Every string is encoded against an Alphabet that maps text tokens to the
integer codes 1..n; code 0 is reserved for the gap symbol "$" used by
insertion and deletion operations. All distance, transducer and kernel
routines work on the encoded form.
"""

from __future__ import annotations

from typing import Iterable, Sequence

import numpy as np

GAP = "$"


class AlphabetError(ValueError):
    pass


class AlphabetMismatchError(AlphabetError):
    """Raised when two operands are encoded against different alphabets."""


class Alphabet:
    """An ordered set of distinct text tokens, with "$" reserved at index 0.

    Symbol order is significant: it fixes the row/column layout of cost and
    probability matrices, so it is persisted with every model file.
    """

    __slots__ = ("symbols", "_index")

    def __init__(self, symbols: Sequence[str]):
        symbols = tuple(symbols)
        if len(set(symbols)) != len(symbols):
            raise AlphabetError("alphabet symbols must be distinct")
        if GAP in symbols:
            raise AlphabetError("the gap symbol %r is reserved" % GAP)
        for s in symbols:
            if not s:
                raise AlphabetError("empty token is not a valid symbol")
        self.symbols = symbols
        self._index = {s: i + 1 for i, s in enumerate(symbols)}

    @classmethod
    def from_tokens(cls, token_seqs: Iterable[Sequence[str]]) -> "Alphabet":
        """Build an alphabet from data, in first-appearance order."""
        seen: dict[str, None] = {}
        for seq in token_seqs:
            for tok in seq:
                if tok != GAP:
                    seen.setdefault(tok)
        return cls(tuple(seen))

    @property
    def size(self) -> int:
        return len(self.symbols)

    @property
    def all_symbols(self) -> tuple[str, ...]:
        """Symbols including the gap, in matrix row/column order."""
        return (GAP,) + self.symbols

    def index(self, symbol: str) -> int:
        try:
            return self._index[symbol]
        except KeyError:
            raise AlphabetError("symbol %r is not in the alphabet" % symbol) from None

    def symbol(self, code: int) -> str:
        if code == 0:
            return GAP
        return self.symbols[code - 1]

    def encode(self, tokens: Sequence[str] | str) -> "Str":
        """Encode a token sequence. A plain string is split on whitespace."""
        if isinstance(tokens, str):
            tokens = tokens.split()
        codes = np.array([self.index(t) for t in tokens], dtype=np.int32)
        return Str(codes, self)

    def encode_chars(self, text: str) -> "Str":
        """Encode a string of single-character tokens without separators."""
        return self.encode(list(text))

    def __eq__(self, other) -> bool:
        return isinstance(other, Alphabet) and self.symbols == other.symbols

    def __hash__(self) -> int:
        return hash(self.symbols)

    def __repr__(self) -> str:
        return "Alphabet(%r)" % (self.symbols,)


class Str:
    """A string over an Alphabet, stored as int32 codes in 1..n."""

    __slots__ = ("codes", "alphabet")

    def __init__(self, codes: np.ndarray, alphabet: Alphabet):
        codes = np.asarray(codes, dtype=np.int32)
        if codes.ndim != 1:
            raise AlphabetError("string codes must be one-dimensional")
        if codes.size and (codes.min() < 1 or codes.max() > alphabet.size):
            raise AlphabetError("string contains codes outside the alphabet")
        self.codes = codes
        self.alphabet = alphabet

    def __len__(self) -> int:
        return int(self.codes.size)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Str)
            and self.alphabet == other.alphabet
            and self.codes.shape == other.codes.shape
            and bool((self.codes == other.codes).all())
        )

    def __hash__(self) -> int:
        return hash((self.alphabet.symbols, self.codes.tobytes()))

    @property
    def tokens(self) -> tuple[str, ...]:
        return tuple(self.alphabet.symbol(int(c)) for c in self.codes)

    def text(self, sep: str = " ") -> str:
        return sep.join(self.tokens)

    def __repr__(self) -> str:
        return "Str(%r)" % (self.text(),)


def check_same_alphabet(*objs) -> Alphabet:
    """Return the shared alphabet of the operands or raise a mismatch error."""
    first = objs[0].alphabet
    for o in objs[1:]:
        if o.alphabet != first:
            raise AlphabetMismatchError(
                "operands are encoded against different alphabets"
            )
    return first
