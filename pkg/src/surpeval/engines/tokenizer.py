"""Whitespace-piece tokenizer with byte fallback and exact byte-offset spans.

The vocabulary is a plain UTF-8 text file, one piece per line; the line
number is the piece id. Ids above the piece count are reserved: 256
byte-fallback ids (one per byte value) followed by a single BOS id.
Pieces are matched greedily (longest match first) against the UTF-8
bytes of the input; any byte not covered by a piece becomes a fallback
token, so tokenization is total over arbitrary byte strings.

Pieces may contain leading spaces. ``Vocabulary.from_words`` ships the
convention used throughout the package: every word is entered both bare
and with a single leading space, so that a word preceded by one space
tokenizes as a single piece whose span covers the space.
"""

from dataclasses import dataclass

N_BYTE_TOKENS = 256


class TokenizerError(ValueError):
    pass


@dataclass(frozen=True)
class Token:
    """One vocabulary id covering the half-open byte range [start, end)."""

    id: int
    start: int
    end: int

    @property
    def span(self) -> tuple[int, int]:
        return (self.start, self.end)


class Vocabulary:
    def __init__(self, pieces: list[str]):
        seen = set()
        for ln, piece in enumerate(pieces):
            if piece == "":
                raise TokenizerError(f"empty piece at line {ln}")
            if "\n" in piece:
                raise TokenizerError(f"piece at line {ln} contains a newline")
            if piece in seen:
                raise TokenizerError(f"duplicate piece at line {ln}: {piece!r}")
            seen.add(piece)
        self.pieces = list(pieces)
        # longest-first candidate lists keyed by first byte
        self._by_first: dict[int, list[tuple[bytes, int]]] = {}
        for pid, piece in enumerate(self.pieces):
            raw = piece.encode("utf-8")
            self._by_first.setdefault(raw[0], []).append((raw, pid))
        for cands in self._by_first.values():
            cands.sort(key=lambda c: len(c[0]), reverse=True)

    @property
    def n_pieces(self) -> int:
        return len(self.pieces)

    @property
    def vocab_size(self) -> int:
        return self.n_pieces + N_BYTE_TOKENS + 1

    @property
    def bos_id(self) -> int:
        return self.n_pieces + N_BYTE_TOKENS

    def byte_id(self, value: int) -> int:
        return self.n_pieces + value

    def piece_bytes(self, token_id: int) -> bytes:
        """Surface form of a non-BOS id."""
        if 0 <= token_id < self.n_pieces:
            return self.pieces[token_id].encode("utf-8")
        if self.n_pieces <= token_id < self.bos_id:
            return bytes([token_id - self.n_pieces])
        raise TokenizerError(f"id {token_id} has no surface form")

    @classmethod
    def from_words(cls, words: list[str]) -> "Vocabulary":
        """Build the reference vocabulary: each word bare and space-prefixed."""
        pieces: list[str] = []
        seen: set[str] = set()
        for word in words:
            for form in (word, " " + word):
                if form not in seen:
                    seen.add(form)
                    pieces.append(form)
        return cls(pieces)

    @classmethod
    def load(cls, path) -> "Vocabulary":
        with open(path, encoding="utf-8") as fh:
            lines = fh.read().split("\n")
        if lines and lines[-1] == "":
            lines = lines[:-1]
        return cls(lines)

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("\n".join(self.pieces) + "\n")

    def _longest_match(self, data: bytes, pos: int) -> tuple[int, int] | None:
        for raw, pid in self._by_first.get(data[pos], ()):
            if data.startswith(raw, pos):
                return pid, len(raw)
        return None


def tokenize(text: str | bytes, vocab: Vocabulary) -> list[Token]:
    """Greedy longest-match tokenization; spans tile the input exactly."""
    data = text.encode("utf-8") if isinstance(text, str) else bytes(text)
    out: list[Token] = []
    pos = 0
    while pos < len(data):
        match = vocab._longest_match(data, pos)
        if match is not None:
            pid, length = match
            out.append(Token(pid, pos, pos + length))
            pos += length
        else:
            out.append(Token(vocab.byte_id(data[pos]), pos, pos + 1))
            pos += 1
    return out


def detokenize(ids, vocab: Vocabulary) -> bytes:
    """Inverse of tokenize at the id level; BOS has no surface form."""
    return b"".join(vocab.piece_bytes(getattr(t, "id", t)) for t in ids)
