"""Word-level surprisal aggregation and corpus perplexity.

Surprisal is kept in nats internally; bits are a pure rescaling. A word
spanning several tokens scores the sum of its token surprisals, so word
spans must be tiled exactly by a contiguous token run.
"""

import math
from dataclasses import dataclass

import numpy as np

from .base import Engine, EngineError
from .tokenizer import Token, Vocabulary, tokenize

LN2 = math.log(2.0)


class AlignmentError(EngineError):
    pass


@dataclass(frozen=True)
class SurprisalRecord:
    """Word-level surprisal of one (dataset item, word, engine) triple."""

    dataset_id: str
    item_id: str
    word_index: int
    engine: str
    word: str
    surprisal: float                 # nats
    token_ids: tuple[int, ...]
    token_surprisals: tuple[float, ...]


def token_surprisals(engine: Engine, tokens) -> np.ndarray:
    """Per-token surprisal in nats; entry t is -log p(token_t | BOS, tokens_<t)."""
    ids = [int(getattr(t, "id", t)) for t in tokens]
    if not ids:
        raise EngineError("token_surprisals requires a non-empty sequence")
    rows = engine.prefix_rows(ids)[:-1]
    return -rows[np.arange(len(ids)), ids]


def nats_to_bits(x):
    return np.asarray(x, dtype=float) / LN2


def align_word(tokens: list[Token], span: tuple[int, int]) -> slice:
    """Indices of the contiguous token run tiling span, or AlignmentError."""
    start, end = span
    lo = hi = None
    for i, tok in enumerate(tokens):
        if tok.end <= start or tok.start >= end:
            continue
        if tok.start < start or tok.end > end:
            raise AlignmentError(
                f"word span [{start}, {end}) splits token id {tok.id} "
                f"at [{tok.start}, {tok.end})")
        if lo is None:
            lo = i
        hi = i
    if lo is None or tokens[lo].start != start or tokens[hi].end != end:
        raise AlignmentError(f"word span [{start}, {end}) is not tiled by tokens")
    return slice(lo, hi + 1)


def word_surprisal(surprisals: np.ndarray, span: tuple[int, int],
                   tokens: list[Token]) -> float:
    run = align_word(tokens, span)
    return float(np.sum(surprisals[run]))


def word_level_perplexity(engine: Engine, text: str, vocab: Vocabulary) -> float:
    """exp(total token surprisal in nats / whitespace word count)."""
    n_words = len(text.split())
    if n_words == 0:
        raise EngineError("perplexity is undefined for a zero-word text")
    tokens = tokenize(text, vocab)
    total = float(np.sum(token_surprisals(engine, tokens)))
    return math.exp(total / n_words)
