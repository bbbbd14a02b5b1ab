import math

import numpy as np
import pytest

from surpeval.engines import (AlignmentError, EngineConfig, EngineError,
                              Vocabulary, align_word, build_engine,
                              init_weights, nats_to_bits, token_surprisals,
                              tokenize, word_level_perplexity,
                              word_surprisal, zero_weights)
from surpeval.engines.tokenizer import Token


def uniform_engine(vocab_size=50):
    config = EngineConfig("rwkv", vocab_size, d_model=8, n_layers=1,
                          family_params={"d_ffn": 16})
    return build_engine(config, zero_weights(config))


class OneHotEngine:
    """Stub assigning probability 1 to every observed next token."""

    def __init__(self, vocab_size):
        self.vocab_size = vocab_size

    def prefix_rows(self, ids):
        rows = np.full((len(ids) + 1, self.vocab_size), -1e9)
        for t, tok in enumerate(ids):
            rows[t, int(getattr(tok, "id", tok))] = 0.0
        return rows


class FlatRows:
    """Stub whose every token costs a fixed surprisal."""

    def __init__(self, width, nats):
        self.width = width
        self.nats = nats

    def prefix_rows(self, ids):
        return np.full((len(ids) + 1, self.width), -self.nats)


def test_uniform_engine_every_entry_ln_v():
    engine = uniform_engine(50)
    surps = token_surprisals(engine, [1, 2, 3, 4])
    np.testing.assert_allclose(surps, math.log(50), rtol=0, atol=1e-12)


def test_gather_oracle():
    config = EngineConfig("transformer", 16, 16, 1)
    engine = build_engine(config, init_weights(config, seed=0))
    ids = [3, 1, 4, 1, 5]
    surps = token_surprisals(engine, ids)
    for t, tid in enumerate(ids):
        row = engine.next_token_logprobs(ids[:t])
        assert abs(surps[t] + row[tid]) < 1e-10


def test_sum_equals_sequence_nll():
    config = EngineConfig("mamba", 16, 16, 1, {"d_state": 4})
    engine = build_engine(config, init_weights(config, seed=1))
    ids = [2, 7, 7, 3]
    rows = engine.prefix_rows(ids)
    chain = -sum(rows[t, tid] for t, tid in enumerate(ids))
    assert abs(token_surprisals(engine, ids).sum() - chain) < 1e-12


def test_empty_sequence_rejected():
    with pytest.raises(EngineError):
        token_surprisals(uniform_engine(), [])


def test_word_surprisal_single_and_multi_token():
    tokens = [Token(1, 0, 3), Token(2, 3, 7), Token(3, 7, 12)]
    surps = np.array([1.5, 2.5, 0.25])
    assert word_surprisal(surps, (0, 3), tokens) == 1.5
    # two-token word sums its parts
    assert word_surprisal(surps, (0, 7), tokens) == 4.0
    assert word_surprisal(surps, (3, 12), tokens) == 2.75


def test_misaligned_span_names_token():
    tokens = [Token(1, 0, 3), Token(2, 3, 7)]
    surps = np.array([1.0, 1.0])
    with pytest.raises(AlignmentError, match="token id 2"):
        word_surprisal(surps, (0, 5), tokens)
    with pytest.raises(AlignmentError):
        align_word(tokens, (1, 7))


def test_uniform_k_token_word():
    # " zzz" has no piece, so it costs 4 byte-fallback tokens
    vocab = Vocabulary.from_words(["ab"])
    engine = uniform_engine(vocab.vocab_size)
    tokens = tokenize("ab zzz", vocab)
    surps = token_surprisals(engine, tokens)
    run = align_word(tokens, (2, 6))
    k = run.stop - run.start
    assert k == 4
    value = word_surprisal(surps, (2, 6), tokens)
    assert abs(value - k * math.log(vocab.vocab_size)) < 1e-9


def test_bits_are_nats_over_ln2():
    surps = np.array([1.0, 2.0, math.log(2)])
    np.testing.assert_allclose(nats_to_bits(surps), surps / math.log(2),
                               rtol=0, atol=0)


def test_perplexity_uniform_one_token_per_word():
    vocab = Vocabulary.from_words(["w"])
    engine = uniform_engine(vocab.vocab_size)
    text = " ".join(["w"] * 10)
    assert len(tokenize(text, vocab)) == 10
    value = word_level_perplexity(engine, text, vocab)
    assert abs(value - vocab.vocab_size) < 1e-9


def test_perplexity_formula_two_tokens_per_word():
    # 10 words of 20 tokens at ln(50) nats each -> 50^2
    vocab = Vocabulary.from_words(["x"])
    text = " ".join(["xx"] * 10)
    assert len(tokenize(text, vocab)) == 20
    engine = FlatRows(vocab.vocab_size, math.log(50))
    value = word_level_perplexity(engine, text, vocab)
    assert abs(value - 2500.0) / 2500.0 < 1e-12


def test_perplexity_oracle_engine_is_one():
    vocab = Vocabulary.from_words(["a", "b"])
    engine = OneHotEngine(vocab.vocab_size)
    assert abs(word_level_perplexity(engine, "a b a", vocab) - 1.0) < 1e-12


def test_perplexity_zero_words_error():
    vocab = Vocabulary.from_words(["a"])
    with pytest.raises(EngineError):
        word_level_perplexity(uniform_engine(vocab.vocab_size), "   ", vocab)
