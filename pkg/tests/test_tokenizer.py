import numpy as np
import pytest

from surpeval.engines import (Token, TokenizerError, Vocabulary, detokenize,
                              tokenize)


@pytest.fixture
def vocab():
    return Vocabulary.from_words(["the", "cat", "sat", "mat"])


def test_empty_input(vocab):
    assert tokenize("", vocab) == []


def test_two_word_sentence_spans(vocab):
    tokens = tokenize("the cat", vocab)
    assert len(tokens) == 2
    assert tokens[0].span == (0, 3)
    # leading-space convention: the space folds into the second token
    assert tokens[1].span == (3, 7)
    assert detokenize(tokens, vocab) == b"the cat"


def test_spans_tile_and_ids_in_range(vocab):
    text = "the cat sat on the mat\t twice"
    tokens = tokenize(text, vocab)
    data = text.encode("utf-8")
    pos = 0
    for tok in tokens:
        assert tok.start == pos
        pos = tok.end
        assert 0 <= tok.id < vocab.vocab_size
    assert pos == len(data)


def test_round_trip_random_byte_strings(vocab):
    rng = np.random.default_rng(0)
    for _ in range(1000):
        n = int(rng.integers(0, 60))
        raw = bytes(rng.integers(0, 256, size=n).tolist())
        tokens = tokenize(raw, vocab)
        assert detokenize(tokens, vocab) == raw
        if tokens:
            assert tokens[0].start == 0
            assert tokens[-1].end == len(raw)
            for a, b in zip(tokens, tokens[1:]):
                assert a.end == b.start


def test_determinism(vocab):
    text = "the cat sat"
    assert tokenize(text, vocab) == tokenize(text, vocab)


def test_unknown_word_falls_back_to_bytes(vocab):
    tokens = tokenize("zebra", vocab)
    assert len(tokens) == 5
    assert all(t.id >= vocab.n_pieces for t in tokens)
    assert detokenize(tokens, vocab) == b"zebra"


def test_greedy_prefers_longest_piece():
    vocab = Vocabulary(["a", "ab", "abc"])
    tokens = tokenize("abc", vocab)
    assert [t.id for t in tokens] == [2]


def test_id_reservations(vocab):
    assert vocab.vocab_size == vocab.n_pieces + 257
    assert vocab.bos_id == vocab.vocab_size - 1
    assert vocab.byte_id(0) == vocab.n_pieces


def test_vocab_file_round_trip(tmp_path, vocab):
    path = tmp_path / "vocab.txt"
    vocab.save(path)
    loaded = Vocabulary.load(path)
    assert loaded.pieces == vocab.pieces


def test_bad_vocab_lines():
    with pytest.raises(TokenizerError):
        Vocabulary(["ok", ""])
    with pytest.raises(TokenizerError):
        Vocabulary(["dup", "dup"])


def test_bos_has_no_surface_form(vocab):
    with pytest.raises(TokenizerError):
        detokenize([vocab.bos_id], vocab)


def test_token_is_frozen(vocab):
    tok = Token(1, 0, 3)
    with pytest.raises(AttributeError):
        tok.id = 2
