import pytest
from hypothesis import given, strategies as st

from pmifaith.tokenizer import (BOS, EOS, PAD, RESERVED, UNK, Vocabulary, build_vocab,
                                detokenize, split_text, tokenize)


def test_build_vocab_orders_by_count_then_lex():
    assert build_vocab(["a a b"]).tokens == RESERVED + ("a", "b")
    assert build_vocab(["a a b"], min_count=2).tokens == RESERVED + ("a",)
    tokens = build_vocab(["x y", "y z"]).tokens
    assert tokens.index("y") < tokens.index("x") < tokens.index("z")


def test_build_vocab_errors():
    with pytest.raises(ValueError, match="empty corpus"):
        build_vocab([])
    with pytest.raises(ValueError):
        build_vocab(["a"], min_count=0)


def test_tokenize_lowercases_and_splits_punctuation():
    vocab = Vocabulary(RESERVED + ("a", "cat", "."))
    assert tokenize(vocab, "A cat.") == [4, 5, 6]
    assert tokenize(vocab, "") == []
    assert tokenize(vocab, "zzz") == [UNK]


def test_punctuation_runs_are_single_tokens():
    assert split_text("Wait... what?!") == ["wait", "...", "what", "?!"]
    assert split_text("don't") == ["don", "'", "t"]


def test_detokenize():
    vocab = Vocabulary(RESERVED + ("a", "cat"))
    assert detokenize(vocab, [4, 5]) == "a cat"
    assert detokenize(vocab, [BOS, 4, EOS]) == "a"
    assert detokenize(vocab, []) == ""
    with pytest.raises(ValueError, match="unknown token id"):
        detokenize(vocab, [6])


def test_vocabulary_invariants():
    with pytest.raises(ValueError):
        Vocabulary(("a", "b", "c", "d"))
    with pytest.raises(ValueError):
        Vocabulary(RESERVED + ("x", "x"))
    v = Vocabulary(RESERVED + ("x",))
    assert all(v.index[t] == i for i, t in enumerate(v.tokens))


def test_vocab_file_round_trip(tmp_path):
    vocab = build_vocab(["Hello, world! hello again"])
    path = tmp_path / "v.txt"
    vocab.save(path)
    lines = path.read_text(encoding="utf-8").split("\n")
    assert lines[:4] == list(RESERVED)
    assert Vocabulary.load(path) == vocab


CORPUS = ["The quick brown fox.", "Jumps over, the lazy dog!", "Café déjà vu..."]
VOCAB = build_vocab(CORPUS)


@given(st.text(max_size=60))
def test_round_trip(text):
    ids = tokenize(VOCAB, text)
    assert tokenize(VOCAB, detokenize(VOCAB, ids)) == ids
    assert all(0 <= i < len(VOCAB) and i not in (PAD, BOS, EOS) for i in ids)


@given(st.lists(st.text(alphabet="abc .,", max_size=20), min_size=1, max_size=5))
def test_build_vocab_is_deterministic(lines):
    assert build_vocab(lines).tokens == build_vocab(list(lines)).tokens
