"""Deterministic word-level tokenizer and vocabulary.

Text is NFC-normalized, lowercased, split on whitespace, and runs of
punctuation are split off into their own tokens.
"""
from __future__ import annotations

import os
import tempfile
import unicodedata
from collections import Counter
from dataclasses import dataclass, field
from itertools import groupby
from typing import Iterable, Sequence

PAD, BOS, EOS, UNK = 0, 1, 2, 3
RESERVED = ("<pad>", "<bos>", "<eos>", "<unk>")


def is_punct(ch: str) -> bool:
    return unicodedata.category(ch).startswith("P")


def normalize(text: str) -> str:
    return unicodedata.normalize("NFC", unicodedata.normalize("NFC", text).lower())


def split_text(text: str) -> list[str]:
    """Split ``text`` into normalized token strings (no vocabulary lookup)."""
    pieces = []
    for word in normalize(text).split():
        if word == RESERVED[UNK]:
            pieces.append(word)
            continue
        for _, run in groupby(word, key=is_punct):
            pieces.append("".join(run))
    return pieces


@dataclass(frozen=True)
class Vocabulary:
    tokens: tuple[str, ...]
    index: dict[str, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        tokens = tuple(self.tokens)
        if tokens[:4] != RESERVED:
            raise ValueError("first four tokens must be the reserved tokens")
        index = {tok: i for i, tok in enumerate(tokens)}
        if len(index) != len(tokens):
            raise ValueError("duplicate token strings in vocabulary")
        object.__setattr__(self, "tokens", tokens)
        object.__setattr__(self, "index", index)

    def __len__(self) -> int:
        return len(self.tokens)

    def __contains__(self, token: str) -> bool:
        return token in self.index

    def id(self, token: str) -> int:
        return self.index.get(token, UNK)

    def save(self, path) -> None:
        atomic_write_text(path, "".join(tok + "\n" for tok in self.tokens))

    @classmethod
    def load(cls, path) -> "Vocabulary":
        with open(path, encoding="utf-8") as f:
            lines = f.read().split("\n")
        if lines and lines[-1] == "":
            lines.pop()
        return cls(tuple(lines))


def build_vocab(corpus: Iterable[str], min_count: int = 1) -> Vocabulary:
    """Collect tokens seen at least ``min_count`` times.

    Tokens are ordered by descending count, ties broken lexicographically,
    after the four reserved tokens.
    """
    if min_count < 1:
        raise ValueError("min_count must be >= 1")
    lines = list(corpus)
    if not lines:
        raise ValueError("empty corpus")
    counts = Counter()
    for line in lines:
        counts.update(split_text(line))
    for tok in RESERVED:
        counts.pop(tok, None)
    kept = sorted((tok for tok, c in counts.items() if c >= min_count),
                  key=lambda tok: (-counts[tok], tok))
    return Vocabulary(RESERVED + tuple(kept))


def tokenize(vocab: Vocabulary, text: str) -> list[int]:
    return [vocab.id(tok) for tok in split_text(text)]


def detokenize(vocab: Vocabulary, ids: Sequence[int]) -> str:
    """Join token strings with single spaces.

    PAD, BOS and EOS are dropped. UNK is rendered as ``<unk>`` so that
    re-tokenizing gives back the same ids.
    """
    out = []
    for i in ids:
        i = int(i)
        if i < 0 or i >= len(vocab):
            raise ValueError(f"unknown token id {i}")
        if i in (PAD, BOS, EOS):
            continue
        out.append(vocab.tokens[i])
    return " ".join(out)


def atomic_write_text(path, text: str) -> None:
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
