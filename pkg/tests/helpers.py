"""Small deterministic backends used across the test suite."""
import zlib

import numpy as np

from pmifaith.lm import floor_and_normalize
from pmifaith.tokenizer import EOS, Vocabulary, detokenize, split_text, tokenize


class TableLM:
    """Backend whose next-token probabilities come from ``fn(context_ids)``."""

    eos_id = EOS

    def __init__(self, vocab: Vocabulary, fn):
        self.vocab = vocab
        self.vocab_size = len(vocab)
        self.fn = fn

    def tokenize(self, text):
        return tokenize(self.vocab, text)

    def detokenize(self, ids):
        return detokenize(self.vocab, ids)

    def next_logprobs(self, context):
        probs = np.asarray(self.fn(tuple(context)), dtype=np.float64)
        with np.errstate(divide="ignore"):
            return floor_and_normalize(np.log(probs))


class RandomLM:
    """Pseudo-random distributions seeded by the full context.

    Every distinct context gets its own fixed distribution, so the
    document changes every conditional.
    """

    eos_id = EOS

    def __init__(self, vocab_size=5, seed=0, scale=2.0):
        self.vocab_size = vocab_size
        self.seed = seed
        self.scale = scale

    def tokenize(self, text):
        return [zlib.crc32(w.encode()) % self.vocab_size for w in split_text(text)]

    def detokenize(self, ids):
        return " ".join(str(int(i)) for i in ids)

    def next_logprobs(self, context):
        rng = np.random.default_rng([self.seed, len(context), *[int(i) for i in context]])
        logits = self.scale * rng.standard_normal(self.vocab_size)
        return floor_and_normalize(logits - np.logaddexp.reduce(logits))


def word_vocab(*words):
    return Vocabulary(("<pad>", "<bos>", "<eos>", "<unk>") + tuple(words))
