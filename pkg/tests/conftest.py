import pytest

from pmifaith.data import make_synthetic_corpus
from pmifaith.lm import train_ngram
from pmifaith.tokenizer import build_vocab

ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def synthetic():
    return make_synthetic_corpus(42, n_docs=50, sentences_per_doc=5)


@pytest.fixture(scope="session")
def synthetic_lm(synthetic):
    vocab = build_vocab(synthetic.train_lines)
    return train_ngram(synthetic.train_lines, vocab, order=3, add_k=0.01,
                       lambdas=[0.2, 0.3, 0.5], cache_weight=0.1, copy_weight=0.2)


@pytest.fixture(scope="session")
def toy_bigram():
    corpus = ["the cat sat .", "the cat ran ."]
    vocab = build_vocab(corpus)
    return train_ngram(corpus, vocab, order=2, add_k=1.0, lambdas=[0.0, 1.0])


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
