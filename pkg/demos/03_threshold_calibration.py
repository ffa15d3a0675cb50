# coding: utf-8

# # From scores to labels
#
# Pick the threshold that maximizes F1 on dev, then apply it to test. The same
# pipeline runs for the lexical unigram-F1 baseline.

# In[1]:

from pmifaith import make_synthetic_corpus, build_vocab, train_ngram, pmi_faith, unigram_f1
from pmifaith.calibration import (LabeledScore, binarize_label, calibrate_threshold,
                                  classification_report, format_report)


# In[2]:

corpus = make_synthetic_corpus(seed=42)
vocab = build_vocab(corpus.train_lines)
lm = train_ngram(corpus.train_lines, vocab, order=3, add_k=0.01, lambdas=[0.2, 0.3, 0.5],
                 cache_weight=0.1, copy_weight=0.2)


def labeled(split, score):
    return [LabeledScore(e.id, score(e), binarize_label(e.label), e.dataset_tag) for e in split]


# In[3]:

metrics = {"PMI-Faith": lambda e: pmi_faith(lm, e).raw,
           "unigram-F1": lambda e: unigram_f1(e.response, e.document)}
for name, score in metrics.items():
    threshold = calibrate_threshold(labeled(corpus.dev, score))
    print(name)
    print(format_report(classification_report(labeled(corpus.test, score), threshold)))
    print()


# Negatives here are sentences from other documents. They share the filler words,
# so word overlap with the document only goes so far.
