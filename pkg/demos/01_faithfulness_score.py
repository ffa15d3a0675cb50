# coding: utf-8

# # Scoring grounded responses
#
# A response is faithful when the document makes it more likely. We train a small
# trigram model on synthetic pseudo-documents and compare the log-probability of a
# response with and without the document in the prompt.

# In[1]:

import numpy as np

from pmifaith import make_synthetic_corpus, build_vocab, train_ngram, pmi_faith
from pmifaith.faith import PromptTemplate


# In[2]:

corpus = make_synthetic_corpus(seed=42, n_docs=50, sentences_per_doc=5)
vocab = build_vocab(corpus.train_lines)
lm = train_ngram(corpus.train_lines, vocab, order=3, add_k=0.01, lambdas=[0.2, 0.3, 0.5],
                 cache_weight=0.1, copy_weight=0.2)
print(len(corpus.train_lines), "training documents,", len(vocab), "types")


# The prompt the model sees. Dropping the document gives the second conditional.

# In[3]:

ex = corpus.test[0]
template = PromptTemplate()
print(template.render(ex, include_document=True)[:200], "...")
print("---")
print(template.render(ex, include_document=False))


# A faithful response and its unfaithful twin share the document and history.

# In[4]:

pos, neg = corpus.test[0], corpus.test[1]
for e in (pos, neg):
    s = pmi_faith(lm, e)
    print(f"{e.label:24s} raw={s.raw:8.3f} normalized={s.normalized:.3f}  {e.response[:50]!r}")


# Over the whole test split the two classes barely overlap.

# In[5]:

raw = {True: [], False: []}
for e in corpus.test:
    raw[e.label == "fully_attributable"].append(pmi_faith(lm, e).raw)
print("faithful   mean %.2f  min %.2f" % (np.mean(raw[True]), np.min(raw[True])))
print("unfaithful mean %.2f  max %.2f" % (np.mean(raw[False]), np.max(raw[False])))
