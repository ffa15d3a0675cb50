# coding: utf-8

# # Scoring through the HTTP protocol
#
# Any model that serves next-token log-probabilities over the small JSON protocol
# can be scored. The stub server wraps an n-gram model so the client can be tried
# without a real inference server.

# In[1]:

import numpy as np

from pmifaith import make_synthetic_corpus, build_vocab, train_ngram, pmi_faith
from pmifaith.lm import RemoteLMClient, StubServer


# In[2]:

corpus = make_synthetic_corpus(seed=42)
vocab = build_vocab(corpus.train_lines)
lm = train_ngram(corpus.train_lines, vocab, order=3, add_k=0.01, lambdas=[0.2, 0.3, 0.5],
                 cache_weight=0.1, copy_weight=0.2)


# In[3]:

with StubServer(lm) as server:
    client = RemoteLMClient(server.url, timeout=5)
    print("vocab size from handshake:", client.handshake(), "model:", client.model_name)
    ex = corpus.test[0]
    local, remote = pmi_faith(lm, ex), pmi_faith(client, ex)
    print("local  raw %.6f" % local.raw)
    print("remote raw %.6f" % remote.raw)
    ctx = lm.tokenize("tell me about")
    print("max difference", np.abs(client.next_logprobs(ctx) - lm.next_logprobs(ctx)).max())
