# coding: utf-8

# # Decoding toward the document
#
# Greedy likelihood decoding happily ignores the document. Mixing token-level
# CPMI into the step score, restricted to a top-p mask of the document-conditioned
# distribution, pulls generations back toward it.

# In[1]:

from pmifaith import make_synthetic_corpus, build_vocab, train_ngram, pmi_faith, decode
from pmifaith.decoding import GREEDY, PMI_D, PMI_D_NM, PMI_D_EQ, DecodeConfig, top_p_mask


# In[2]:

corpus = make_synthetic_corpus(seed=42)
vocab = build_vocab(corpus.train_lines)
lm = train_ngram(corpus.train_lines, vocab, order=3, add_k=0.01, lambdas=[0.2, 0.3, 0.5],
                 cache_weight=0.1, copy_weight=0.2)
ex = corpus.test[0]


# The top-p mask keeps the fewest high-probability tokens whose mass reaches p.

# In[3]:

prompt = lm.tokenize("document: " + ex.document + "\nuser: " + ex.history[0].text + "\nagent:")
mask = top_p_mask(lm.next_logprobs(prompt), 0.6)
print(len(mask), "of", lm.vocab_size, "tokens survive p=0.6:", [vocab.tokens[i] for i in sorted(mask)])


# In[4]:

for name, preset in (("greedy", GREEDY), ("PMI-D", PMI_D), ("PMI-D (no mask)", PMI_D_NM),
                     ("PMI-D (alpha 0.5)", PMI_D_EQ)):
    cfg = DecodeConfig(**{**preset.to_dict(), "max_len": 24})
    text = lm.detokenize(decode(lm, ex, cfg).tokens)
    score = pmi_faith(lm, ex, response=text).normalized if text else 0.0
    print(f"{name:18s} {score:.3f}  {text!r}")


# With alpha = 0 and no mask the objective is plain likelihood, so the outputs agree.

# In[5]:

a = decode(lm, ex, DecodeConfig(objective="pmi", alpha=0.0, top_p=1.0, max_len=24)).tokens
b = decode(lm, ex, DecodeConfig(max_len=24)).tokens
print(a == b)
