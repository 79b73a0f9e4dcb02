"""
How a comment is judged to be "in" a response
==============================================
"""

# %%
from chatweave.model import ExtractionConfig
from chatweave.similarity import bow_vector, lexical_containment, match_fn

bow_vector("想听晴天")  # character bigrams with counts

# %%
# containment is one-sided: the share of the comment's bigrams found in the response
print(lexical_containment("想听晴天", "好的想听晴天是吧"))  # 1.0
print(lexical_containment("想听晴天", "晴天"))              # 1/3
print(lexical_containment("好的想听晴天是吧", "想听晴天"))  # lower: the response side is short

# %%
# a comment shorter than one bigram counts if it appears verbatim
print(lexical_containment("好", "好的我知道了"))

# %%
# a paraphrase fails the lexical test; a semantic scorer can rescue it
class ToyScorer:
    def score(self, comment, response):
        return 0.9 if "歌" in comment and "唱" in response else 0.0

cfg = ExtractionConfig()
comment, reply = "来首歌吧", "那我给你们唱一首。"
print(match_fn(comment, reply, cfg), match_fn(comment, reply, cfg, semantic=ToyScorer()))

# %%
# a real deployment points EmbeddingScorer at an embedding service, e.g.
# EmbeddingScorer(EmbeddingClient("http://localhost:8080"))
