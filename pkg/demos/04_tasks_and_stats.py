"""
From matched pairs to training tasks
====================================

Uses one synthetic channel so the example runs anywhere.
"""

# %%
from chatweave.matcher import extract_dialogues
from chatweave.synthbench import GenSpec, generate_stream
from chatweave.taskgen import build_addressee_sessions, build_response_task, dataset_stats, split_by_persona

stream, truth = generate_stream(GenSpec(seed=3, fragment_dist=(1, 1, 1, 1), noise_fraction=0.2))
pairs = extract_dialogues(stream)
print(len(pairs), "pairs;", len(truth.links), "true links")

# %%
# response modeling: (comment, response) with a persona reference
responses = build_response_task(pairs, {"streamer": {}})
responses[0].to_dict()

# %%
# addressee recognition: 10 candidate comments, gold last unless shuffled
session = build_addressee_sessions(stream, pairs)[0]
for user, text in session.candidates:
    print(user, text)
print("gold:", session.gold_index, "response:", session.response_text)

# %%
# every test streamer also appears in train
train, test = split_by_persona(responses * 20, 0.1, seed=0)
print(len(train), len(test))

# %%
dataset_stats(pairs, [stream]).to_dict()
