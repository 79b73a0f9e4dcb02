"""
Pairing live comments with the streamer's spoken replies
=========================================================

A toy channel: four comments and the ASR segments that followed them.
"""

# %%
from chatweave import extract_dialogues, load_channel_stream

transcript = [
    '{"channel": "demo", "seq": 0, "t_start": 3000, "t_end": 4200, "text": "想听周杰伦的晴天是吧"}',
    '{"channel": "demo", "seq": 1, "t_start": 4300, "t_end": 6100, "text": "那我等下就给大家唱。"}',
    '{"channel": "demo", "seq": 2, "t_start": 9000, "t_end": 11000, "text": "今天天气真的好热啊。"}',
    '{"channel": "demo", "seq": 3, "t_start": 15000, "t_end": 18000, "text": "主播在哪个城市我在成都。"}',
]
comments = [
    '{"channel": "demo", "user": "a1", "t": 1000, "text": "想听周杰伦的晴天"}',
    '{"channel": "demo", "user": "a2", "t": 2000, "text": "哈哈哈哈"}',
    '{"channel": "demo", "user": "a3", "t": 12000, "text": "主播在哪个城市？"}',
    '{"channel": "demo", "user": "a3", "t": 12500, "text": "主播在哪个城市？"}',  # duplicate, dropped
]

stream = load_channel_stream(transcript, comments, streamer_id="streamer-1")
print(len(stream.comments), "comments,", len(stream.utterances), "segments")

# %%
# the first reply spans two segments; merging stops at the full stop
for pair in extract_dialogues(stream):
    print(pair.comment.text, "->", pair.response_text, pair.merged_seqs)

# %%
# the echoed comment is stripped from the reply; the raw text keeps it
pairs = extract_dialogues(stream)
print(pairs[0].raw_response_text)
print(pairs[0].response_text)
