"""
Building persona profiles
=========================

Text profiles keep self-descriptive sentences; basic profiles are coded
to integers so that raw attribute values never leave the pipeline.
"""

# %%
from chatweave.persona import (IdAnonymizer, anonymize_basic_profile, build_text_profile, pos_tags,
                               rule_checks, sentences_from_segments)

pos_tags("我每天晚上八点直播唱歌")

# %%
# each sentence must pass four checks: length, first person, a verb, a noun or adjective
for s in ["我每天晚上八点直播唱歌", "你唱得真好", "我好", "我们一起打游戏吧"]:
    print(s, rule_checks(s))

# %%
# ASR segments are rejoined into sentences before filtering
history = sentences_from_segments(["我是四川", "人。", "谢谢大家的礼物！", "我平时最喜欢", "打篮球。"])
history

# %%
profile = build_text_profile(history, streamer_id="streamer-1")
print(profile.sentences, profile.total_length)

# %%
codebook = {"gender": {"女": 1, "男": 2}, "age": {"18-24": 1, "25-30": 2}, "location": {"四川": 1, "广东": 2}}
anon = IdAnonymizer()
p = anonymize_basic_profile({"gender": "女", "age": 23, "location": "西藏"}, codebook, anon("streamer-1"))
p.to_dict()  # unknown values map to 0
