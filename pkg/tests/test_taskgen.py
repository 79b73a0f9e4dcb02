import random

import pytest

from chatweave.matcher import extract_dialogues
from chatweave.model import ChannelStream, Comment, MatchedPair, UtteranceSegment
from chatweave.synthbench import GenSpec, expected_stats, generate_stream
from chatweave.taskgen import (InsufficientDataError, MissingProfileWarning, ResponsePair, StatsReport,
                               build_addressee_sessions, build_response_task, dataset_stats, split_by_persona)


def _comments(n, cid="c"):
    return [Comment(cid, f"u{i}", 1000 * i, f"评论{i}") for i in range(n)]


def _pair(comments, idx, streamer="s", t=None):
    c = comments[idx]
    return MatchedPair(c.channel_id, streamer, c, idx, "回复。", t if t is not None else c.t + 500, (idx,), "回复。")


def test_response_task_copies_fields():
    cs = _comments(3)
    pairs = [_pair(cs, i) for i in range(3)]
    out = build_response_task(pairs, {"s": {}})
    assert out == [ResponsePair("s", f"评论{i}", "回复。", "s") for i in range(3)]
    assert out[0].to_dict() == {"streamer": "s", "comment": "评论0", "response": "回复。"}


def test_missing_profile_warns_once():
    cs = _comments(2)
    with pytest.warns(MissingProfileWarning) as rec:
        out = build_response_task([_pair(cs, 0, "x"), _pair(cs, 1, "x")], {})
    assert len(rec) == 1
    assert [r.persona_ref for r in out] == [None, None]


def test_large_pool_keeps_last_k():
    cs = _comments(15)
    stream = ChannelStream("c", "s", (), cs)
    (s,) = build_addressee_sessions(stream, [_pair(cs, 14)])
    assert len(s.candidates) == 10 and s.gold_index == 9
    assert [t for _, t in s.candidates] == [c.text for c in cs[5:]]


def test_small_pool_borrows_earlier_comments():
    cs = _comments(25)
    stream = ChannelStream("c", "s", (), cs)
    pairs = [_pair(cs, 20), _pair(cs, 24)]
    first, second = build_addressee_sessions(stream, pairs)
    assert [t for _, t in second.candidates] == [c.text for c in cs[15:25]]
    assert second.gold_index == 9 and second.candidates[-1] == ("u24", "评论24")
    # the borrowed part includes the earlier gold comment
    assert ("u20", "评论20") in second.candidates[:6]


def test_short_channel_dropped():
    cs = _comments(7)
    assert build_addressee_sessions(ChannelStream("c", "s", (), cs), [_pair(cs, 6)]) == []


def test_shuffle_tracks_gold():
    cs = _comments(12)
    stream = ChannelStream("c", "s", (), cs)
    (s,) = build_addressee_sessions(stream, [_pair(cs, 11)], shuffle=True, seed=3)
    assert s.shuffled and s.candidates[s.gold_index] == ("u11", "评论11")
    assert sorted(s.candidates) == sorted((c.user_id, c.text) for c in cs[2:])
    assert s.to_dict()["shuffled"] is True


def test_k_validation():
    with pytest.raises(ValueError):
        build_addressee_sessions(ChannelStream("c", "s"), [], k=1)


def test_sessions_on_synthetic_corpus():
    for seed in range(10):
        stream, _ = generate_stream(GenSpec(seed=seed, comment_rate=20, fragment_dist=(1, 1, 1, 1)))
        pairs = extract_dialogues(stream)
        sessions = build_addressee_sessions(stream, pairs)
        assert sessions
        by_text = {p.response_text: p for p in pairs}
        for s in sessions:
            assert len(s.candidates) == 10 and s.gold_index == 9
            gold = by_text[s.response_text].comment
            assert s.candidates[-1] == (gold.user_id, gold.text)


def _items(n_streamers, per):
    return [ResponsePair(f"s{i}", "c", f"r{j}", None) for i in range(n_streamers) for j in range(per)]


def test_split_properties():
    items = _items(10, 100)
    train, test = split_by_persona(items, 0.1, seed=7)
    assert {x.streamer_id for x in test} <= {x.streamer_id for x in train}
    assert len(test) == 100 and len(train) == 900
    assert split_by_persona(items, 0.1, seed=7) == (train, test)
    assert split_by_persona(items, 0.1, seed=8) != (train, test)


def test_split_single_item_streamer_stays_in_train():
    items = _items(3, 20) + [ResponsePair("lonely", "c", "r", None)]
    for seed in range(20):
        train, test = split_by_persona(items, 0.2, seed=seed)
        assert "lonely" not in {x.streamer_id for x in test}


def test_split_random_corpora():
    rng = random.Random(0)
    for seed in range(50):
        items = [ResponsePair(f"s{rng.randrange(8)}", "c", "r", None) for _ in range(rng.randint(20, 80))]
        train, test = split_by_persona(items, rng.uniform(0.05, 0.45), seed=seed)
        assert {x.streamer_id for x in test} <= {x.streamer_id for x in train}


def test_split_errors():
    with pytest.raises(InsufficientDataError):
        split_by_persona(_items(4, 1), 0.1)
    with pytest.raises(ValueError):
        split_by_persona(_items(2, 10), 0.5)


def test_stats_arithmetic():
    cs = _comments(10)
    pairs = [_pair(cs, i, "a") for i in range(4)] + [_pair(cs, i, "b") for i in range(4, 10)]
    r = dataset_stats(pairs)
    assert r.avg_sessions_per_streamer == 5.0
    assert r.dialogues == 10 and r.utterances == 20 and r.streamer_count == 2 and r.audience_count == 10
    assert r.avg_utterance_length == pytest.approx((sum(len(c.text) for c in cs) + 10 * 3) / 20)


def test_stats_empty():
    assert dataset_stats([]) == StatsReport()
    assert all(v == 0 for v in StatsReport().to_dict().values())


def test_stats_permutation_invariant():
    stream, _ = generate_stream(GenSpec(seed=2))
    pairs = extract_dialogues(stream)
    shuffled = list(pairs)
    random.Random(0).shuffle(shuffled)
    assert dataset_stats(shuffled, [stream]) == dataset_stats(pairs, [stream])


def test_stats_match_generator_bookkeeping():
    corpus = [generate_stream(GenSpec(seed=i, channel_id=f"c{i}", streamer_id=f"s{i % 3}")) for i in range(9)]
    pairs = [p for stream, _ in corpus for p in extract_dialogues(stream)]
    assert dataset_stats(pairs, [s for s, _ in corpus]).to_dict() == expected_stats(corpus)


def test_pipeline_counts_match_extraction():
    stream, _ = generate_stream(GenSpec(seed=9, fragment_dist=(1, 1, 1, 1), noise_fraction=0.2))
    pairs = extract_dialogues(stream)
    with pytest.warns(MissingProfileWarning):
        responses = build_response_task(pairs, {})
    assert len(responses) == len(pairs)
    assert [r.response_text for r in responses] == [p.response_text for p in pairs]
    assert dataset_stats(pairs, [stream]).dialogues == len(pairs)
