"""Benchmark task files built from extracted pairs.

Response modeling gets one (comment, response, persona) record per pair.
Addressee recognition gets the response plus K candidate comments ending
with the matched one.
"""

from __future__ import annotations

import random
import warnings
from collections import defaultdict
from dataclasses import dataclass
from operator import attrgetter
from typing import Callable, Iterable, Mapping, Sequence

from .model import ChannelStream, MatchedPair


class MissingProfileWarning(UserWarning):
    pass


class InsufficientDataError(ValueError):
    pass


@dataclass(frozen=True)
class ResponsePair:
    streamer_id: str
    comment_text: str
    response_text: str
    persona_ref: str | None  # None when the streamer had no profile

    def to_dict(self) -> dict:
        return {"streamer": self.streamer_id, "comment": self.comment_text, "response": self.response_text}


@dataclass(frozen=True)
class AddresseeSession:
    streamer_id: str
    response_text: str
    candidates: tuple[tuple[str, str], ...]  # (user_id, text)
    gold_index: int
    shuffled: bool = False

    def to_dict(self) -> dict:
        return {
            "streamer": self.streamer_id,
            "response": self.response_text,
            "candidates": [{"user": u, "text": t} for u, t in self.candidates],
            "gold": self.gold_index,
            "shuffled": self.shuffled,
        }


@dataclass(frozen=True)
class StatsReport:
    dialogues: int = 0
    utterances: int = 0
    streamer_count: int = 0
    audience_count: int = 0
    avg_sessions_per_streamer: float = 0.0
    avg_utterance_length: float = 0.0
    raw_comments: int = 0
    raw_streamer_sentences: int = 0

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def build_response_task(pairs: Iterable[MatchedPair], profiles: Mapping[str, object]) -> list[ResponsePair]:
    out = []
    missing = set()
    for p in pairs:
        ref = p.streamer_id if p.streamer_id in profiles else None
        if ref is None:
            missing.add(p.streamer_id)
        out.append(ResponsePair(p.streamer_id, p.comment.text, p.response_text, ref))
    if missing:
        warnings.warn(f"no persona profile for streamers {sorted(missing)}; using an empty profile",
                      MissingProfileWarning, stacklevel=2)
    return out


def build_addressee_sessions(stream: ChannelStream, pairs: Sequence[MatchedPair], k: int = 10,
                             shuffle: bool = False, seed: int = 0) -> list[AddresseeSession]:
    """One session per pair: the comments since the previous matched comment, gold last.

    A pool larger than ``k`` keeps its last ``k`` comments; a smaller one borrows
    the most recent comments before it (earlier matched comments included).
    Sessions that cannot reach ``k`` candidates are dropped. With ``shuffle``
    the candidates are permuted and ``gold_index`` follows the gold comment.
    """
    if k < 2:
        raise ValueError("k must be >= 2")
    comments = stream.comments
    rng = random.Random(seed)
    sessions = []
    prev = -1
    for p in pairs:
        idx = p.comment_index
        lo = prev + 1 if prev < idx else idx
        pool = list(range(lo, idx + 1))
        if len(pool) > k:
            pool = pool[-k:]
        elif len(pool) < k:
            need = k - len(pool)
            pool = list(range(max(0, lo - need), lo)) + pool
        prev = idx
        if len(pool) < k:
            continue
        cands = [(comments[i].user_id, comments[i].text) for i in pool]
        gold = k - 1
        if shuffle:
            order = list(range(k))
            rng.shuffle(order)
            cands = [cands[i] for i in order]
            gold = order.index(k - 1)
        sessions.append(AddresseeSession(p.streamer_id, p.response_text, tuple(cands), gold, shuffle))
    return sessions


def split_by_persona(items: Sequence, test_fraction: float, seed: int = 0,
                     key: Callable = attrgetter("streamer_id")) -> tuple[list, list]:
    """Per-streamer stratified train/test split.

    Every streamer in the test set keeps at least one item in train; streamers
    with a single item go to train. Both parts keep the input order.
    """
    if not 0 < test_fraction < 0.5:
        raise ValueError("test_fraction must lie in (0, 0.5)")
    groups: dict[str, list[int]] = defaultdict(list)
    for i, item in enumerate(items):
        groups[key(item)].append(i)
    rng = random.Random(seed)
    test_idx: set[int] = set()
    for sid in sorted(groups):
        idx = groups[sid]
        if len(idx) < 2:
            continue
        n_test = min(len(idx) - 1, round(len(idx) * test_fraction))
        test_idx.update(rng.sample(idx, n_test))
    if not test_idx:
        raise InsufficientDataError("no streamer has enough items for a test split")
    train = [x for i, x in enumerate(items) if i not in test_idx]
    test = [x for i, x in enumerate(items) if i in test_idx]
    return train, test


def dataset_stats(pairs: Sequence[MatchedPair], streams: Sequence[ChannelStream] = ()) -> StatsReport:
    """Corpus statistics in the spirit of the usual dataset table.

    ``utterances`` counts the comment and response texts of all pairs, and
    ``avg_utterance_length`` is their mean length in characters. Audience and
    raw counts come from the streams when given, otherwise from the pairs.
    """
    n = len(pairs)
    streamers = {p.streamer_id for p in pairs}
    if streams:
        audience = {c.user_id for s in streams for c in s.comments}
        raw_comments = sum(len(s.comments) for s in streams)
        raw_sentences = sum(len(s.utterances) for s in streams)
    else:
        audience = {p.comment.user_id for p in pairs}
        raw_comments = raw_sentences = 0
    if n == 0:
        return StatsReport(audience_count=len(audience), raw_comments=raw_comments,
                           raw_streamer_sentences=raw_sentences)
    chars = sum(len(p.comment.text) + len(p.response_text) for p in pairs)
    return StatsReport(
        dialogues=n,
        utterances=2 * n,
        streamer_count=len(streamers),
        audience_count=len(audience),
        avg_sessions_per_streamer=n / len(streamers),
        avg_utterance_length=chars / (2 * n),
        raw_comments=raw_comments,
        raw_streamer_sentences=raw_sentences,
    )
