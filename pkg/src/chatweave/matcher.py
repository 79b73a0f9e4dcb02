"""Reply-to-whom matching of audience comments and streamer responses.

Step 1 records, for every transcript segment, the comments posted at most
``delta_t`` ms before it that the match function accepts. Step 2 walks the
segments in order; a segment with candidates is emitted as a response when it
ends a sentence and is long enough relative to the newest eligible comment,
otherwise it is glued onto the next segment (ASR often breaks sentences).
Emitted responses then lose their echo of the comment, and greeting/thanks
boilerplate is dropped.
"""

from __future__ import annotations

import re
import unicodedata
from bisect import bisect_left, bisect_right
from dataclasses import dataclass, replace
from typing import Iterable, Sequence

from .model import ChannelStream, Comment, ExtractionConfig, MatchedPair
from .similarity import SemanticScorer, bow_vector, containment_of_bags, containment_with_bags


@dataclass(frozen=True, slots=True)
class CandidateSet:
    """Comments matched to one segment, oldest first.

    ``indices`` are positions in ``ChannelStream.comments``, parallel to ``matched``.
    """

    response_seq: int
    matched: tuple[Comment, ...] = ()
    indices: tuple[int, ...] = ()


def collect_candidates(stream: ChannelStream, config: ExtractionConfig | None = None,
                       semantic: SemanticScorer | None = None) -> list[CandidateSet]:
    config = config or ExtractionConfig()
    utts = stream.utterances
    comments = stream.comments
    n = config.ngram_order
    starts = [u.t_start for u in utts]
    resp_bags: list = [None] * len(utts)
    found: list[list[int]] = [[] for _ in utts]
    theta_lex = config.theta_lex
    theta_sem = config.theta_sem

    for ci, c in enumerate(comments):
        lo = bisect_left(starts, c.t)
        hi = bisect_right(starts, c.t + config.delta_t)
        if lo == hi:
            continue
        cbag = bow_vector(c.text, n)
        for j in range(lo, hi):
            rbag = resp_bags[j]
            if rbag is None:
                rbag = resp_bags[j] = bow_vector(utts[j].text, n)
            if containment_with_bags(c.text, utts[j].text, cbag, rbag, n) >= theta_lex or (
                semantic is not None and semantic.score(c.text, utts[j].text) >= theta_sem
            ):
                found[j].append(ci)

    return [
        CandidateSet(u.seq, tuple(comments[i] for i in idx), tuple(idx))
        for u, idx in zip(utts, found)
    ]


def assemble_and_match(stream: ChannelStream, candidates: Sequence[CandidateSet],
                       config: ExtractionConfig | None = None) -> list[MatchedPair]:
    """Merge segments into sentences and pair each with its closest-in-time comment.

    A chain of segments only accepts comments posted no later than its first
    segment, so every pair satisfies ``0 <= response_t - comment.t <= delta_t``.
    Each comment is used at most once.
    """
    config = config or ExtractionConfig()
    utts = stream.utterances
    comments = stream.comments
    if len(candidates) != len(utts):
        raise ValueError("candidates do not belong to this stream")
    punct = config.ending_punct
    tau = config.tau

    consumed: set[int] = set()
    pairs: list[MatchedPair] = []
    chain: list[int] = []
    pool: set[int] = set()
    text = ""

    for m, u in enumerate(utts):
        live = [i for i in candidates[m].indices if i not in consumed]
        if not chain and not live:
            continue
        chain.append(m)
        pool.update(live)
        text += u.text

        emitted = False
        if text[-1] in punct:
            first_t = utts[chain[0]].t_start
            # comments are time-sorted, so a higher index is a newer comment
            for ci in sorted(pool, reverse=True):
                c = comments[ci]
                if c.t > first_t:
                    continue
                if len(text) / len(c.text) > tau:
                    pairs.append(MatchedPair(
                        channel_id=stream.channel_id,
                        streamer_id=stream.streamer_id,
                        comment=c,
                        comment_index=ci,
                        response_text=text,
                        response_t=first_t,
                        merged_seqs=tuple(utts[k].seq for k in chain),
                        raw_response_text=text,
                    ))
                    consumed.add(ci)
                    emitted = True
                    break
        if emitted or len(chain) >= config.max_merge:
            chain = []
            pool = set()
            text = ""
    return pairs


def _is_punct_or_space(ch: str) -> bool:
    return ch.isspace() or unicodedata.category(ch).startswith("P")


def echo_prefix_length(response: str, comment: str, config: ExtractionConfig | None = None) -> int:
    """Length of the longest response prefix that reads as an echo of the comment.

    A prefix qualifies when it has at least two characters, at least
    ``theta_prefix`` of its n-grams occur in the comment, and its final n-gram
    occurs in the comment (so the prefix stops inside the echo rather than
    running on into the reply). Returns 0 when nothing qualifies.
    """
    config = config or ExtractionConfig()
    n = config.ngram_order
    theta = config.theta_prefix
    cbag = bow_vector(comment, n)
    best = 0
    # a prefix shorter than n is one short gram: contained iff it is a substring
    for L in range(2, min(n, len(response) + 1)):
        if response[:L] in comment:
            best = L
    seen: dict[str, int] = {}
    shared = 0
    for L in range(n, len(response) + 1):
        g = response[L - n:L]
        seen[g] = seen.get(g, 0) + 1
        if seen[g] <= cbag.get(g, 0):
            shared += 1
        if L >= 2 and g in cbag and shared / (L - n + 1) >= theta:
            best = L
    return best


def strip_repetition_prefix(pair: MatchedPair, config: ExtractionConfig | None = None) -> MatchedPair | None:
    """Remove the echoed comment from the front of the response.

    Returns the pair unchanged when no echo is found, a new pair with the echo
    and any punctuation right after it removed, or None when nothing is left.
    """
    cut = echo_prefix_length(pair.response_text, pair.comment.text, config)
    if cut == 0:
        return pair
    rest = pair.response_text
    while cut < len(rest) and _is_punct_or_space(rest[cut]):
        cut += 1
    rest = rest[cut:]
    if not rest:
        return None
    return replace(pair, response_text=rest)


def filter_noise(pairs: Iterable[MatchedPair], patterns) -> list[MatchedPair]:
    """Drop pairs whose response starts with a noise pattern (e.g. thanks, welcome)."""
    if isinstance(patterns, ExtractionConfig):
        regexes = patterns.noise_regexes
    else:
        regexes = [p if isinstance(p, re.Pattern) else re.compile(p) for p in patterns]
    return [p for p in pairs if not any(r.match(p.response_text) for r in regexes)]


def extract_with_counts(stream: ChannelStream, config: ExtractionConfig | None = None,
                        semantic: SemanticScorer | None = None) -> tuple[list[MatchedPair], int]:
    """Like ``extract_dialogues`` but also returns how many matched pairs were
    dropped by echo stripping or the noise filter."""
    config = config or ExtractionConfig()
    if not stream.comments or not stream.utterances:
        return [], 0
    candidates = collect_candidates(stream, config, semantic)
    pairs = assemble_and_match(stream, candidates, config)
    stripped = []
    for p in pairs:
        s = strip_repetition_prefix(p, config)
        if s is not None:
            stripped.append(s)
    out = filter_noise(stripped, config)
    out.sort(key=lambda p: p.response_t)
    return out, len(pairs) - len(out)


def extract_dialogues(stream: ChannelStream, config: ExtractionConfig | None = None,
                      semantic: SemanticScorer | None = None) -> list[MatchedPair]:
    """Full extraction for one channel: match, merge, strip echoes, drop noise."""
    return extract_with_counts(stream, config, semantic)[0]
