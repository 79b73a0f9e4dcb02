"""Synthetic live streams with known reply links, a brute-force reference
matcher, and precision/recall scoring.

The generator models the echo-then-reply habit: a linked response starts with
the comment (verbatim, or an ordered subset of its tokens), continues with
filler and ends with sentence punctuation, and may be broken into several ASR
segments.
"""

from __future__ import annotations

import csv
import io
import json
import math
import random
import unicodedata
from dataclasses import dataclass, field, fields, replace
from itertools import accumulate
from pathlib import Path
from typing import Sequence

from .model import ChannelStream, Comment, ExtractionConfig, MatchedPair, UtteranceSegment
from .similarity import SemanticScorer, lexical_containment, match_fn

# Disjoint character pools: comment tokens never share characters with filler,
# so filler can not accidentally echo a comment. 谢 and 欢 are kept out of the
# filler pool so no reply starts like a thanks/welcome line.
COMMENT_CHARS = (
    "春夏秋冬风花雪月山川河海星光云雨龙虎猫狗鱼鸟马牛羊鸡桃李梅兰竹菊茶酒糖盐"
    "琴棋书画诗词歌舞红黄蓝绿紫金银铜铁玉石木火土水田林森江湖岛桥城村街巷楼阁"
    "门窗灯烛船车帆旗鼓钟剑刀弓箭衣帽鞋袜伞扇镜梳笔墨纸砚瓜梨豆米面饼汤粥蛋奶"
)
FILLER_CHARS = (
    "然后那个就是我们其实因为所以但是如果觉得知道可以应该已经还有一直一起一下"
    "这样那样什么怎么为何哪里这里那里现在刚才今天明天昨天时候大家朋友宝贝直播"
    "主要关键感觉时间地方事情问题情况意思东西办法比较特别非常真的确实当然好吧"
)
ENDINGS = "。？！"


def _make_vocab(chars: str, size: int, seed: int) -> tuple[str, ...]:
    rng = random.Random(seed)
    vocab: list[str] = []
    seen = set()
    while len(vocab) < size:
        tok = rng.choice(chars) + rng.choice(chars)
        if tok not in seen:
            seen.add(tok)
            vocab.append(tok)
    return tuple(vocab)


DEFAULT_VOCAB = _make_vocab(COMMENT_CHARS, 600, 7)
FILLER_VOCAB = _make_vocab(FILLER_CHARS, 400, 11)


@dataclass(frozen=True)
class GenSpec:
    """Parameters of one synthetic stream.

    Rates are events per minute. ``fragment_dist`` holds relative weights for
    responses split into 1, 2, 3 or 4 segments. ``response_rate`` is the rate
    of streamer talk that answers nobody. When ``max_events`` is set the stream
    is cut off (between whole responses) once it holds that many events.
    Responses break at word boundaries outside the echo unless ``split_echo``
    is set, in which case they may break at any character.
    """

    n_audiences: int = 50
    duration: int = 600_000
    comment_rate: float = 10.0
    response_rate: float = 3.0
    p_repeat: float = 1.0
    p_summarize: float = 0.0
    fragment_dist: tuple[float, ...] = (1.0, 0.0, 0.0, 0.0)
    noise_fraction: float = 0.0
    vocab: tuple[str, ...] = DEFAULT_VOCAB
    seed: int = 0
    channel_id: str = "synth"
    streamer_id: str = "streamer"
    max_events: int | None = None
    max_delay: int = 60_000
    ms_per_char: int = 150
    reply_tokens: tuple[int, int] = (4, 12)
    split_echo: bool = False

    def __post_init__(self):
        object.__setattr__(self, "fragment_dist", tuple(float(w) for w in self.fragment_dist))
        object.__setattr__(self, "vocab", tuple(self.vocab))
        for name in ("p_repeat", "p_summarize", "noise_fraction"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        if self.p_repeat + self.p_summarize > 1.0 + 1e-12:
            raise ValueError("p_repeat + p_summarize must not exceed 1")
        if len(self.fragment_dist) != 4 or min(self.fragment_dist) < 0 or sum(self.fragment_dist) <= 0:
            raise ValueError("fragment_dist needs 4 non-negative weights with a positive sum")
        if self.n_audiences < 1 or self.duration <= 0 or len(self.vocab) < 2:
            raise ValueError("n_audiences, duration and vocab must be positive")
        object.__setattr__(self, "reply_tokens", tuple(self.reply_tokens))
        if not 1 <= self.reply_tokens[0] <= self.reply_tokens[1]:
            raise ValueError("reply_tokens must be a (min, max) pair with 1 <= min <= max")
        if set("".join(self.vocab)) & set(FILLER_CHARS):
            raise ValueError("vocab shares characters with the filler pool")

    @classmethod
    def from_dict(cls, d: dict) -> "GenSpec":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown GenSpec keys: {sorted(unknown)}")
        return cls(**d)


@dataclass(frozen=True)
class Link:
    comment_index: int
    seqs: tuple[int, ...]
    mode: str  # "repeat" or "summarize"
    reply_text: str  # response with the echo removed


@dataclass(frozen=True)
class GroundTruth:
    links: tuple[Link, ...] = ()
    dropped_links: int = 0  # answers that could not be scheduled within max_delay

    def pairs(self) -> set[tuple[int, tuple[int, ...]]]:
        return {(l.comment_index, l.seqs) for l in self.links}


@dataclass
class _Speech:
    desired: int
    order: int
    tokens: list[str]
    ending: str
    n_frag: int
    comment: int | None = None  # generation index of the answered comment
    echo_len: int = 0
    mode: str = ""
    segments: list = field(default_factory=list)


def _fragment_count(rng: random.Random, dist: Sequence[float]) -> int:
    return rng.choices((1, 2, 3, 4), weights=dist)[0]


def _filler(rng: random.Random, lo: int, hi: int) -> list[str]:
    return [rng.choice(FILLER_VOCAB) for _ in range(rng.randint(lo, hi))]


def generate_stream(spec: GenSpec) -> tuple[ChannelStream, GroundTruth]:
    rng = random.Random(spec.seed)
    vocab = spec.vocab

    # comments
    comment_ts = []
    t = 0.0
    per_ms = spec.comment_rate / 60_000
    while per_ms > 0:
        t += rng.expovariate(per_ms)
        if t >= spec.duration:
            break
        comment_ts.append(int(t))
    raw_comments = []  # (t, user, tokens, noise)
    used = set()
    for ct in comment_ts:
        user = f"u{rng.randrange(spec.n_audiences)}"
        while True:
            tokens = [rng.choice(vocab) for _ in range(rng.randint(3, 6))]
            if (user, "".join(tokens)) not in used:
                break
        used.add((user, "".join(tokens)))
        raw_comments.append((ct, user, tokens, rng.random() < spec.noise_fraction))

    # streamer speech items
    speech: list[_Speech] = []
    for ci, (ct, _, tokens, noise) in enumerate(raw_comments):
        if noise:
            continue
        u = rng.random()
        delay = rng.randint(1_000, 20_000)
        if u < spec.p_repeat:
            echo, mode = list(tokens), "repeat"
        elif u < spec.p_repeat + spec.p_summarize:
            keep = rng.randint(math.ceil(len(tokens) / 2), len(tokens))
            picked = sorted(rng.sample(range(len(tokens)), keep))
            echo, mode = [tokens[i] for i in picked], "summarize"
        else:
            # the streamer talks around the comment without echoing it
            speech.append(_Speech(ct + delay, len(speech), _filler(rng, 3, 10),
                                  rng.choice(ENDINGS), _fragment_count(rng, spec.fragment_dist)))
            continue
        speech.append(_Speech(ct + delay, len(speech), echo + _filler(rng, *spec.reply_tokens), rng.choice(ENDINGS),
                              _fragment_count(rng, spec.fragment_dist), ci, len(echo), mode))
    t = 0.0
    per_ms = spec.response_rate / 60_000
    while per_ms > 0:
        t += rng.expovariate(per_ms)
        if t >= spec.duration:
            break
        speech.append(_Speech(int(t), len(speech), _filler(rng, 3, 10), rng.choice(ENDINGS),
                              _fragment_count(rng, spec.fragment_dist)))

    # schedule one item at a time; an answer that would start too late is given up
    speech.sort(key=lambda s: (s.desired, s.order))
    cursor = 0
    scheduled: list[_Speech] = []
    dropped = 0
    for s in speech:
        start = max(s.desired, cursor)
        if s.comment is not None and start - raw_comments[s.comment][0] > spec.max_delay:
            dropped += 1
            continue
        full = "".join(s.tokens) + s.ending
        if spec.split_echo:
            # harsh ASR: breaks at any character, including inside the echo
            allowed = list(range(1, len(full) - 1))
        else:
            # breaks at word boundaries; a read-out comment is one breath group
            ends = list(accumulate(len(tok) for tok in s.tokens))[:-1]
            allowed = ends[max(s.echo_len - 1, 0):]
        cuts = sorted(rng.sample(allowed, min(s.n_frag - 1, len(allowed))))
        bounds = [0] + cuts + [len(full)]
        pos = start
        for a, b in zip(bounds, bounds[1:]):
            text = full[a:b]
            dur = len(text) * spec.ms_per_char
            s.segments.append((pos, pos + dur - 1, text))
            pos += dur + rng.randint(0, 300)
        cursor = pos + rng.randint(300, 1_500)
        scheduled.append(s)

    # optional cut-off, keeping each response whole
    keep_comments = len(raw_comments)
    if spec.max_events is not None:
        units = [(c[0], 0, i, 1) for i, c in enumerate(raw_comments)]
        units += [(s.segments[0][0], 1, i, len(s.segments)) for i, s in enumerate(scheduled)]
        units.sort()
        total = 0
        keep_speech = set()
        keep_comments = 0
        for t0, kind, i, size in units:
            if total + size > spec.max_events:
                break
            total += size
            if kind == 0:
                keep_comments = i + 1
            else:
                keep_speech.add(i)
        scheduled = [s for i, s in enumerate(scheduled) if i in keep_speech]

    comments = tuple(
        Comment(spec.channel_id, user, ct, "".join(tokens))
        for ct, user, tokens, _ in raw_comments[:keep_comments]
    )
    utterances = []
    links = []
    for s in scheduled:
        seqs = []
        for t_start, t_end, text in s.segments:
            seqs.append(len(utterances))
            utterances.append(UtteranceSegment(spec.channel_id, len(utterances), t_start, t_end, text))
        if s.comment is not None and s.comment < keep_comments:
            reply = "".join(s.tokens[s.echo_len:]) + s.ending
            links.append(Link(s.comment, tuple(seqs), s.mode, reply))
    links.sort(key=lambda l: l.seqs[0])
    stream = ChannelStream(spec.channel_id, spec.streamer_id, tuple(utterances), comments)
    return stream, GroundTruth(tuple(links), dropped)


def generate_ambiguity_case(seed: int, config: ExtractionConfig | None = None) -> tuple[ChannelStream, int]:
    """Two comments that both match one response; returns the stream and the
    index of the later comment, which the matcher must choose."""
    config = config or ExtractionConfig()
    rng = random.Random(seed)
    vocab = DEFAULT_VOCAB
    first = [rng.choice(vocab) for _ in range(rng.randint(3, 6))]
    if rng.random() < 0.5:
        second = list(first)  # same question from two viewers
        echo = first
    else:
        second = [rng.choice(vocab) for _ in range(rng.randint(3, 6))]
        echo = first + second  # the streamer reads both out
    t1 = rng.randint(0, 10_000)
    t2 = t1 + rng.randint(1, 20_000)
    t_resp = t2 + rng.randint(0, config.delta_t - (t2 - t1))
    text = "".join(echo + _filler(rng, 4, 10)) + rng.choice(ENDINGS)
    cid = f"amb{seed}"
    comments = (Comment(cid, "u1", t1, "".join(first)), Comment(cid, "u2", t2, "".join(second)))
    utts = (UtteranceSegment(cid, 0, t_resp, t_resp + 150 * len(text), text),)
    return ChannelStream(cid, "streamer", utts, comments), 1


def write_corpus(directory, specs: Sequence[GenSpec]) -> list[tuple[ChannelStream, GroundTruth]]:
    """Generate one channel per spec and write it in the CLI input layout
    (``<channel>.transcript.jsonl``, ``<channel>.comments.jsonl``, ``streamers.json``)."""
    from .ingest import write_stream

    root = Path(directory)
    root.mkdir(parents=True, exist_ok=True)
    out = []
    streamers = {}
    for spec in specs:
        stream, truth = generate_stream(spec)
        cid = spec.channel_id
        write_stream(stream, root / f"{cid}.transcript.jsonl", root / f"{cid}.comments.jsonl")
        streamers[cid] = spec.streamer_id
        out.append((stream, truth))
    (root / "streamers.json").write_text(json.dumps(streamers, sort_keys=True), encoding="utf-8")
    return out


def expected_stats(corpus: Sequence[tuple[ChannelStream, GroundTruth]]) -> dict:
    """Dataset statistics computed from generator bookkeeping alone.

    Matches ``dataset_stats`` on the extracted pairs whenever extraction
    recovers every link exactly (e.g. clean echo, no noise).
    """
    n = sum(len(t.links) for _, t in corpus)
    streamers = {s.streamer_id for s, t in corpus if t.links}
    chars = sum(len(s.comments[l.comment_index].text) + len(l.reply_text) for s, t in corpus for l in t.links)
    return {
        "dialogues": n,
        "utterances": 2 * n,
        "streamer_count": len(streamers),
        "audience_count": len({c.user_id for s, _ in corpus for c in s.comments}),
        "avg_sessions_per_streamer": n / len(streamers) if streamers else 0.0,
        "avg_utterance_length": chars / (2 * n) if n else 0.0,
        "raw_comments": sum(len(s.comments) for s, _ in corpus),
        "raw_streamer_sentences": sum(len(s.utterances) for s, _ in corpus),
    }


# --- reference matcher --------------------------------------------------------

class SizeLimitError(ValueError):
    pass


ORACLE_MAX_EVENTS = 10_000


def _oracle_strip(response: str, comment: str, config: ExtractionConfig) -> str:
    n = config.ngram_order
    cut = 0
    for L in range(len(response), 1, -1):
        p = response[:L]
        last = p[-n:] if L >= n else p
        if last in comment and lexical_containment(p, comment, n) >= config.theta_prefix:
            cut = L
            break
    if cut == 0:
        return response
    while cut < len(response) and (response[cut].isspace() or _is_punct(response[cut])):
        cut += 1
    return response[cut:]


def _is_punct(ch: str) -> bool:
    return unicodedata.category(ch).startswith("P")


def oracle_match(stream: ChannelStream, config: ExtractionConfig | None = None,
                 semantic: SemanticScorer | None = None) -> list[MatchedPair]:
    """Exhaustive reference for the reply-to matcher.

    Builds the full (comment, segment) match table, materializes every chain
    of up to ``max_merge`` segments, and then picks chains and comments with
    the same newest-first, consume-once policy. Quadratic; meant for small
    streams in tests.
    """
    config = config or ExtractionConfig()
    if len(stream) > ORACLE_MAX_EVENTS:
        raise SizeLimitError(f"stream has {len(stream)} events; oracle limit is {ORACLE_MAX_EVENTS}")
    U = stream.utterances
    C = stream.comments

    table = [
        {ci for ci, c in enumerate(C)
         if 0 <= u.t_start - c.t <= config.delta_t and match_fn(c.text, u.text, config, semantic)}
        for u in U
    ]
    chains = {}
    for s in range(len(U)):
        for e in range(s, min(len(U), s + config.max_merge)):
            text = "".join(U[k].text for k in range(s, e + 1))
            cands = set().union(*table[s:e + 1])
            chains[s, e] = (text, U[s].t_start, cands)

    consumed: set[int] = set()
    raw: list[tuple[int, int, int]] = []  # (start, end, comment)
    pos = 0
    while pos < len(U):
        s = next((k for k in range(pos, len(U)) if table[k] - consumed), None)
        if s is None:
            break
        hit = None
        for e in range(s, min(len(U), s + config.max_merge)):
            text, first_t, cands = chains[s, e]
            if text[-1] not in config.ending_punct:
                continue
            ok = [ci for ci in cands - consumed
                  if C[ci].t <= first_t and len(text) / len(C[ci].text) > config.tau]
            if ok:
                hit = (e, max(ok, key=lambda ci: (C[ci].t, ci)))
                break
        if hit is None:
            pos = s + config.max_merge
            continue
        e, ci = hit
        consumed.add(ci)
        raw.append((s, e, ci))
        pos = e + 1

    out = []
    for s, e, ci in raw:
        text = chains[s, e][0]
        reply = _oracle_strip(text, C[ci].text, config)
        if not reply or any(r.match(reply) for r in config.noise_regexes):
            continue
        out.append(MatchedPair(stream.channel_id, stream.streamer_id, C[ci], ci, reply,
                               U[s].t_start, tuple(U[k].seq for k in range(s, e + 1)), text))
    out.sort(key=lambda p: p.response_t)
    return out


# --- scoring --------------------------------------------------------------------

@dataclass(frozen=True)
class Scores:
    precision: float
    recall: float
    f1: float
    n_pred: int
    n_true: int
    n_correct: int
    precision_defined: bool = True

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def _prf(n_pred: int, n_true: int, correct_pred: int, found_true: int) -> Scores:
    precision = correct_pred / n_pred if n_pred else 1.0
    recall = found_true / n_true if n_true else 1.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return Scores(precision, recall, f1, n_pred, n_true, correct_pred, n_pred > 0)


def _match_counts(pairs: Sequence[MatchedPair], truth: GroundTruth) -> tuple[int, int]:
    by_comment: dict[int, list[set[int]]] = {}
    for link in truth.links:
        by_comment.setdefault(link.comment_index, []).append(set(link.seqs))
    found = set()
    correct = 0
    for p in pairs:
        for k, seqs in enumerate(by_comment.get(p.comment_index, ())):
            if seqs.intersection(p.merged_seqs):
                correct += 1
                found.add((p.comment_index, k))
                break
    return correct, len(found)


def evaluate(pairs: Sequence[MatchedPair], truth: GroundTruth) -> Scores:
    """A pair is correct when its comment has a true link whose segments overlap
    the pair's merged segments. With no predictions precision is reported as
    1.0 and ``precision_defined`` is False."""
    correct, found = _match_counts(pairs, truth)
    return _prf(len(pairs), len(truth.links), correct, found)


def evaluate_many(results: Sequence[tuple[Sequence[MatchedPair], GroundTruth]]) -> Scores:
    """Micro-averaged scores over several streams."""
    n_pred = n_true = correct = found = 0
    for pairs, truth in results:
        c, f = _match_counts(pairs, truth)
        n_pred += len(pairs)
        n_true += len(truth.links)
        correct += c
        found += f
    return _prf(n_pred, n_true, correct, found)


# --- sweeps ---------------------------------------------------------------------

@dataclass(frozen=True)
class BenchRow:
    name: str
    gen: GenSpec
    n_streams: int = 100
    config: ExtractionConfig = field(default_factory=ExtractionConfig)
    min_precision: float = 0.0
    min_recall: float = 0.0

    @classmethod
    def from_dict(cls, d: dict) -> "BenchRow":
        d = dict(d)
        gen = GenSpec.from_dict(d.pop("gen", {}))
        config = ExtractionConfig(**d.pop("config", {}))
        return cls(gen=gen, config=config, **d)


@dataclass(frozen=True)
class RowResult:
    row: BenchRow
    scores: Scores
    window_violations: int
    consumption_violations: int

    @property
    def passed(self) -> bool:
        return (self.scores.precision >= self.row.min_precision
                and self.scores.recall >= self.row.min_recall
                and self.window_violations == 0
                and self.consumption_violations == 0)


def invariant_violations(pairs: Sequence[MatchedPair], config: ExtractionConfig) -> tuple[int, int]:
    """Count pairs outside the reply window and comments used more than once."""
    window = sum(1 for p in pairs if not 0 <= p.response_t - p.comment.t <= config.delta_t)
    keys = [(p.channel_id, p.comment_index) for p in pairs]
    return window, len(keys) - len(set(keys))


def run_row(row: BenchRow, extractor=None) -> RowResult:
    if extractor is None:
        from .matcher import extract_dialogues as extractor
    results = []
    win = dup = 0
    for i in range(row.n_streams):
        stream, truth = generate_stream(replace(row.gen, seed=row.gen.seed + i, channel_id=f"{row.name}-{i}"))
        pairs = extractor(stream, row.config)
        w, d = invariant_violations(pairs, row.config)
        win += w
        dup += d
        results.append((pairs, truth))
    return RowResult(row, evaluate_many(results), win, dup)


SWEEP_COLUMNS = [
    "name", "n_streams", "seed", "p_repeat", "p_summarize", "fragment_dist", "noise_fraction",
    "split_echo", "comment_rate", "response_rate", "duration", "max_events",
    "precision", "recall", "f1", "n_pred", "n_true", "n_correct",
    "window_violations", "consumption_violations", "min_precision", "min_recall", "passed",
]


def sweep_table(results: Sequence[RowResult]) -> str:
    """Render row results as CSV (one line per row, parameters then scores)."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SWEEP_COLUMNS)
    for r in results:
        g, s = r.row.gen, r.scores
        w.writerow([
            r.row.name, r.row.n_streams, g.seed, g.p_repeat, g.p_summarize,
            "/".join(f"{x:g}" for x in g.fragment_dist), g.noise_fraction,
            int(g.split_echo), g.comment_rate, g.response_rate, g.duration, g.max_events if g.max_events is not None else "",
            f"{s.precision:.6f}", f"{s.recall:.6f}", f"{s.f1:.6f}", s.n_pred, s.n_true, s.n_correct,
            r.window_violations, r.consumption_violations, r.row.min_precision, r.row.min_recall,
            int(r.passed),
        ])
    return buf.getvalue()
