"""Shared domain types for the extraction pipeline.

Every timestamp is an integer number of milliseconds since the start of the
stream. All types are frozen; construct new values with ``dataclasses.replace``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field


class ConfigError(ValueError):
    """Raised when a configuration value breaks its invariants."""


@dataclass(frozen=True, slots=True)
class UtteranceSegment:
    """One transcribed fragment of streamer speech."""

    channel_id: str
    seq: int
    t_start: int
    t_end: int
    text: str


@dataclass(frozen=True, slots=True)
class Comment:
    """One audience message from the comment area."""

    channel_id: str
    user_id: str
    t: int
    text: str


@dataclass(frozen=True, slots=True)
class ChannelStream:
    channel_id: str
    streamer_id: str
    utterances: tuple[UtteranceSegment, ...] = ()
    comments: tuple[Comment, ...] = ()

    def __post_init__(self):
        # accept lists for convenience, store tuples so the value stays hashable
        object.__setattr__(self, "utterances", tuple(self.utterances))
        object.__setattr__(self, "comments", tuple(self.comments))

    def __len__(self) -> int:
        return len(self.utterances) + len(self.comments)


@dataclass(frozen=True, slots=True)
class MatchedPair:
    """A (comment, streamer response) dialogue pair.

    ``comment_index`` is the position of the comment in ``ChannelStream.comments``
    and is the key used for consumption and evaluation. ``merged_seqs`` lists the
    ``seq`` values of the segments concatenated into the response.
    """

    channel_id: str
    streamer_id: str
    comment: Comment
    comment_index: int
    response_text: str
    response_t: int
    merged_seqs: tuple[int, ...]
    raw_response_text: str

    def key(self) -> tuple:
        return (self.comment_index, self.merged_seqs, self.response_text)

    def to_dict(self) -> dict:
        c = self.comment
        return {
            "channel": self.channel_id,
            "streamer": self.streamer_id,
            "comment": {"user": c.user_id, "t": c.t, "text": c.text},
            "comment_index": self.comment_index,
            "response": self.response_text,
            "response_t": self.response_t,
            "merged_seqs": list(self.merged_seqs),
            "raw_response": self.raw_response_text,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MatchedPair":
        c = d["comment"]
        return cls(
            d["channel"], d["streamer"], Comment(d["channel"], c["user"], int(c["t"]), c["text"]),
            int(d["comment_index"]), d["response"], int(d["response_t"]),
            tuple(int(s) for s in d["merged_seqs"]), d["raw_response"],
        )


DEFAULT_ENDING_PUNCT = "。？！．!?."
DEFAULT_NOISE_PATTERNS = ("谢谢", "欢迎")


@dataclass(frozen=True)
class ExtractionConfig:
    """Thresholds for reply-to matching.

    delta_t: maximum comment-to-response interval in ms (inclusive).
    tau: the assembled response must be more than ``tau`` times as long as the comment.
    theta_lex / theta_sem: lexical and semantic acceptance thresholds of the match function.
    theta_prefix: containment needed to treat a response prefix as an echo of the comment.
    max_merge: longest chain of ASR segments merged into one response.
    dedup_window: repeated (user, text) comments within this many ms collapse to one.
    """

    delta_t: int = 60_000
    tau: float = 1.0
    theta_lex: float = 0.5
    theta_sem: float = 0.8
    theta_prefix: float = 0.6
    max_merge: int = 5
    ending_punct: str = DEFAULT_ENDING_PUNCT
    noise_patterns: tuple[str, ...] = DEFAULT_NOISE_PATTERNS
    ngram_order: int = 2
    dedup_window: int = 5_000
    _noise_re: tuple = field(init=False, repr=False, compare=False, default=())

    def __post_init__(self):
        object.__setattr__(self, "noise_patterns", tuple(self.noise_patterns))
        object.__setattr__(self, "ending_punct", "".join(self.ending_punct))
        if self.delta_t <= 0:
            raise ConfigError(f"delta_t must be positive, got {self.delta_t}")
        if self.tau <= 0:
            raise ConfigError(f"tau must be positive, got {self.tau}")
        for name in ("theta_lex", "theta_sem", "theta_prefix"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ConfigError(f"{name} must lie in [0, 1], got {value}")
        if self.max_merge < 1:
            raise ConfigError(f"max_merge must be >= 1, got {self.max_merge}")
        if self.ngram_order < 1:
            raise ConfigError(f"ngram_order must be >= 1, got {self.ngram_order}")
        if self.dedup_window < 0:
            raise ConfigError(f"dedup_window must be >= 0, got {self.dedup_window}")
        compiled = []
        for pattern in self.noise_patterns:
            try:
                compiled.append(re.compile(pattern))
            except re.error as exc:
                raise ConfigError(f"invalid noise pattern {pattern!r}: {exc}") from exc
        object.__setattr__(self, "_noise_re", tuple(compiled))

    @property
    def noise_regexes(self) -> tuple[re.Pattern, ...]:
        return self._noise_re

    def to_dict(self) -> dict:
        return {
            "delta_t": self.delta_t,
            "tau": self.tau,
            "theta_lex": self.theta_lex,
            "theta_sem": self.theta_sem,
            "theta_prefix": self.theta_prefix,
            "max_merge": self.max_merge,
            "ending_punct": self.ending_punct,
            "noise_patterns": list(self.noise_patterns),
            "ngram_order": self.ngram_order,
            "dedup_window": self.dedup_window,
        }


@dataclass(frozen=True, slots=True)
class Violation:
    element: str
    rule: str

    def __str__(self) -> str:
        return f"{self.element}: {self.rule}"


def validate_stream(stream: ChannelStream) -> list[Violation]:
    """Check every invariant of a stream; an empty list means it is valid."""
    out: list[Violation] = []
    cid = stream.channel_id

    prev = None
    for i, u in enumerate(stream.utterances):
        name = f"utterance[{i}] seq={u.seq}"
        if u.channel_id != cid:
            out.append(Violation(name, f"channel_id {u.channel_id!r} != {cid!r}"))
        if u.t_end < u.t_start:
            out.append(Violation(name, "t_end < t_start"))
        if not u.text or u.text != u.text.strip():
            out.append(Violation(name, "text empty or not normalized"))
        if prev is not None:
            if u.t_start < prev.t_start:
                out.append(Violation(name, "utterances not sorted by t_start"))
            if u.seq <= prev.seq:
                out.append(Violation(name, "seq does not strictly increase with t_start"))
        prev = u

    prev_t = None
    for i, c in enumerate(stream.comments):
        name = f"comment[{i}] user={c.user_id}"
        if c.channel_id != cid:
            out.append(Violation(name, f"channel_id {c.channel_id!r} != {cid!r}"))
        if not c.text or c.text != c.text.strip():
            out.append(Violation(name, "text empty or not normalized"))
        if not c.user_id:
            out.append(Violation(name, "empty user_id"))
        if c.user_id == stream.streamer_id:
            out.append(Violation(name, "comment posted under the streamer's id"))
        if prev_t is not None and c.t < prev_t:
            out.append(Violation(name, "comments not sorted by t"))
        prev_t = c.t
    return out

