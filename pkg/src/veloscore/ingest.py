"""Event-stream and graph ingestion.

Events arrive as newline-delimited JSON records; graphs as tab-separated
edge lists.  Parsing is skip-and-count: a malformed record is counted and
dropped, never fatal.  Events are discretized into one-hour force buckets
with a bounded out-of-order window.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Iterable, Iterator, Optional

import numpy as np

HOUR_SECONDS = 3600.0

# Historical handle rule: 1-15 chars of [A-Za-z0-9_], case-insensitive.
_HANDLE_RE = re.compile(r"^[a-z0-9_]{1,15}$")
_MENTION_RE = re.compile(r"(?<![A-Za-z0-9_])@([A-Za-z0-9_]{1,15})")
_RETWEET_RE = re.compile(r"^\s*rt\s+@([A-Za-z0-9_]{1,15})\b", re.IGNORECASE)
_URL_RE = re.compile(r"https?://[^\s]+")
_URL_TRAIL = ".,;:!?)'\">"


class ParseError(ValueError):
    """One malformed stream record or graph line."""


def normalize_handle(raw: str) -> str:
    """Lowercase a handle, strip a leading '@', and validate the grammar."""
    h = raw.strip().lstrip("@").lower()
    if not _HANDLE_RE.match(h):
        raise ParseError(f"invalid handle: {raw!r}")
    return h


def parse_timestamp(raw: str) -> datetime:
    """Parse an ISO-8601 instant; naive values are taken as UTC."""
    try:
        ts = datetime.fromisoformat(raw.replace("Z", "+00:00"))
    except (ValueError, TypeError, AttributeError) as exc:
        raise ParseError(f"malformed timestamp: {raw!r}") from exc
    if ts.tzinfo is None:
        return ts.replace(tzinfo=timezone.utc)
    return ts.astimezone(timezone.utc)


@dataclass
class IngestStats:
    """Skip-and-count bookkeeping shared across the ingest pipeline."""

    records: int = 0
    parse_errors: int = 0
    self_mentions: int = 0
    self_retweets: int = 0
    pre_epoch_events: int = 0
    late_events: int = 0
    self_loops_dropped: int = 0
    bad_graph_lines: int = 0
    duplicate_edges: int = 0

    @property
    def skipped(self) -> int:
        return self.parse_errors + self.pre_epoch_events + self.late_events

    @property
    def skip_rate(self) -> float:
        return self.skipped / self.records if self.records else 0.0


@dataclass
class Event:
    """One parsed stream item.

    ``mentions`` lists every non-self '@' token in text order, duplicates
    included: force counts token occurrences, not distinct mentioners.
    Self-mentions are dropped from the list but tallied in
    ``self_mentions``.
    """

    event_id: str
    author: str
    timestamp: datetime
    mentions: list[str] = field(default_factory=list)
    retweet_of: Optional[str] = None
    urls: list[str] = field(default_factory=list)
    self_mentions: int = 0

    def hour_since(self, epoch: datetime) -> int:
        return math.floor((self.timestamp - epoch).total_seconds() / HOUR_SECONDS)


def _extract_urls(text: str) -> list[str]:
    return [m.group(0).rstrip(_URL_TRAIL) for m in _URL_RE.finditer(text)]


def parse_event(line: str) -> Event:
    """Parse one JSON stream record into an Event.

    Pre-extracted ``mentions``/``rt_of``/``urls`` fields win over the
    ``text`` field when both are present.  A retweet attribution always
    appears in ``mentions`` as well.
    """
    try:
        rec = json.loads(line)
    except json.JSONDecodeError as exc:
        raise ParseError(f"not valid JSON: {exc}") from exc
    if not isinstance(rec, dict):
        raise ParseError("record is not an object")

    author_raw = rec.get("author")
    if not author_raw or not isinstance(author_raw, str):
        raise ParseError("empty author")
    author = normalize_handle(author_raw)
    ts = parse_timestamp(rec.get("ts"))
    event_id = str(rec.get("id", ""))
    text = rec.get("text", "") or ""

    self_mentions = 0
    if "mentions" in rec:
        if not isinstance(rec["mentions"], list):
            raise ParseError("mentions is not an array")
        raw_mentions = [normalize_handle(m) for m in rec["mentions"]]
    else:
        raw_mentions = [m.group(1).lower() for m in _MENTION_RE.finditer(text)]

    if "rt_of" in rec and rec["rt_of"]:
        retweet_of: Optional[str] = normalize_handle(rec["rt_of"])
    else:
        rt_match = _RETWEET_RE.match(text) if "mentions" not in rec else None
        retweet_of = rt_match.group(1).lower() if rt_match else None

    mentions = []
    for m in raw_mentions:
        if m == author:
            self_mentions += 1
        else:
            mentions.append(m)

    if retweet_of == author:
        retweet_of = None  # self-attribution carries no outside attention
    if retweet_of is not None and retweet_of not in mentions:
        mentions.insert(0, retweet_of)

    if "urls" in rec:
        if not isinstance(rec["urls"], list):
            raise ParseError("urls is not an array")
        urls = [str(u).strip() for u in rec["urls"] if str(u).strip()]
    else:
        urls = _extract_urls(text)

    return Event(
        event_id=event_id,
        author=author,
        timestamp=ts,
        mentions=mentions,
        retweet_of=retweet_of,
        urls=urls,
        self_mentions=self_mentions,
    )


def read_events(lines: Iterable[str], stats: Optional[IngestStats] = None) -> Iterator[Event]:
    """Yield parsed events from raw lines, counting and skipping bad records."""
    stats = stats if stats is not None else IngestStats()
    for line in lines:
        if not line.strip():
            continue
        stats.records += 1
        try:
            ev = parse_event(line)
        except ParseError:
            stats.parse_errors += 1
            continue
        stats.self_mentions += ev.self_mentions
        yield ev


def read_events_file(path, stats: Optional[IngestStats] = None) -> Iterator[Event]:
    with open(path, "r", encoding="utf-8") as fh:
        yield from read_events(fh, stats)


@dataclass
class HourBucket:
    """Per-user applied-force tallies for one discrete hour.

    ``force`` counts mention tokens received; ``retweet_force`` counts
    retweet attributions.  Sealed buckets are treated as immutable.
    """

    hour_index: int
    force: dict[str, int] = field(default_factory=dict)
    retweet_force: dict[str, int] = field(default_factory=dict)

    def add(self, event: Event) -> None:
        for m in event.mentions:
            self.force[m] = self.force.get(m, 0) + 1
        if event.retweet_of is not None:
            rt = event.retweet_of
            self.retweet_force[rt] = self.retweet_force.get(rt, 0) + 1

    @property
    def total_force(self) -> int:
        return sum(self.force.values())


def floor_to_hour(ts: datetime) -> datetime:
    return ts.replace(minute=0, second=0, microsecond=0)


def bucketize(
    events: Iterable[Event],
    epoch: Optional[datetime] = None,
    stats: Optional[IngestStats] = None,
    window_hours: int = 1,
) -> Iterator[HourBucket]:
    """Discretize events into contiguous one-hour buckets.

    Buckets are emitted in increasing hour order starting at the epoch
    hour; empty hours are emitted as zero-force buckets so damping applies
    every hour.  A bucket seals once an event ``window_hours + 1`` hours
    newer arrives; events for sealed buckets are counted and dropped, as
    are events before the epoch.  When ``epoch`` is omitted it defaults to
    the first event's timestamp floored to the hour.
    """
    stats = stats if stats is not None else IngestStats()
    open_buckets: dict[int, HourBucket] = {}
    max_hour = -1
    emitted_through = -1

    for ev in events:
        if epoch is None:
            epoch = floor_to_hour(ev.timestamp)
        h = ev.hour_since(epoch)
        if h < 0:
            stats.pre_epoch_events += 1
            continue
        if h < max_hour - window_hours:
            stats.late_events += 1
            continue
        if h > max_hour:
            max_hour = h
            seal_through = max_hour - window_hours - 1
            while emitted_through < seal_through:
                emitted_through += 1
                yield open_buckets.pop(emitted_through, HourBucket(emitted_through))
        bucket = open_buckets.get(h)
        if bucket is None:
            bucket = open_buckets[h] = HourBucket(h)
        bucket.add(ev)

    while emitted_through < max_hour:
        emitted_through += 1
        yield open_buckets.pop(emitted_through, HourBucket(emitted_through))


class UserGraph:
    """Directed follower graph with per-user follower counts.

    Edges are (follower, followee) index pairs into a lexicographically
    sorted user list.  ``follower_count`` defaults to in-degree; an
    explicit count override wins per user.
    """

    def __init__(self, users: list[str], edges: np.ndarray, follower_count: np.ndarray):
        self.users = users
        self.edges = edges
        self.follower_count = follower_count
        self._idx = {u: i for i, u in enumerate(users)}
        self._out_csr: Optional[tuple[np.ndarray, np.ndarray]] = None

    @classmethod
    def from_edges(
        cls,
        pairs: Iterable[tuple[str, str]],
        overrides: Optional[dict[str, int]] = None,
    ) -> "UserGraph":
        pair_set = set(pairs)
        names: set[str] = set()
        for a, b in pair_set:
            names.add(a)
            names.add(b)
        if overrides:
            names.update(overrides)
        users = sorted(names)
        idx = {u: i for i, u in enumerate(users)}
        if pair_set:
            edges = np.array(sorted((idx[a], idx[b]) for a, b in pair_set), dtype=np.int64)
        else:
            edges = np.empty((0, 2), dtype=np.int64)
        follower_count = np.bincount(edges[:, 1], minlength=len(users)).astype(np.int64)
        if overrides:
            for u, c in overrides.items():
                follower_count[idx[u]] = c
        return cls(users, edges, follower_count)

    @property
    def n(self) -> int:
        return len(self.users)

    @property
    def edge_count(self) -> int:
        return self.edges.shape[0]

    def __contains__(self, user: str) -> bool:
        return user in self._idx

    def index(self, user: str) -> Optional[int]:
        return self._idx.get(user)

    def followers_of(self, user: str) -> int:
        i = self._idx.get(user)
        return int(self.follower_count[i]) if i is not None else 0

    @property
    def in_degree(self) -> np.ndarray:
        return np.bincount(self.edges[:, 1], minlength=self.n).astype(np.int64)

    @property
    def out_degree(self) -> np.ndarray:
        return np.bincount(self.edges[:, 0], minlength=self.n).astype(np.int64)

    def mean_followers(self) -> float:
        return float(self.follower_count.mean()) if self.n else 0.0

    def has_edge(self, follower: str, followee: str) -> bool:
        i, j = self._idx.get(follower), self._idx.get(followee)
        if i is None or j is None:
            return False
        indptr, indices = self.out_csr()
        return j in indices[indptr[i]:indptr[i + 1]]

    def out_csr(self) -> tuple[np.ndarray, np.ndarray]:
        """(indptr, indices) adjacency of followees per follower."""
        if self._out_csr is None:
            order = np.lexsort((self.edges[:, 1], self.edges[:, 0]))
            src = self.edges[order, 0]
            dst = self.edges[order, 1]
            indptr = np.zeros(self.n + 1, dtype=np.int64)
            np.add.at(indptr, src + 1, 1)
            np.cumsum(indptr, out=indptr)
            self._out_csr = (indptr, dst.copy())
        return self._out_csr


def _parse_tsv_lines(path) -> Iterator[tuple[int, list[str]]]:
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            yield lineno, stripped.split("\t")


def load_graph(edge_path, counts_path=None, stats: Optional[IngestStats] = None) -> UserGraph:
    """Load a follower<TAB>followee edge list, deduplicated, self-loops dropped.

    ``counts_path`` optionally supplies per-user follower counts that
    override the in-degree default; users listed only there become
    isolated nodes.
    """
    stats = stats if stats is not None else IngestStats()
    pairs: set[tuple[str, str]] = set()
    for _, fields in _parse_tsv_lines(edge_path):
        if len(fields) != 2:
            stats.bad_graph_lines += 1
            continue
        try:
            a, b = normalize_handle(fields[0]), normalize_handle(fields[1])
        except ParseError:
            stats.bad_graph_lines += 1
            continue
        if a == b:
            stats.self_loops_dropped += 1
            continue
        if (a, b) in pairs:
            stats.duplicate_edges += 1
            continue
        pairs.add((a, b))

    overrides: Optional[dict[str, int]] = None
    if counts_path is not None:
        overrides = {}
        for _, fields in _parse_tsv_lines(counts_path):
            if len(fields) != 2:
                stats.bad_graph_lines += 1
                continue
            try:
                u = normalize_handle(fields[0])
                c = int(fields[1])
            except (ParseError, ValueError):
                stats.bad_graph_lines += 1
                continue
            if c < 0:
                stats.bad_graph_lines += 1
                continue
            overrides[u] = c

    return UserGraph.from_edges(pairs, overrides)
