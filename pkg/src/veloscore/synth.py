"""Deterministic synthetic stream/graph/clicks generator.

Desk-scale fixtures with known ground truth: per-user per-hour mention
counts are planted exactly (Bresenham accumulation, not sampled) in the
default "exact" mode, and URL clicks are derived from audience and the
promoters' frictionless velocity with a configurable signal strength, so
the planted correlation sign is known.  Byte-deterministic for a fixed
seed.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from datetime import datetime, timedelta, timezone
from pathlib import Path
from typing import Optional

import numpy as np

WEEK_HOURS = 168

_PHRASES = (
    "great show tonight",
    "this made my day",
    "cannot stop listening",
    "what a finish",
    "new post is up",
    "thanks for the support",
    "see you at the meetup",
    "back in the studio",
)


@dataclass(frozen=True)
class Burst:
    """Extra mention rate planted for one user over [start_hour, end_hour)."""

    user: str
    start_hour: int
    end_hour: int
    rate: float


@dataclass
class SynthConfig:
    seed: int = 0
    users: int = 200
    hours: int = 2 * WEEK_HOURS
    celebrity_fraction: float = 0.02
    celebrity_follow_boost: float = 40.0
    celebrity_mention_boost: float = 40.0
    celebrity_mutual_follows: bool = True
    base_mention_rate: float = 0.05
    mention_follower_exponent: float = 0.0
    mention_rate_cap: float = 0.0
    weekly_rate_sigma: float = 0.6
    bursts: tuple = ()
    graph_model: str = "preferential"
    follows_per_user: int = 10
    spam_cluster_size: int = 0
    originals_per_week: int = 2
    retweet_every: int = 5
    retweet_targets: str = "all"
    mutual_retweet_pairs: bool = False
    cc_every: int = 0
    url_count: int = 0
    min_promoters: int = 3
    max_promoters: int = 8
    url_week_min: int = 0
    cross_week_url_fraction: float = 0.0
    signal: float = 0.0
    base_click_prob: float = 0.05
    click_noise: float = 0.2
    mode: str = "exact"
    epoch: str = "2025-01-06T00:00:00+00:00"
    follower_count_overrides: Optional[dict[str, int]] = None

    def __post_init__(self):
        if self.users <= 0:
            raise ValueError("users must be positive")
        if self.hours <= 0:
            raise ValueError("hours must be positive")
        if not 0.0 <= self.celebrity_fraction <= 1.0:
            raise ValueError("celebrity_fraction must be in [0, 1]")
        if not 0.0 <= self.cross_week_url_fraction <= 1.0:
            raise ValueError("cross_week_url_fraction must be in [0, 1]")
        for name in ("base_mention_rate", "celebrity_follow_boost",
                     "celebrity_mention_boost", "mention_follower_exponent",
                     "mention_rate_cap", "weekly_rate_sigma",
                     "base_click_prob", "click_noise"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if self.url_week_min < 0:
            raise ValueError("url_week_min must be >= 0")
        if self.graph_model not in ("preferential", "uniform"):
            raise ValueError("graph_model must be preferential or uniform")
        if self.retweet_targets not in ("all", "celebrities"):
            raise ValueError("retweet_targets must be all or celebrities")
        if self.mode not in ("exact", "sampled"):
            raise ValueError("mode must be exact or sampled")
        for b in self.bursts:
            if b.rate < 0 or b.start_hour < 0 or b.end_hour > self.hours \
                    or b.start_hour >= b.end_hour:
                raise ValueError(f"invalid burst {b}")


def _bresenham_counts(rate: float, span: int) -> list[int]:
    """Integer per-hour counts whose running total tracks rate*h exactly."""
    return [math.floor((h + 1) * rate) - math.floor(h * rate) for h in range(span)]


def _mass(followers: int) -> float:
    return float(followers) if followers > 0 else 1.0


def _plant(schedule: dict[str, dict[int, int]], user: str, hour: int, count: int) -> None:
    if count > 0:
        per_user = schedule.setdefault(user, {})
        per_user[hour] = per_user.get(hour, 0) + count


def generate(cfg: SynthConfig, out_dir) -> dict:
    """Write events.ndjson, edges.tsv, clicks.tsv, optional
    follower_counts.tsv, and manifest.json into ``out_dir``; returns the
    manifest."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(cfg.seed)
    epoch = datetime.fromisoformat(cfg.epoch.replace("Z", "+00:00"))
    if epoch.tzinfo is None:
        epoch = epoch.replace(tzinfo=timezone.utc)

    n = cfg.users
    handles = [f"u{i:05d}" for i in range(n)]
    handle_set = set(handles)
    for b in cfg.bursts:
        if b.user not in handle_set:
            raise ValueError(f"burst user {b.user!r} is not a generated user")
    n_celebs = math.ceil(cfg.celebrity_fraction * n) if cfg.celebrity_fraction > 0 else 0
    n_weeks = max(1, cfg.hours // WEEK_HOURS)

    # --- follower graph ------------------------------------------------
    weights = np.ones(n)
    if cfg.graph_model == "preferential" and n_celebs:
        weights[:n_celebs] = cfg.celebrity_follow_boost
    edges: set[tuple[str, str]] = set()
    k_follow = min(cfg.follows_per_user, n - 1)
    if k_follow > 0:
        for i in range(n):
            p = weights.copy()
            p[i] = 0.0
            p /= p.sum()
            for j in rng.choice(n, size=k_follow, replace=False, p=p):
                edges.add((handles[i], handles[int(j)]))
    if cfg.celebrity_mutual_follows:
        for i in range(n_celebs):
            for j in range(n_celebs):
                if i != j:
                    edges.add((handles[i], handles[j]))
    if cfg.mutual_retweet_pairs:
        # buddy pairs (0,1), (2,3), ... follow each other; each user's
        # retweets come from the buddy, keeping every user inside a
        # reciprocal interaction loop
        for i in range(0, n - 1, 2):
            edges.add((handles[i], handles[i + 1]))
            edges.add((handles[i + 1], handles[i]))
    spam_handles = [f"spam{i:03d}" for i in range(cfg.spam_cluster_size)]
    for a in spam_handles:
        for b in spam_handles:
            if a != b:
                edges.add((a, b))

    all_handles = handles + spam_handles
    followers = {h: 0 for h in all_handles}
    for _, followee in edges:
        followers[followee] += 1
    if cfg.follower_count_overrides:
        for u in sorted(cfg.follower_count_overrides):
            if u not in followers:
                all_handles.append(u)
            followers[u] = cfg.follower_count_overrides[u]

    # --- planted mention schedule --------------------------------------
    week_mult = np.exp(rng.normal(0.0, cfg.weekly_rate_sigma, size=(n, n_weeks))) \
        if cfg.weekly_rate_sigma > 0 else np.ones((n, n_weeks))
    schedule: dict[str, dict[int, int]] = {}
    for i, u in enumerate(handles):
        rate = cfg.base_mention_rate * (cfg.celebrity_mention_boost if i < n_celebs else 1.0)
        if cfg.mention_follower_exponent > 0:
            rate *= max(followers[u], 1) ** cfg.mention_follower_exponent
        if cfg.mention_rate_cap > 0:
            rate = min(rate, cfg.mention_rate_cap)
        for w in range(n_weeks):
            lo = w * WEEK_HOURS
            hi = min((w + 1) * WEEK_HOURS, cfg.hours) if w < n_weeks - 1 else cfg.hours
            r = rate * week_mult[i, w]
            counts = _bresenham_counts(r, hi - lo) if cfg.mode == "exact" \
                else rng.poisson(r, size=hi - lo)
            for h_off, c in enumerate(counts):
                _plant(schedule, u, lo + h_off, int(c))
    for b in cfg.bursts:
        span = b.end_hour - b.start_hour
        counts = _bresenham_counts(b.rate, span) if cfg.mode == "exact" \
            else rng.poisson(b.rate, size=span)
        for h_off, c in enumerate(counts):
            _plant(schedule, b.user, b.start_hour + h_off, int(c))

    # --- mention/retweet events ----------------------------------------
    idx = {h: i for i, h in enumerate(all_handles)}
    followers_of: dict[str, list[str]] = {h: [] for h in all_handles}
    for follower, followee in edges:
        followers_of[followee].append(follower)
    for h in followers_of:
        followers_of[h].sort()

    events: list[tuple[datetime, str, str]] = []
    # cc tokens add force beyond the schedule; tracked separately so the
    # manifest matches what the stream actually carries.
    extra_counts: dict[str, dict[int, int]] = {}
    retweet_counts: dict[str, dict[int, int]] = {}
    celeb_set = set(handles[:n_celebs])

    def buddy_of(user: str):
        i = idx.get(user)
        if i is None or i >= n:
            return None
        j = i ^ 1
        return handles[j] if j < n else None

    seq = 0
    for u in sorted(schedule):
        per_user = schedule[u]
        flw = followers_of.get(u, [])
        retweetable = cfg.retweet_targets == "all" or u in celeb_set
        buddy = buddy_of(u) if cfg.mutual_retweet_pairs else None
        for hour in sorted(per_user):
            count = per_user[hour]
            for k in range(count):
                if buddy is not None and cfg.retweet_every > 0 \
                        and seq % cfg.retweet_every == 0:
                    author = buddy
                    is_retweet = True
                elif flw:
                    author = flw[(hour + k) % len(flw)]
                    is_retweet = retweetable and not cfg.mutual_retweet_pairs \
                        and cfg.retweet_every > 0 and (seq % cfg.retweet_every == 0)
                else:
                    a_i = (idx[u] + 1 + k) % n
                    if handles[a_i] == u:
                        a_i = (a_i + 1) % n
                    author = handles[a_i]
                    is_retweet = False
                phrase = _PHRASES[(hour + k) % len(_PHRASES)]
                if is_retweet:
                    text = f"RT @{u}: {phrase}"
                    per_rt = retweet_counts.setdefault(u, {})
                    per_rt[hour] = per_rt.get(hour, 0) + 1
                else:
                    text = f"@{u} {phrase}"
                if cfg.cc_every > 0 and seq % cfg.cc_every == 0:
                    cc = handles[(idx[u] + hour) % n]
                    if cc != author and cc != u:
                        text += f" (cc @{cc})"
                        _plant(extra_counts, cc, hour, 1)
                minute = ((k * 60) // max(count, 1)) % 60
                ts = epoch + timedelta(hours=hour, minutes=minute, seconds=k % 60)
                events.append((ts, author, text))
                seq += 1

    # original (mention-free) posts keep authored-event denominators sane
    for w in range(n_weeks):
        lo = w * WEEK_HOURS
        hi = min((w + 1) * WEEK_HOURS, cfg.hours) if w < n_weeks - 1 else cfg.hours
        for i, u in enumerate(handles):
            for j in range(cfg.originals_per_week):
                hour = lo + (j * (hi - lo)) // max(cfg.originals_per_week, 1)
                hour = min(hour + (i % 7), hi - 1)
                ts = epoch + timedelta(hours=hour, minutes=(i * 3 + j) % 60, seconds=i % 60)
                events.append((ts, u, _PHRASES[(i + j) % len(_PHRASES)]))

    # --- URLs -------------------------------------------------------------
    candidates = [h for h in handles if followers[h] >= 1]
    urls: dict[str, dict] = {}
    n_cross = math.ceil(cfg.cross_week_url_fraction * cfg.url_count)
    week_lo = min(cfg.url_week_min, n_weeks - 1)
    for u_i in range(cfg.url_count):
        url = f"http://sho.rt/{u_i:05x}"
        week = week_lo + u_i % (n_weeks - week_lo)
        size = int(rng.integers(cfg.min_promoters, cfg.max_promoters + 1))
        size = min(size, len(candidates))
        promoters = sorted(candidates[int(c)] for c in
                           rng.choice(len(candidates), size=size, replace=False))
        weeks = [week]
        if u_i < n_cross and n_weeks >= 2:
            weeks.append((week + 1) % n_weeks)
        for p_i, promoter in enumerate(promoters):
            w = weeks[p_i % len(weeks)]
            lo = w * WEEK_HOURS
            hi = min((w + 1) * WEEK_HOURS, cfg.hours) if w < n_weeks - 1 else cfg.hours
            hour = int(rng.integers(lo, hi))
            minute = int(rng.integers(0, 60))
            ts = epoch + timedelta(hours=hour, minutes=minute, seconds=p_i % 60)
            events.append((ts, promoter, f"worth a look {url}"))
        urls[url] = {
            "promoters": promoters,
            "weeks": sorted(set(weeks)),
            "audience": sum(followers[p] for p in promoters),
        }

    # --- clicks from planted ground truth ----------------------------------
    total_counts: dict[str, dict[int, int]] = {
        u: dict(per_user) for u, per_user in schedule.items()
    }
    for u, per_user in extra_counts.items():
        for h, c in per_user.items():
            _plant(total_counts, u, h, c)

    cum_vel: dict[str, np.ndarray] = {}
    for u, per_user in total_counts.items():
        arr = np.zeros(n_weeks)
        for w in range(n_weeks):
            hi = min((w + 1) * WEEK_HOURS, cfg.hours) if w < n_weeks - 1 else cfg.hours
            arr[w] = sum(c for h, c in per_user.items() if h < hi) / _mass(followers.get(u, 0))
        cum_vel[u] = arr

    vhat: dict[str, float] = {}
    for url in sorted(urls):
        info = urls[url]
        w_end = max(info["weeks"])
        acc = sum(cum_vel[p][w_end] if p in cum_vel else 0.0 for p in info["promoters"])
        vhat[url] = acc / info["audience"] if info["audience"] > 0 else 0.0
    vmean = (sum(vhat.values()) / len(vhat)) if vhat else 0.0

    for url in sorted(urls):
        info = urls[url]
        # normalized to the mean so typical urls see the full signal swing;
        # clipped so the outlier fences do not eat the signal carriers
        vnorm = min(vhat[url] / vmean, 3.0) if vmean > 0 else 0.0
        eta = float(rng.uniform(-1.0, 1.0))
        raw = info["audience"] * cfg.base_click_prob \
            * (1.0 + cfg.signal * vnorm) * (1.0 + cfg.click_noise * eta)
        info["clicks"] = max(0, round(raw))

    # --- write files --------------------------------------------------------
    events.sort(key=lambda e: (e[0], e[1], e[2]))
    with open(out / "events.ndjson", "w", encoding="utf-8") as fh:
        for e_i, (ts, author, text) in enumerate(events):
            rec = {
                "id": f"e{e_i:08d}",
                "ts": ts.isoformat().replace("+00:00", "Z"),
                "author": author,
                "text": text,
            }
            fh.write(json.dumps(rec, sort_keys=True) + "\n")

    with open(out / "edges.tsv", "w", encoding="utf-8") as fh:
        for a, b in sorted(edges):
            fh.write(f"{a}\t{b}\n")

    with open(out / "clicks.tsv", "w", encoding="utf-8") as fh:
        for url in sorted(urls):
            fh.write(f"{url}\t{urls[url]['clicks']}\n")

    if cfg.follower_count_overrides:
        with open(out / "follower_counts.tsv", "w", encoding="utf-8") as fh:
            for u in sorted(cfg.follower_count_overrides):
                fh.write(f"{u}\t{cfg.follower_count_overrides[u]}\n")

    manifest = {
        "epoch": cfg.epoch,
        "config": {k: (list(v) if isinstance(v, tuple) else v)
                   for k, v in asdict(cfg).items()},
        "users": {h: followers[h] for h in sorted(all_handles)},
        "mention_counts": {
            u: {str(h): c for h, c in sorted(total_counts[u].items())}
            for u in sorted(total_counts)
        },
        "retweet_counts": {
            u: {str(h): c for h, c in sorted(retweet_counts[u].items())}
            for u in sorted(retweet_counts)
        },
        "urls": {url: urls[url] for url in sorted(urls)},
        "totals": {
            "events": len(events),
            "mentions": sum(sum(d.values()) for d in total_counts.values()),
            "retweets": sum(sum(d.values()) for d in retweet_counts.values()),
        },
    }
    with open(out / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest
