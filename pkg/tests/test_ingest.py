"""Stream parsing, hour bucketing, and graph loading."""

import json
import random
from datetime import datetime, timedelta, timezone

import pytest

from veloscore.ingest import (
    IngestStats,
    ParseError,
    UserGraph,
    bucketize,
    load_graph,
    normalize_handle,
    parse_event,
    read_events,
)

EPOCH = datetime(2025, 1, 6, 0, 0, 0, tzinfo=timezone.utc)


def record(author, text, ts=None, **extra):
    rec = {"id": "e1", "author": author,
           "ts": (ts or EPOCH).isoformat(), "text": text}
    rec.update(extra)
    return json.dumps(rec)


def at_hour(hour, minute=0, second=0):
    return EPOCH + timedelta(hours=hour, minutes=minute, seconds=second)


class TestParseEvent:
    def test_retweet_attribution(self):
        ev = parse_event(record("bob", "RT @alice: Hello world!"))
        assert ev.author == "bob"
        assert ev.mentions == ["alice"]
        assert ev.retweet_of == "alice"

    def test_no_mentions(self):
        ev = parse_event(record("bob", "no mentions here"))
        assert ev.mentions == []
        assert ev.retweet_of is None

    def test_retweet_with_cc(self):
        ev = parse_event(record("bob", "RT @alice: Hello world! (cc @carol)"))
        assert ev.mentions == ["alice", "carol"]
        assert ev.retweet_of == "alice"

    def test_duplicate_tokens_kept(self):
        ev = parse_event(record("bob", "@alice hi again @alice"))
        assert ev.mentions == ["alice", "alice"]

    def test_self_mention_flagged_not_counted(self):
        ev = parse_event(record("bob", "@bob notes to self and @alice"))
        assert ev.mentions == ["alice"]
        assert ev.self_mentions == 1

    def test_handles_normalized(self):
        ev = parse_event(record("BoB", "@ALICE hi"))
        assert ev.author == "bob"
        assert ev.mentions == ["alice"]

    def test_preextracted_wins_over_text(self):
        ev = parse_event(record("bob", "@alice hi", mentions=["carol"], rt_of="carol"))
        assert ev.mentions == ["carol"]
        assert ev.retweet_of == "carol"

    def test_rt_attribution_joins_mentions(self):
        ev = parse_event(record("bob", "", mentions=["dave"], rt_of="alice"))
        assert ev.retweet_of == "alice"
        assert ev.mentions[0] == "alice"
        assert "dave" in ev.mentions

    def test_self_retweet_dropped(self):
        ev = parse_event(record("bob", "RT @bob: my own words"))
        assert ev.retweet_of is None

    def test_email_like_text_not_a_mention(self):
        ev = parse_event(record("bob", "mail me at bob@example.com"))
        assert ev.mentions == []

    def test_empty_author_rejected(self):
        with pytest.raises(ParseError):
            parse_event(record("", "hello"))

    def test_invalid_author_rejected(self):
        with pytest.raises(ParseError):
            parse_event(record("way-too-long-for-a-handle!", "hello"))

    def test_malformed_timestamp_rejected(self):
        with pytest.raises(ParseError):
            parse_event(json.dumps({"id": "e", "author": "bob",
                                    "ts": "not-a-time", "text": "x"}))

    def test_z_suffix_timestamp(self):
        ev = parse_event(json.dumps({"id": "e", "author": "bob",
                                     "ts": "2025-01-06T05:30:00Z", "text": "x"}))
        assert ev.timestamp == EPOCH + timedelta(hours=5, minutes=30)

    def test_urls_extracted_and_trimmed(self):
        ev = parse_event(record("bob", "see http://sho.rt/abc, and https://x.y/z."))
        assert ev.urls == ["http://sho.rt/abc", "https://x.y/z"]

    def test_preextracted_urls_win(self):
        ev = parse_event(record("bob", "see http://a.b/c", urls=["http://d.e/f"]))
        assert ev.urls == ["http://d.e/f"]

    def test_skip_and_count(self):
        lines = [
            record("bob", "@alice hi"),
            "not json at all",
            json.dumps({"id": "e", "author": "bob", "ts": "nope", "text": "x"}),
            record("carol", "@alice yo"),
        ]
        stats = IngestStats()
        events = list(read_events(lines, stats))
        assert len(events) == 2
        assert stats.records == 4
        assert stats.parse_errors == 2
        assert stats.skip_rate == 0.5


def test_normalize_handle_rules():
    assert normalize_handle("@Alice_1") == "alice_1"
    for bad in ("", "@", "has space", "x" * 16, "dash-ed"):
        with pytest.raises(ParseError):
            normalize_handle(bad)


class TestBucketize:
    def run(self, lines, **kw):
        stats = kw.pop("stats", IngestStats())
        return list(bucketize(read_events(lines, stats), EPOCH, stats, **kw)), stats

    def test_three_mentions_one_hour(self):
        lines = [record("b", "@alice hi", at_hour(0, 5)),
                 record("c", "@alice hi", at_hour(0, 30)),
                 record("d", "@alice hi", at_hour(0, 59))]
        buckets, _ = self.run(lines)
        assert len(buckets) == 1
        assert buckets[0].force["alice"] == 3

    def test_gap_hours_emitted_empty(self):
        lines = [record("b", "@alice hi", at_hour(0)),
                 record("c", "@alice hi", at_hour(2, 30))]
        buckets, _ = self.run(lines)
        assert [b.hour_index for b in buckets] == [0, 1, 2]
        assert buckets[1].force == {}
        assert buckets[2].force == {"alice": 1}

    def test_leading_empty_hours_from_epoch(self):
        buckets, _ = self.run([record("b", "@alice hi", at_hour(3))])
        assert [b.hour_index for b in buckets] == [0, 1, 2, 3]

    def test_duplicate_tokens_count_twice(self):
        buckets, _ = self.run([record("b", "@alice and @alice", at_hour(0))])
        assert buckets[0].force["alice"] == 2

    def test_retweet_force(self):
        buckets, _ = self.run([record("b", "RT @alice: hi", at_hour(0))])
        assert buckets[0].force["alice"] == 1
        assert buckets[0].retweet_force["alice"] == 1

    def test_pre_epoch_counted(self):
        lines = [record("b", "@alice hi", EPOCH - timedelta(hours=1)),
                 record("c", "@alice hi", at_hour(0))]
        buckets, stats = self.run(lines)
        assert stats.pre_epoch_events == 1
        assert buckets[0].force["alice"] == 1

    def test_late_event_counted(self):
        lines = [record("b", "@alice hi", at_hour(0)),
                 record("c", "@alice hi", at_hour(5)),
                 record("d", "@alice hi", at_hour(2))]
        buckets, stats = self.run(lines)
        assert stats.late_events == 1
        assert sum(b.total_force for b in buckets) == 2

    def test_out_of_order_within_window_ok(self):
        lines = [record("b", "@alice hi", at_hour(1)),
                 record("c", "@alice hi", at_hour(0, 59))]
        buckets, stats = self.run(lines)
        assert stats.late_events == 0
        assert buckets[0].force["alice"] == 1
        assert buckets[1].force["alice"] == 1

    def test_force_totals_match_token_scan(self):
        # independent oracle: raw '@' token scan minus self-mentions
        lines = [
            record("ann", "RT @bob: news (cc @cd)", at_hour(0, 1)),
            record("bob", "@ann @ann @bob hi", at_hour(0, 2)),
            record("cd", "plain text", at_hour(1, 0)),
            record("ann", "@bob one more", at_hour(1, 30)),
            record("dee", "@ann @bob @cd all", at_hour(2, 0)),
        ]
        expected = 0
        for line in lines:
            rec = json.loads(line)
            for tok in rec["text"].replace(":", " ").replace("(", " ").split():
                if tok.startswith("@") and tok[1:] != rec["author"]:
                    expected += 1
        buckets, _ = self.run(lines)
        assert sum(b.total_force for b in buckets) == expected

    def test_permutation_invariant_within_hour(self):
        rng = random.Random(7)
        lines = [record(f"u{i}", f"@t{i % 3} hello", at_hour(0, i % 60))
                 for i in range(20)]
        base, _ = self.run(list(lines))
        for _ in range(5):
            rng.shuffle(lines)
            shuffled, _ = self.run(list(lines))
            assert [(b.hour_index, b.force) for b in shuffled] \
                == [(b.hour_index, b.force) for b in base]

    def test_random_fixture_token_conservation(self):
        rng = random.Random(123)
        users = [f"u{i}" for i in range(10)]
        lines = []
        token_count = 0
        for i in range(300):
            author = rng.choice(users)
            n_mentions = rng.randint(0, 3)
            targets = [rng.choice(users) for _ in range(n_mentions)]
            token_count += sum(1 for t in targets if t != author)
            text = " ".join(f"@{t}" for t in targets) or "quiet"
            lines.append(record(author, text, at_hour(i // 20, i % 60)))
        buckets, _ = self.run(lines)
        assert sum(b.total_force for b in buckets) == token_count

    def test_every_retweet_is_also_a_mention(self):
        rng = random.Random(5)
        for _ in range(50):
            author = f"u{rng.randint(0, 5)}"
            target = f"u{rng.randint(0, 5)}"
            ev = parse_event(record(author, f"RT @{target}: hi"))
            if ev.retweet_of is not None:
                assert ev.retweet_of in ev.mentions


class TestLoadGraph:
    def write(self, tmp_path, text, name="edges.tsv"):
        p = tmp_path / name
        p.write_text(text, encoding="utf-8")
        return p

    def test_follower_count_is_in_degree(self, tmp_path):
        g = load_graph(self.write(tmp_path, "b\ta\nc\ta\n"))
        assert g.followers_of("a") == 2
        assert g.followers_of("b") == 0

    def test_duplicate_edge_single(self, tmp_path):
        stats = IngestStats()
        g = load_graph(self.write(tmp_path, "b\ta\nb\ta\n"), stats=stats)
        assert g.edge_count == 1
        assert stats.duplicate_edges == 1

    def test_self_loop_dropped(self, tmp_path):
        stats = IngestStats()
        g = load_graph(self.write(tmp_path, "a\ta\nb\ta\n"), stats=stats)
        assert g.edge_count == 1
        assert stats.self_loops_dropped == 1

    def test_count_override_wins(self, tmp_path):
        edges = self.write(tmp_path, "b\ta\n")
        counts = self.write(tmp_path, "a\t1000\n", "counts.tsv")
        g = load_graph(edges, counts)
        assert g.followers_of("a") == 1000
        assert g.followers_of("b") == 0

    def test_override_only_user_becomes_node(self, tmp_path):
        edges = self.write(tmp_path, "b\ta\n")
        counts = self.write(tmp_path, "zed\t7\n", "counts.tsv")
        g = load_graph(edges, counts)
        assert "zed" in g
        assert g.followers_of("zed") == 7

    def test_bad_lines_counted(self, tmp_path):
        stats = IngestStats()
        g = load_graph(self.write(tmp_path, "# comment\nb\ta\nnot a pair\nb\ta\tc\n"),
                       stats=stats)
        assert g.edge_count == 1
        assert stats.bad_graph_lines == 2

    def test_comments_and_blanks_skipped(self, tmp_path):
        g = load_graph(self.write(tmp_path, "# header\n\nb\ta\n"))
        assert g.edge_count == 1

    def test_users_sorted_and_indexed(self, tmp_path):
        g = load_graph(self.write(tmp_path, "c\tb\nb\ta\n"))
        assert g.users == sorted(g.users)
        assert all(g.index(u) == i for i, u in enumerate(g.users))

    def test_mean_followers(self):
        g = UserGraph.from_edges({("b", "a"), ("c", "a")})
        assert g.mean_followers() == pytest.approx(2 / 3)
