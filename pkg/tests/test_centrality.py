"""Centrality scorers checked against independent dense iterations."""

import itertools
import json
from datetime import datetime, timedelta, timezone

import numpy as np
import pytest

from veloscore.centrality import (
    RetweetGraph,
    build_retweet_graph,
    followers_score,
    influence_passivity,
    pagerank,
    ratio_score,
    tunkrank,
)
from veloscore.ingest import UserGraph, parse_event

EPOCH = datetime(2025, 1, 6, tzinfo=timezone.utc)


# --- independent dense oracles -------------------------------------------

def dense_pagerank(adj, damping, tol, max_iter):
    """adj[i, j] = 1 when i follows j; straight matrix power iteration."""
    n = adj.shape[0]
    out_deg = adj.sum(axis=1)
    m = np.zeros((n, n))
    for i in range(n):
        if out_deg[i] > 0:
            m[:, i] = adj[i] / out_deg[i]
        else:
            m[:, i] = 1.0 / n
    r = np.full(n, 1.0 / n)
    for _ in range(max_iter):
        new = (1.0 - damping) / n + damping * (m @ r)
        resid = np.abs(new - r).sum()
        r = new
        if resid <= tol:
            break
    return r


def dense_tunkrank(adj, p, tol, max_iter):
    n = adj.shape[0]
    out_deg = adj.sum(axis=1)
    score = np.zeros(n)
    for _ in range(max_iter):
        new = np.zeros(n)
        for u in range(n):
            for f in range(n):
                if adj[f, u]:
                    new[u] += (1.0 + p * score[f]) / out_deg[f]
        resid = np.abs(new - score).sum()
        score = new
        if resid <= tol:
            break
    total = score.sum()
    return score / total if total > 0 else score


def dense_ip(weight, mask, tol, max_iter):
    """weight[i, j] on follower i -> followee j edges (mask marks edges)."""
    n = mask.shape[0]
    acc_total = (weight * mask).sum(axis=0)
    rej_total = ((1.0 - weight) * mask).sum(axis=0)
    f_mat = np.zeros((n, n))
    q_mat = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            if mask[i, j]:
                if acc_total[j] > 0:
                    f_mat[i, j] = weight[i, j] / acc_total[j]
                if rej_total[j] > 0:
                    q_mat[i, j] = (1.0 - weight[i, j]) / rej_total[j]
    influence = np.full(n, 1.0 / n)
    passivity = np.full(n, 1.0 / n)
    for _ in range(max_iter):
        inf_new = f_mat.T @ passivity
        total = inf_new.sum()
        inf_new = inf_new / total if total > 0 else influence.copy()
        pas_new = q_mat @ inf_new
        total = pas_new.sum()
        if total > 0:
            pas_new = pas_new / total
        resid = np.abs(inf_new - influence).sum() + np.abs(pas_new - passivity).sum()
        influence, passivity = inf_new, pas_new
        if resid <= tol:
            break
    return influence, passivity


def graph_from_adj(adj):
    n = adj.shape[0]
    names = [f"u{i}" for i in range(n)]
    pairs = {(names[i], names[j]) for i in range(n) for j in range(n) if adj[i, j]}
    return UserGraph.from_edges(pairs, overrides={u: 0 for u in names})


def rg_from_matrix(weight, mask):
    n = mask.shape[0]
    names = [f"u{i}" for i in range(n)]
    src, dst, w = [], [], []
    for i in range(n):
        for j in range(n):
            if mask[i, j]:
                src.append(i)
                dst.append(j)
                w.append(weight[i, j])
    return RetweetGraph(names, np.array(src, dtype=np.int64),
                        np.array(dst, dtype=np.int64), np.array(w))


class TestPagerank:
    def test_mutual_pair_symmetric(self):
        g = UserGraph.from_edges({("a", "b"), ("b", "a")})
        sv = pagerank(g)
        assert sv.get("a") == pytest.approx(0.5, abs=1e-9)
        assert sv.get("b") == pytest.approx(0.5, abs=1e-9)

    def test_single_isolated_node(self):
        g = UserGraph.from_edges(set(), overrides={"solo": 0})
        sv = pagerank(g)
        assert sv.get("solo") == pytest.approx(1.0, abs=1e-12)

    def test_star_matches_dense_oracle(self):
        n = 8
        adj = np.zeros((n, n), dtype=int)
        adj[1:, 0] = 1  # everyone follows the hub
        g = graph_from_adj(adj)
        sv = pagerank(g, damping=0.85, tol=0.0, max_iter=50)
        expected = dense_pagerank(adj, 0.85, 0.0, 50)
        got = np.array([sv.get(f"u{i}") for i in range(n)])
        assert np.abs(got - expected).max() < 1e-12

    def test_sums_to_one_every_iteration(self):
        g = UserGraph.from_edges({("a", "b"), ("b", "c"), ("c", "a"), ("a", "c")})
        for iters in range(1, 12):
            sv = pagerank(g, max_iter=iters, tol=0.0)
            assert sv.total() == pytest.approx(1.0, abs=1e-9)

    def test_residual_monotone_after_burn_in(self):
        rng = np.random.default_rng(3)
        adj = (rng.random((12, 12)) < 0.25).astype(int)
        np.fill_diagonal(adj, 0)
        sv = pagerank(graph_from_adj(adj), tol=0.0, max_iter=60)
        hist = sv.residual_history
        assert all(hist[i + 1] <= hist[i] + 1e-15 for i in range(2, len(hist) - 1))

    def test_exhaustive_three_node_graphs(self):
        slots = [(i, j) for i in range(3) for j in range(3) if i != j]
        for bits in itertools.product([0, 1], repeat=6):
            adj = np.zeros((3, 3), dtype=int)
            for (i, j), b in zip(slots, bits):
                adj[i, j] = b
            sv = pagerank(graph_from_adj(adj), tol=1e-12, max_iter=500)
            expected = dense_pagerank(adj, 0.85, 1e-12, 500)
            got = np.array([sv.get(f"u{i}") for i in range(3)])
            assert np.abs(got - expected).max() < 1e-6
            assert abs(sv.total() - 1.0) < 1e-9

    def test_empty_graph_rejected(self):
        with pytest.raises(ValueError):
            pagerank(UserGraph.from_edges(set()))

    def test_damping_validated(self):
        g = UserGraph.from_edges({("a", "b")})
        with pytest.raises(ValueError):
            pagerank(g, damping=1.5)

    def test_permutation_equivariant(self):
        rng = np.random.default_rng(8)
        adj = (rng.random((7, 7)) < 0.3).astype(int)
        np.fill_diagonal(adj, 0)
        names = [f"u{i}" for i in range(7)]
        renamed = {u: f"z{6 - i}" for i, u in enumerate(names)}
        g1 = graph_from_adj(adj)
        pairs2 = {(renamed[a], renamed[b])
                  for a, b in ((names[i], names[j]) for i in range(7) for j in range(7)
                               if adj[i, j])}
        g2 = UserGraph.from_edges(pairs2, overrides={renamed[u]: 0 for u in names})
        sv1 = pagerank(g1)
        sv2 = pagerank(g2)
        for u in names:
            assert sv2.get(renamed[u]) == pytest.approx(sv1.get(u), abs=1e-12)


class TestTunkrank:
    def test_two_node_chain_p_zero(self):
        g = UserGraph.from_edges({("b", "a")})
        sv = tunkrank(g, retweet_prob=0.0)
        assert sv.get("a") == pytest.approx(1.0)
        assert sv.get("b") == 0.0

    def test_no_followers_floor(self):
        g = UserGraph.from_edges({("b", "a"), ("c", "a")})
        sv = tunkrank(g)
        assert sv.get("b") == 0.0
        assert sv.get("c") == 0.0

    def test_five_node_fixture_matches_dense(self):
        adj = np.array([
            [0, 1, 1, 0, 0],
            [0, 0, 1, 1, 0],
            [1, 0, 0, 1, 1],
            [0, 0, 0, 0, 1],
            [1, 0, 0, 0, 0],
        ])
        sv = tunkrank(graph_from_adj(adj), retweet_prob=0.05, tol=0.0, max_iter=1000)
        expected = dense_tunkrank(adj, 0.05, 0.0, 1000)
        got = np.array([sv.get(f"u{i}") for i in range(5)])
        assert np.abs(got - expected).max() < 1e-9

    def test_retweet_prob_validated(self):
        g = UserGraph.from_edges({("a", "b")})
        with pytest.raises(ValueError):
            tunkrank(g, retweet_prob=1.5)


class TestInfluencePassivity:
    def test_single_edge_total_acceptance(self):
        rg = rg_from_matrix(np.array([[0.0, 1.0], [0.0, 0.0]]),
                            np.array([[0, 1], [0, 0]]))
        inf, pas = influence_passivity(rg)
        assert inf.get("u1") == pytest.approx(1.0)
        assert inf.get("u0") == 0.0
        assert pas.get("u0") == 0.0
        assert pas.get("u1") == 0.0

    def test_symmetric_cycle_equal_scores(self):
        w = np.array([[0.0, 0.4], [0.4, 0.0]])
        mask = np.array([[0, 1], [1, 0]])
        inf, pas = influence_passivity(rg_from_matrix(w, mask))
        assert inf.get("u0") == pytest.approx(inf.get("u1"))
        assert pas.get("u0") == pytest.approx(pas.get("u1"))

    def test_four_node_fixture_matches_dense_brute_force(self):
        mask = np.array([
            [0, 1, 1, 0],
            [0, 0, 1, 1],
            [1, 0, 0, 1],
            [0, 1, 0, 0],
        ])
        w = np.array([
            [0.0, 0.2, 0.5, 0.0],
            [0.0, 0.0, 0.9, 0.3],
            [0.6, 0.0, 0.0, 0.7],
            [0.0, 0.1, 0.0, 0.0],
        ])
        inf, pas = influence_passivity(rg_from_matrix(w, mask), tol=0.0, max_iter=10000)
        e_inf, e_pas = dense_ip(w, mask, 0.0, 10000)
        for i in range(4):
            assert inf.get(f"u{i}") == pytest.approx(e_inf[i], abs=1e-9)
            assert pas.get(f"u{i}") == pytest.approx(e_pas[i], abs=1e-9)

    def test_empty_retweet_graph_rejected(self):
        rg = RetweetGraph([], np.empty(0, dtype=np.int64),
                          np.empty(0, dtype=np.int64), np.empty(0))
        with pytest.raises(ValueError):
            influence_passivity(rg)


def make_event(author, text, hour=0):
    return parse_event(json.dumps({
        "id": "e", "author": author,
        "ts": (EPOCH + timedelta(hours=hour)).isoformat(), "text": text,
    }))


class TestBuildRetweetGraph:
    def test_rate_over_authored_events(self):
        g = UserGraph.from_edges({("i", "j")})
        events = [make_event("i", "RT @j: post") for _ in range(3)]
        events += [make_event("j", f"post {k}") for k in range(10)]
        rg = build_retweet_graph(events, g)
        assert rg.edge_count == 1
        assert rg.weights[0] == pytest.approx(0.3)

    def test_non_follower_dropped(self):
        g = UserGraph.from_edges({("x", "j")})
        events = [make_event("i", "RT @j: post"), make_event("j", "post")]
        rg = build_retweet_graph(events, g)
        assert rg.edge_count == 0
        assert rg.dropped_no_follow == 1

    def test_no_authored_events_no_edge(self):
        g = UserGraph.from_edges({("i", "j")})
        rg = build_retweet_graph([make_event("i", "RT @j: old post")], g)
        assert rg.edge_count == 0

    def test_weight_clamped_to_one(self):
        g = UserGraph.from_edges({("i", "j")})
        events = [make_event("i", "RT @j: post") for _ in range(5)]
        events.append(make_event("j", "only post"))
        rg = build_retweet_graph(events, g)
        assert rg.weights[0] == 1.0


class TestZeroIterationScorers:
    def test_followers_scorer_is_in_degree(self):
        g = UserGraph.from_edges({("b", "a"), ("c", "a"), ("a", "b")})
        sv = followers_score(g)
        assert sv.get("a") == 2.0
        assert sv.get("b") == 1.0
        assert sv.get("c") == 0.0

    def test_ratio_scorer(self):
        pairs = {(f"f{i}", "u") for i in range(8)} | {("u", f"g{i}") for i in range(4)}
        sv = ratio_score(UserGraph.from_edges(pairs))
        assert sv.get("u") == pytest.approx(2.0)

    def test_ratio_no_followees_stays_finite(self):
        g = UserGraph.from_edges({("b", "a")})
        sv = ratio_score(g)
        assert sv.get("a") == 1.0  # 1 follower / max(0 followees, 1)


def test_spam_cluster_gains_pagerank_not_tunkrank():
    # legit community: heavy attention to a hub; spam: mutual-follow ring
    pairs = set()
    for i in range(30):
        pairs.add((f"u{i:02d}", "hub"))
        pairs.add((f"u{i:02d}", f"u{(i + 1) % 30:02d}"))
    spam = [f"spam{i}" for i in range(5)]
    for a in spam:
        for b in spam:
            if a != b:
                pairs.add((a, b))
    g = UserGraph.from_edges(pairs)
    pr = pagerank(g)
    tr = tunkrank(g)
    pr_spam = sum(pr.get(s) for s in spam)
    tr_spam = sum(tr.get(s) for s in spam)
    assert pr_spam > tr_spam


def test_score_vector_tsv_roundtrip(tmp_path):
    g = UserGraph.from_edges({("b", "a"), ("c", "b")})
    sv = pagerank(g)
    path = tmp_path / "pagerank.tsv"
    sv.write_tsv(path)
    lines = path.read_text().splitlines()
    assert [ln.split("\t")[0] for ln in lines] == sorted(g.users)
    back = type(sv).read_tsv(path, "pagerank")
    for u in g.users:
        assert back.get(u) == pytest.approx(sv.get(u), rel=1e-11)
