"""Baseline influence scorers on the follower graph and the retweet graph.

PageRank and TunkRank run on follower -> followee edges (a user endorses
whom they follow).  Influence/passivity runs on a retweet graph whose
edges exist only where a follow edge carries at least one retweet; edge
weight is the follower's retweet rate over the followee's authored
events.  Follower-count and followers/followees-ratio scorers are
zero-iteration baselines.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Optional

import numpy as np

from . import kernels
from .ingest import Event, UserGraph

DEFAULT_TOL = 1e-8
DEFAULT_MAX_ITER = 200
DEFAULT_DAMPING = 0.85
DEFAULT_RETWEET_PROB = 0.05


@dataclass
class ScoreVector:
    """Per-user scores with convergence metadata for one algorithm."""

    algorithm: str
    users: list[str]
    values: np.ndarray
    iterations: int = 0
    residual: float = 0.0
    converged: bool = True
    residual_history: Optional[np.ndarray] = None
    _idx: dict = field(init=False, repr=False)

    def __post_init__(self):
        self._idx = {u: i for i, u in enumerate(self.users)}

    def get(self, user: str, default: float = 0.0) -> float:
        i = self._idx.get(user)
        return float(self.values[i]) if i is not None else default

    def __getitem__(self, user: str) -> float:
        i = self._idx.get(user)
        if i is None:
            raise KeyError(user)
        return float(self.values[i])

    def __contains__(self, user: str) -> bool:
        return user in self._idx

    def items(self):
        for u in sorted(self.users):
            yield u, self.get(u)

    def total(self) -> float:
        return float(self.values.sum())

    def write_tsv(self, path) -> None:
        """user<TAB>score lines, lexicographic user order, 12 significant digits."""
        with open(path, "w", encoding="utf-8") as fh:
            for u, s in self.items():
                fh.write(f"{u}\t{s:.12g}\n")

    @classmethod
    def read_tsv(cls, path, algorithm: str = "") -> "ScoreVector":
        users: list[str] = []
        vals: list[float] = []
        with open(path, "r", encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                u, s = line.split("\t")
                users.append(u)
                vals.append(float(s))
        return cls(algorithm or "file", users, np.asarray(vals, dtype=np.float64))


def pagerank(
    graph: UserGraph,
    damping: float = DEFAULT_DAMPING,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    reverse: bool = False,
) -> ScoreVector:
    """Standard PageRank over follower -> followee edges.

    Dangling mass is redistributed uniformly; scores sum to 1.  ``reverse``
    flips edge orientation for comparison runs.
    """
    if graph.n == 0:
        raise ValueError("pagerank needs a non-empty graph")
    if not 0.0 < damping < 1.0:
        raise ValueError(f"damping must be in (0, 1), got {damping}")
    src = graph.edges[:, 0]
    dst = graph.edges[:, 1]
    if reverse:
        src, dst = dst, src
    out_deg = np.bincount(src, minlength=graph.n).astype(np.int64)
    scores, iters, residuals = kernels.pagerank_kernel(
        src.astype(np.int64), dst.astype(np.int64), out_deg, graph.n,
        float(damping), float(tol), int(max_iter),
    )
    resid = float(residuals[-1]) if len(residuals) else 0.0
    return ScoreVector(
        "pagerank", list(graph.users), scores,
        iterations=int(iters), residual=resid,
        converged=resid <= tol, residual_history=residuals,
    )


def tunkrank(
    graph: UserGraph,
    retweet_prob: float = DEFAULT_RETWEET_PROB,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> ScoreVector:
    """Fixed point of influence(u) = sum over followers f of
    (1 + retweet_prob * influence(f)) / followees(f), reported normalized
    to sum 1."""
    if graph.n == 0:
        raise ValueError("tunkrank needs a non-empty graph")
    if not 0.0 <= retweet_prob <= 1.0:
        raise ValueError(f"retweet_prob must be in [0, 1], got {retweet_prob}")
    src = graph.edges[:, 0].astype(np.int64)
    dst = graph.edges[:, 1].astype(np.int64)
    out_deg = np.bincount(src, minlength=graph.n).astype(np.int64)
    raw, iters, residuals = kernels.tunkrank_kernel(
        src, dst, out_deg, float(retweet_prob), graph.n, float(tol), int(max_iter)
    )
    total = raw.sum()
    scores = raw / total if total > 0 else raw
    resid = float(residuals[-1]) if len(residuals) else 0.0
    return ScoreVector(
        "tunkrank", list(graph.users), scores,
        iterations=int(iters), residual=resid,
        converged=resid <= tol, residual_history=residuals,
    )


@dataclass
class RetweetGraph:
    """Weighted retweet-rate edges restricted to existing follow edges.

    Edge (follower i -> followee j) with weight = retweets of j by i over
    events authored by j, clamped to [0, 1].
    """

    users: list[str]
    src: np.ndarray
    dst: np.ndarray
    weights: np.ndarray
    dropped_no_follow: int = 0

    @property
    def n(self) -> int:
        return len(self.users)

    @property
    def edge_count(self) -> int:
        return int(self.src.shape[0])


def build_retweet_graph(events: Iterable[Event], graph: UserGraph) -> RetweetGraph:
    """Derive the weighted retweet graph from retweet attributions.

    Pairs without a follow edge are dropped and counted; a followee with
    no authored events in the window yields no edge.
    """
    authored: Counter = Counter()
    rt_counts: Counter = Counter()
    for ev in events:
        authored[ev.author] += 1
        if ev.retweet_of is not None:
            rt_counts[(ev.author, ev.retweet_of)] += 1

    follow_pairs = {(int(a), int(b)) for a, b in graph.edges}
    incident: set[str] = set()
    kept: list[tuple[str, str, float]] = []
    dropped = 0
    for (i_user, j_user), cnt in sorted(rt_counts.items()):
        i = graph.index(i_user)
        j = graph.index(j_user)
        if i is None or j is None or (i, j) not in follow_pairs:
            dropped += 1
            continue
        opportunities = authored.get(j_user, 0)
        if opportunities == 0:
            continue
        weight = min(1.0, cnt / opportunities)
        kept.append((i_user, j_user, weight))
        incident.add(i_user)
        incident.add(j_user)

    users = sorted(incident)
    idx = {u: i for i, u in enumerate(users)}
    src = np.array([idx[a] for a, _, _ in kept], dtype=np.int64)
    dst = np.array([idx[b] for _, b, _ in kept], dtype=np.int64)
    weights = np.array([w for _, _, w in kept], dtype=np.float64)
    return RetweetGraph(users, src, dst, weights, dropped_no_follow=dropped)


def influence_passivity(
    rg: RetweetGraph,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> tuple[ScoreVector, ScoreVector]:
    """Dual iterative scores over the retweet graph.

    A followee's influence accumulates followers' passivity weighted by
    the per-edge acceptance share; a follower's passivity accumulates
    followees' influence weighted by the rejection share.  Both vectors
    are L1-normalized each round.
    """
    if rg.edge_count == 0:
        raise ValueError("retweet graph has no edges; influence/passivity undefined")
    n = rg.n
    acc_total = np.bincount(rg.dst, weights=rg.weights, minlength=n)
    rej_total = np.bincount(rg.dst, weights=1.0 - rg.weights, minlength=n)
    with np.errstate(divide="ignore", invalid="ignore"):
        f_e = np.where(acc_total[rg.dst] > 0, rg.weights / acc_total[rg.dst], 0.0)
        q_e = np.where(rej_total[rg.dst] > 0, (1.0 - rg.weights) / rej_total[rg.dst], 0.0)
    influence, passivity, iters, resid = kernels.ip_kernel(
        rg.src, rg.dst, f_e, q_e, n, float(tol), int(max_iter)
    )
    meta = dict(iterations=int(iters), residual=float(resid), converged=resid <= tol)
    return (
        ScoreVector("ip_influence", list(rg.users), influence, **meta),
        ScoreVector("ip_passivity", list(rg.users), passivity, **meta),
    )


def followers_score(graph: UserGraph) -> ScoreVector:
    """Raw follower counts as a zero-iteration popularity score."""
    return ScoreVector("followers", list(graph.users), graph.follower_count.astype(np.float64))


def ratio_score(graph: UserGraph) -> ScoreVector:
    """Followers/followees ratio; a user following nobody keeps a
    denominator of 1 so the score stays finite."""
    out_deg = np.maximum(graph.out_degree, 1)
    values = graph.follower_count.astype(np.float64) / out_deg
    return ScoreVector("ratio", list(graph.users), values)
