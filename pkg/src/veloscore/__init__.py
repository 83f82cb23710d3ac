"""Mention-velocity influence scoring for microblog event streams.

Models per-user influence as the velocity of a damped body: mentions are
applied force, follower count is mass, and a constant damping term decays
velocity in quiet hours.  Ships with baseline centrality scorers
(PageRank, TunkRank, influence/passivity), a click-correlation evaluation
pipeline, and a deterministic synthetic data generator.
"""

__version__ = "0.1.0"

from .ingest import Event, HourBucket, IngestStats, UserGraph, bucketize, load_graph, parse_event
from .dynamics import (
    KineticsConfig,
    KineticsEngine,
    TrendingEntry,
    VelocityHistory,
    estimate_zeta,
    rank_trending,
    replay,
)
from .centrality import (
    RetweetGraph,
    ScoreVector,
    build_retweet_graph,
    followers_score,
    influence_passivity,
    pagerank,
    ratio_score,
    tunkrank,
)
from .evaluation import (
    CorrelationReport,
    UrlRecord,
    accumulate_scores,
    audience_correct,
    audience_confound_report,
    average_weekly_r,
    build_url_datasets,
    iqr_filter,
    pearson,
)
from .synth import Burst, SynthConfig, generate

__all__ = [
    "Event",
    "HourBucket",
    "IngestStats",
    "UserGraph",
    "bucketize",
    "load_graph",
    "parse_event",
    "KineticsConfig",
    "KineticsEngine",
    "TrendingEntry",
    "VelocityHistory",
    "estimate_zeta",
    "rank_trending",
    "replay",
    "RetweetGraph",
    "ScoreVector",
    "build_retweet_graph",
    "followers_score",
    "influence_passivity",
    "pagerank",
    "ratio_score",
    "tunkrank",
    "CorrelationReport",
    "UrlRecord",
    "accumulate_scores",
    "audience_correct",
    "audience_confound_report",
    "average_weekly_r",
    "build_url_datasets",
    "iqr_filter",
    "pearson",
    "Burst",
    "SynthConfig",
    "generate",
]
