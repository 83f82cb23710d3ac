"""Click-correlation evaluation of influence scores.

Builds URL datasets from the event stream (a URL needs a click count and
at least 3 promoters with graph data), removes click outliers with IQR
fences, accumulates promoter scores per URL, corrects both clicks and
scores for audience (accumulated promoter followers), and reports Pearson
correlations with two-tailed significance.  Weekly coefficients are
averaged through the Fisher z-transform.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np
from scipy import stats as scipy_stats

from .dynamics import WEEK_HOURS, week_end_hour
from .ingest import Event, UserGraph, floor_to_hour

VELOCITY_FLAVORS = ("final_date", "on_week", "prior_week")


@dataclass(frozen=True)
class UrlRecord:
    """A promoted URL: click count, qualified promoters, audience reach."""

    url: str
    clicks: int
    promoters: tuple[str, ...]
    audience: int
    week_index: Optional[int] = None


@dataclass
class CorrelationReport:
    score: str
    pearson_r: float
    r_squared: float
    n: int
    p_value: float
    per_week: Optional[list[tuple[int, float, int]]] = None


def read_clicks(path) -> dict[str, int]:
    """Load a url<TAB>clicks table."""
    table: dict[str, int] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            url, clicks = line.split("\t")
            table[url] = int(clicks)
    return table


def build_url_datasets(
    events: Iterable[Event],
    clicks_table: Mapping[str, int],
    graph: UserGraph,
    epoch=None,
    week_hours: int = WEEK_HOURS,
    stats: Optional[dict] = None,
) -> tuple[list[UrlRecord], list[UrlRecord]]:
    """Build the global and the single-week URL datasets.

    The weekly dataset keeps only URLs whose every occurrence falls inside
    one week-sized span aligned to the stream epoch.  Both datasets
    require a click entry and at least 3 distinct promoters with graph
    data; audience is the promoters' accumulated follower count.
    """
    stats = stats if stats is not None else {}
    occurrences: dict[str, list[tuple[str, int]]] = {}
    for ev in events:
        if epoch is None:
            # same default as bucketize: first event, floored to the hour
            epoch = floor_to_hour(ev.timestamp)
        if not ev.urls:
            continue
        week = ev.hour_since(epoch) // week_hours
        for url in ev.urls:
            occurrences.setdefault(url, []).append((ev.author, week))

    global_records: list[UrlRecord] = []
    weekly_records: list[UrlRecord] = []
    for url in sorted(occurrences):
        if url not in clicks_table:
            stats["no_click_entry"] = stats.get("no_click_entry", 0) + 1
            continue
        occ = occurrences[url]
        promoters = tuple(sorted({a for a, _ in occ if a in graph}))
        if len(promoters) < 3:
            stats["too_few_promoters"] = stats.get("too_few_promoters", 0) + 1
            continue
        audience = int(sum(graph.followers_of(u) for u in promoters))
        clicks = int(clicks_table[url])
        global_records.append(UrlRecord(url, clicks, promoters, audience, None))
        weeks = {w for _, w in occ}
        if len(weeks) == 1:
            weekly_records.append(UrlRecord(url, clicks, promoters, audience, weeks.pop()))
        else:
            stats["multi_week"] = stats.get("multi_week", 0) + 1
    return global_records, weekly_records


def _quartiles(values: np.ndarray, rule: str) -> tuple[float, float]:
    if rule == "linear":
        q1, q3 = np.percentile(values, [25, 75], method="linear")
        return float(q1), float(q3)
    if rule == "tukey":
        # Hinges: medians of the lower/upper halves, both including the
        # overall median position when n is odd.
        s = np.sort(values)
        n = s.size
        half = (n + 1) // 2
        return float(np.median(s[:half])), float(np.median(s[n - half:]))
    raise ValueError(f"unknown quartile rule: {rule}")


def iqr_filter(
    records: Sequence[UrlRecord],
    k: float = 1.5,
    per_week: bool = False,
    rule: str = "linear",
    stats: Optional[dict] = None,
) -> list[UrlRecord]:
    """Drop records whose clicks fall outside [Q1 - k*IQR, Q3 + k*IQR].

    With ``per_week`` the fences are computed independently per week.
    Groups with fewer than 4 records pass through unfiltered (flagged in
    ``stats``).
    """
    if k < 0:
        raise ValueError(f"k must be >= 0, got {k}")
    stats = stats if stats is not None else {}

    def filter_group(group: Sequence[UrlRecord]) -> list[UrlRecord]:
        if len(group) < 4:
            stats["groups_unfiltered"] = stats.get("groups_unfiltered", 0) + 1
            return list(group)
        clicks = np.array([r.clicks for r in group], dtype=np.float64)
        q1, q3 = _quartiles(clicks, rule)
        iqr = q3 - q1
        lo, hi = q1 - k * iqr, q3 + k * iqr
        kept = [r for r in group if lo <= r.clicks <= hi]
        stats["dropped"] = stats.get("dropped", 0) + (len(group) - len(kept))
        return kept

    if not per_week:
        return filter_group(records)
    by_week: dict[int, list[UrlRecord]] = {}
    for r in records:
        if r.week_index is None:
            raise ValueError(f"record {r.url} has no week index for per-week filtering")
        by_week.setdefault(r.week_index, []).append(r)
    out: list[UrlRecord] = []
    for week in sorted(by_week):
        out.extend(filter_group(by_week[week]))
    return out


def accumulate_scores(
    record: UrlRecord,
    source,
    flavor: str = "final_date",
    week_hours: int = WEEK_HOURS,
) -> float:
    """Sum the promoters' scores for one URL.

    ``source`` is either a static mapping with ``.get`` (centrality
    scores; untracked users contribute 0) or an hour-indexed velocity
    source with ``.at``/``.final_hour``, in which case ``flavor`` picks
    the lookup boundary: the stream's final checkpoint, the record's week
    end, or the prior week's end.
    """
    if flavor not in VELOCITY_FLAVORS:
        raise ValueError(f"flavor must be one of {VELOCITY_FLAVORS}")
    if hasattr(source, "at"):
        if flavor == "final_date":
            hour = source.final_hour
        else:
            if record.week_index is None:
                raise ValueError(f"record {record.url} has no week index for flavor {flavor}")
            week = record.week_index if flavor == "on_week" else record.week_index - 1
            hour = week_end_hour(week, week_hours)
        return float(sum(source.at(u, hour) for u in record.promoters))
    return float(sum(source.get(u, 0.0) for u in record.promoters))


def audience_correct(record: UrlRecord, accumulated_score: float, clicks: Optional[int] = None
                     ) -> tuple[float, float]:
    """(score/audience, clicks/audience): influence share vs. the
    probability that an audience member visits."""
    if record.audience <= 0:
        raise ValueError(f"record {record.url} has zero audience; cannot correct")
    c = record.clicks if clicks is None else clicks
    return accumulated_score / record.audience, c / record.audience


def _p_from_r(r: float, n: int) -> float:
    if n <= 2:
        raise ValueError("significance needs n > 2")
    denom = 1.0 - r * r
    if denom <= 0.0:
        return 0.0
    t = abs(r) * math.sqrt((n - 2) / denom)
    return float(2.0 * scipy_stats.t.sf(t, n - 2))


def pearson(xs, ys) -> tuple[float, float, float]:
    """Product-moment correlation with two-tailed Student-t significance.

    Returns (r, r_squared, p_value).  Requires n >= 3 and nonzero
    variance in both series.
    """
    x = np.asarray(xs, dtype=np.float64)
    y = np.asarray(ys, dtype=np.float64)
    if x.size != y.size:
        raise ValueError("series lengths differ")
    n = x.size
    if n < 3:
        raise ValueError(f"pearson needs at least 3 points, got {n}")
    dx = x - x.mean()
    dy = y - y.mean()
    sxx = float(np.dot(dx, dx))
    syy = float(np.dot(dy, dy))
    if sxx <= 0.0 or syy <= 0.0:
        raise ValueError("zero variance; correlation undefined")
    r = float(np.dot(dx, dy)) / math.sqrt(sxx * syy)
    r = max(-1.0, min(1.0, r))
    return r, r * r, _p_from_r(r, n)


def average_weekly_r(per_week: Sequence[tuple[float, int]]) -> tuple[float, float, int]:
    """Average weekly coefficients via the Fisher z-transform.

    Each (r, n) pair needs n >= 3 and |r| < 1 (z diverges otherwise; the
    offending week is named).  Significance is computed from the averaged
    coefficient at the rounded mean sample size.  Returns
    (mean_r, p_value, n_effective).
    """
    if not per_week:
        raise ValueError("no weekly coefficients to average")
    for i, (r, n) in enumerate(per_week):
        if n < 3:
            raise ValueError(f"week {i} has n={n} < 3")
        if abs(r) >= 1.0:
            raise ValueError(f"week {i} has |r|={abs(r)}; z-transform diverges")
    n_eff = round(sum(n for _, n in per_week) / len(per_week))
    first = per_week[0][0]
    if all(r == first for r, _ in per_week):
        # Exact fixed point of the transform; skip the atanh/tanh round
        # trip, which is not bit-exact.
        return first, _p_from_r(first, n_eff), n_eff
    mean_z = sum(math.atanh(r) for r, _ in per_week) / len(per_week)
    mean_r = math.tanh(mean_z)
    return mean_r, _p_from_r(mean_r, n_eff), n_eff


def correlate(name: str, xs, ys, per_week=None) -> CorrelationReport:
    r, r2, p = pearson(xs, ys)
    return CorrelationReport(name, r, r2, len(xs), p, per_week)


def audience_confound_report(records: Sequence[UrlRecord], source, name: str) -> CorrelationReport:
    """Correlate audience against one accumulated score (raw, uncorrected)."""
    xs = [float(r.audience) for r in records]
    ys = [accumulate_scores(r, source) for r in records]
    return correlate(name, xs, ys)


@dataclass
class EvalSection:
    """One report table: a named analysis over a list of score rows."""

    section: str
    rows: list[CorrelationReport]


def run_full_evaluation(
    global_records: Sequence[UrlRecord],
    weekly_records: Sequence[UrlRecord],
    static_sources: Mapping[str, object],
    velocity_source,
    iqr_k: float = 1.5,
    quartile_rule: str = "linear",
    week_hours: int = WEEK_HOURS,
    stats: Optional[dict] = None,
) -> list[EvalSection]:
    """Produce the four report sections.

    1. uncorrected_global: accumulated score vs clicks.
    2. audience_confound: audience vs accumulated score.
    3. corrected_global: score/audience vs clicks/audience.
    4. corrected_weekly: per-week corrected correlations averaged via
       Fisher z, with the three velocity lookup flavors.

    ``static_sources`` maps score names to mappings; ``velocity_source``
    is the hour-indexed velocity lookup.  The followers score appears
    only uncorrected (corrected it is identically 1).
    """
    stats = stats if stats is not None else {}
    g_stats: dict = {}
    filtered_global = iqr_filter(global_records, iqr_k, rule=quartile_rule, stats=g_stats)
    stats["global_dropped"] = g_stats.get("dropped", 0)

    def accumulated(records, name, flavor="final_date"):
        if name == "velocity":
            return [accumulate_scores(r, velocity_source, flavor, week_hours) for r in records]
        return [accumulate_scores(r, static_sources[name]) for r in records]

    score_names = [n for n in static_sources] + ["velocity"]

    uncorrected = EvalSection("uncorrected_global", [])
    clicks = [float(r.clicks) for r in filtered_global]
    followers_xs = [float(r.audience) for r in filtered_global]
    uncorrected.rows.append(correlate("followers", followers_xs, clicks))
    for name in score_names:
        uncorrected.rows.append(correlate(name, accumulated(filtered_global, name), clicks))

    confound = EvalSection("audience_confound", [])
    for name in score_names:
        confound.rows.append(correlate(name, followers_xs, accumulated(filtered_global, name)))

    corrected = EvalSection("corrected_global", [])
    correctable = [r for r in filtered_global if r.audience > 0]
    stats["zero_audience_excluded"] = len(filtered_global) - len(correctable)
    corr_clicks = [r.clicks / r.audience for r in correctable]
    for name in score_names:
        xs = [s / r.audience for s, r in zip(accumulated(correctable, name), correctable)]
        corrected.rows.append(correlate(name, xs, corr_clicks))

    weekly = EvalSection("corrected_weekly", [])
    w_stats: dict = {}
    filtered_weekly = iqr_filter(weekly_records, iqr_k, per_week=True, rule=quartile_rule,
                                 stats=w_stats)
    stats["weekly_dropped"] = w_stats.get("dropped", 0)
    by_week: dict[int, list[UrlRecord]] = {}
    for r in filtered_weekly:
        if r.audience > 0:
            by_week.setdefault(r.week_index, []).append(r)

    last_hour = velocity_source.final_hour
    usable_weeks = [w for w in sorted(by_week)
                    if week_end_hour(w, week_hours) <= last_hour]
    stats["weekly_weeks_skipped"] = len(by_week) - len(usable_weeks)

    weekly_specs = [(n, "final_date") for n in score_names if n != "velocity"]
    weekly_specs += [(f"velocity_{fl}", fl) for fl in VELOCITY_FLAVORS]
    for label, flavor in weekly_specs:
        name = "velocity" if label.startswith("velocity_") else label
        per_week: list[tuple[int, float, int]] = []
        for w in usable_weeks:
            recs = by_week[w]
            if len(recs) < 3:
                continue
            ys = [r.clicks / r.audience for r in recs]
            xs = [s / r.audience for s, r in zip(accumulated(recs, name, flavor), recs)]
            try:
                r_w, _, _ = pearson(xs, ys)
            except ValueError:
                stats["weekly_degenerate_weeks"] = stats.get("weekly_degenerate_weeks", 0) + 1
                continue
            per_week.append((w, r_w, len(recs)))
        if not per_week:
            stats["weekly_rows_skipped"] = stats.get("weekly_rows_skipped", 0) + 1
            continue
        mean_r, p, n_eff = average_weekly_r([(r_w, n_w) for _, r_w, n_w in per_week])
        weekly.rows.append(CorrelationReport(label, mean_r, mean_r * mean_r, n_eff, p, per_week))

    return [uncorrected, confound, corrected, weekly]


def write_report_tsv(path, sections: Sequence[EvalSection]) -> None:
    """Machine-readable rows: section, score, r, r^2, p, n."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("section\tscore\tr\tr_squared\tp_value\tn\n")
        for sec in sections:
            for row in sec.rows:
                fh.write(
                    f"{sec.section}\t{row.score}\t{row.pearson_r:.12g}\t"
                    f"{row.r_squared:.12g}\t{row.p_value:.12g}\t{row.n}\n"
                )


def write_weekly_detail_tsv(path, sections: Sequence[EvalSection]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("score\tweek\tr\tn\n")
        for sec in sections:
            for row in sec.rows:
                if not row.per_week:
                    continue
                for week, r_w, n_w in row.per_week:
                    fh.write(f"{row.score}\t{week}\t{r_w:.12g}\t{n_w}\n")


def write_report_text(path, sections: Sequence[EvalSection]) -> None:
    """Human-readable tables mirroring the four analyses."""
    titles = {
        "uncorrected_global": "Scores vs clicks, global dataset (uncorrected)",
        "audience_confound": "Audience vs scores, global dataset (confound check)",
        "corrected_global": "Scores vs clicks, global dataset (audience-corrected)",
        "corrected_weekly": "Scores vs clicks, weekly dataset (audience-corrected, Fisher-averaged)",
    }
    with open(path, "w", encoding="utf-8") as fh:
        for sec in sections:
            fh.write(f"{titles.get(sec.section, sec.section)}\n")
            fh.write(f"{'score':<24}{'r':>12}{'r^2':>12}{'p':>14}{'n':>8}\n")
            for row in sec.rows:
                fh.write(
                    f"{row.score:<24}{row.pearson_r:>12.5f}{row.r_squared:>12.5f}"
                    f"{row.p_value:>14.3e}{row.n:>8}\n"
                )
            fh.write("\n")
