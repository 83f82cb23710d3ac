"""Command-line pipeline: synth, score, trend, centrality, eval.

Every command is deterministic given identical inputs and flags; outputs
land under --out with fixed filenames, alongside the resolved run
configuration.  Exit codes: 0 success, 1 usage/config error, 2 data
error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import centrality as centrality_mod
from . import dynamics, evaluation, synth
from .centrality import ScoreVector
from .dynamics import KineticsConfig, week_end_hour
from .ingest import IngestStats, bucketize, load_graph, parse_timestamp, read_events_file

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2

SNAPSHOT_FILE = "snapshots.tsv"
FINAL_VELOCITY_FILE = "velocity_final.tsv"
TRENDING_FILE = "trending.tsv"
REPORT_TSV = "report.tsv"
REPORT_TXT = "report.txt"
REPORT_WEEKLY = "report_weekly.tsv"
RUN_CONFIG_TEMPLATE = "run_config_{}.txt"

CENTRALITY_FILES = {
    "pagerank": "pagerank.tsv",
    "tunkrank": "tunkrank.tsv",
    "ip_influence": "ip_influence.tsv",
    "ip_passivity": "ip_passivity.tsv",
    "followers": "followers.tsv",
    "ratio": "ratio.tsv",
}


class CliError(Exception):
    """Usage or configuration problem (exit 1)."""


class DataError(Exception):
    """Bad or insufficient data (exit 2)."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse defaults to exit code 2
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _require_file(path: str, what: str) -> Path:
    p = Path(path)
    if not p.is_file():
        raise CliError(f"{what} not readable: {p}")
    return p


def _require_artifact(out_dir: Path, filename: str, producer: str) -> Path:
    p = out_dir / filename
    if not p.is_file():
        raise CliError(f"missing {p}; run `veloscore {producer}` first")
    return p


def load_config_file(path) -> dict[str, str]:
    """Flat key = value defaults; command-line flags win over these."""
    out: dict[str, str] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise CliError(f"config line {lineno} is not key = value: {line!r}")
            k, v = line.split("=", 1)
            out[k.strip().replace("-", "_")] = v.strip()
    return out


def _write_run_config(out_dir: Path, args: argparse.Namespace, extra: dict) -> None:
    skip = {"func", "config"}
    resolved = {k: v for k, v in vars(args).items() if k not in skip}
    resolved.update(extra)
    with open(out_dir / RUN_CONFIG_TEMPLATE.format(args.command), "w",
              encoding="utf-8") as fh:
        for k in sorted(resolved):
            fh.write(f"{k} = {resolved[k]}\n")


def _parse_epoch(value):
    if not value:
        return None
    try:
        return parse_timestamp(value)
    except Exception as exc:
        raise CliError(f"bad --epoch value: {exc}") from exc


def _load_stream(args, stats: IngestStats):
    events_path = _require_file(args.events, "event stream")
    epoch = _parse_epoch(args.epoch)
    buckets = list(bucketize(read_events_file(events_path, stats), epoch, stats))
    return buckets


def _check_ceiling(stats: IngestStats, ceiling: float) -> None:
    if stats.records and stats.skip_rate > ceiling:
        raise DataError(
            f"skipped {stats.skipped}/{stats.records} records "
            f"({stats.skip_rate:.2%}) exceeds ceiling {ceiling:.2%}"
        )


def cmd_synth(args) -> int:
    bursts = []
    for raw in args.burst or []:
        try:
            user, start, end, rate = raw.split(":")
            bursts.append(synth.Burst(user, int(start), int(end), float(rate)))
        except ValueError as exc:
            raise CliError(f"bad --burst {raw!r} (want user:start:end:rate): {exc}") from exc
    try:
        cfg = synth.SynthConfig(
            seed=args.seed, users=args.users, hours=args.hours,
            celebrity_fraction=args.celebrity_fraction,
            base_mention_rate=args.base_mention_rate,
            bursts=tuple(bursts), graph_model=args.graph_model,
            follows_per_user=args.follows_per_user,
            spam_cluster_size=args.spam_cluster_size,
            url_count=args.urls, signal=args.signal,
            base_click_prob=args.base_click_prob,
            click_noise=args.click_noise, mode=args.mode,
        )
    except ValueError as exc:
        raise CliError(str(exc)) from exc
    out_dir = Path(args.out)
    manifest = synth.generate(cfg, out_dir)
    _write_run_config(out_dir, args, {})
    print(f"generated {manifest['totals']['events']} events, "
          f"{len(manifest['users'])} users, {len(manifest['urls'])} urls -> {out_dir}")
    return EXIT_OK


def cmd_score(args) -> int:
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    stats = IngestStats()
    buckets = _load_stream(args, stats)
    _check_ceiling(stats, args.error_ceiling)
    edges_path = _require_file(args.edges, "edge list")
    counts_path = _require_file(args.counts, "follower-count file") if args.counts else None
    graph = load_graph(edges_path, counts_path, stats)

    if args.zeta == "auto":
        if not buckets:
            zeta = 0.0
        else:
            try:
                zeta = dynamics.estimate_zeta(buckets, graph)
            except ValueError as exc:
                raise DataError(str(exc)) from exc
    else:
        try:
            zeta = float(args.zeta)
        except ValueError as exc:
            raise CliError(f"bad --zeta value {args.zeta!r}") from exc
    try:
        cfg = KineticsConfig(zeta=zeta, mass_mode=args.mass_mode,
                             default_mass=args.default_mass,
                             force_source=args.force_source)
    except ValueError as exc:
        raise CliError(str(exc)) from exc

    history = dynamics.replay(buckets, cfg, graph)
    final = history.final_hour
    snap_hours = [h for h in (week_end_hour(w) for w in range(final // dynamics.WEEK_HOURS + 1))
                  if h <= final]
    if final >= 0 and final not in snap_hours:
        snap_hours.append(final)
    dynamics.write_snapshots(out_dir / SNAPSHOT_FILE, history, snap_hours)
    with open(out_dir / FINAL_VELOCITY_FILE, "w", encoding="utf-8") as fh:
        for u in history.users:
            fh.write(f"{u}\t{history.at(u, final):.12g}\n")
    _write_run_config(out_dir, args, {"resolved_zeta": repr(zeta)})
    print(f"tracked {len(history.users)} users over {final + 1} hours; "
          f"skipped {stats.skipped}/{stats.records} records; zeta={zeta:g}")
    return EXIT_OK


def cmd_trend(args) -> int:
    out_dir = Path(args.out)
    snap_path = _require_artifact(out_dir, SNAPSHOT_FILE, "score")
    table = dynamics.load_snapshots(snap_path)
    start = week_end_hour(args.week - 1)
    end = week_end_hour(args.week)
    try:
        v_start = table.velocity_map(start) if start >= 0 else {}
        v_end = table.velocity_map(end)
    except ValueError as exc:
        raise CliError(f"{exc}; run `veloscore score` over a stream covering week {args.week}") \
            from exc
    entries = dynamics.rank_trending(v_start, v_end, args.threshold, args.top_k,
                                     window=f"week{args.week}")
    with open(out_dir / TRENDING_FILE, "w", encoding="utf-8") as fh:
        fh.write("window\tuser\tacceleration\trelative_increase\n")
        for e in entries:
            fh.write(f"{e.window}\t{e.user}\t{e.acceleration:.12g}\t{e.relative_increase:.12g}\n")
    for e in entries:
        print(f"{e.window}\t{e.user}\t{e.acceleration:.6g}\t{e.relative_increase:.6g}")
    print(f"{len(entries)} trending users for week {args.week}")
    return EXIT_OK


def cmd_centrality(args) -> int:
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    stats = IngestStats()
    edges_path = _require_file(args.edges, "edge list")
    counts_path = _require_file(args.counts, "follower-count file") if args.counts else None
    graph = load_graph(edges_path, counts_path, stats)
    if graph.n == 0:
        raise DataError("graph is empty")

    wanted = list(CENTRALITY_FILES) if args.algorithm == "all" \
        else [args.algorithm] if args.algorithm != "ip" \
        else ["ip_influence", "ip_passivity"]
    vectors: dict[str, ScoreVector] = {}
    if "pagerank" in wanted:
        vectors["pagerank"] = centrality_mod.pagerank(
            graph, args.damping, args.tol, args.max_iter, reverse=args.reverse_pagerank)
    if "tunkrank" in wanted:
        vectors["tunkrank"] = centrality_mod.tunkrank(
            graph, args.retweet_prob, args.tol, args.max_iter)
    if "ip_influence" in wanted or "ip_passivity" in wanted:
        if not args.events:
            raise CliError("--events is required for the ip algorithm")
        ev_stats = IngestStats()
        events = list(read_events_file(_require_file(args.events, "event stream"), ev_stats))
        rg = centrality_mod.build_retweet_graph(events, graph)
        try:
            inf, pas = centrality_mod.influence_passivity(rg, args.tol, args.max_iter)
        except ValueError as exc:
            raise DataError(str(exc)) from exc
        vectors["ip_influence"] = inf
        vectors["ip_passivity"] = pas
    if "followers" in wanted:
        vectors["followers"] = centrality_mod.followers_score(graph)
    if "ratio" in wanted:
        vectors["ratio"] = centrality_mod.ratio_score(graph)

    for name, sv in vectors.items():
        sv.write_tsv(out_dir / CENTRALITY_FILES[name])
        note = "" if sv.converged else " (NOT converged)"
        print(f"{name}: {len(sv.users)} users, {sv.iterations} iterations, "
              f"residual {sv.residual:.3g}{note}")
    _write_run_config(out_dir, args, {})
    return EXIT_OK


def cmd_eval(args) -> int:
    out_dir = Path(args.out)
    snap_path = _require_artifact(out_dir, SNAPSHOT_FILE, "score")
    static_sources = {}
    for name in ("ip_influence", "pagerank", "tunkrank"):
        path = _require_artifact(out_dir, CENTRALITY_FILES[name], "centrality")
        static_sources[name] = ScoreVector.read_tsv(path, name)

    stats = IngestStats()
    events_path = _require_file(args.events, "event stream")
    clicks_path = _require_file(args.clicks, "clicks table")
    edges_path = _require_file(args.edges, "edge list")
    counts_path = _require_file(args.counts, "follower-count file") if args.counts else None
    graph = load_graph(edges_path, counts_path, stats)
    clicks_table = evaluation.read_clicks(clicks_path)
    events = list(read_events_file(events_path, stats))
    epoch = _parse_epoch(args.epoch)

    ds_stats: dict = {}
    global_records, weekly_records = evaluation.build_url_datasets(
        events, clicks_table, graph, epoch, stats=ds_stats)
    if len(global_records) < 3:
        raise DataError(f"only {len(global_records)} qualified URLs; need at least 3")
    velocity_source = dynamics.load_snapshots(snap_path)
    try:
        sections = evaluation.run_full_evaluation(
            global_records, weekly_records, static_sources, velocity_source,
            iqr_k=args.iqr_k, quartile_rule=args.quartile_rule, stats=ds_stats)
    except ValueError as exc:
        raise DataError(str(exc)) from exc

    evaluation.write_report_tsv(out_dir / REPORT_TSV, sections)
    evaluation.write_report_text(out_dir / REPORT_TXT, sections)
    evaluation.write_weekly_detail_tsv(out_dir / REPORT_WEEKLY, sections)
    _write_run_config(out_dir, args, {})
    print(f"urls: {len(global_records)} global, {len(weekly_records)} weekly "
          f"({ds_stats.get('multi_week', 0)} multi-week, "
          f"{ds_stats.get('too_few_promoters', 0)} under-promoted, "
          f"{ds_stats.get('no_click_entry', 0)} without clicks)")
    for sec in sections:
        for row in sec.rows:
            print(f"{sec.section}\t{row.score}\tr={row.pearson_r:.5f}\t"
                  f"p={row.p_value:.3g}\tn={row.n}")
    return EXIT_OK


def build_parser() -> tuple[_Parser, dict[str, argparse.ArgumentParser]]:
    parser = _Parser(prog="veloscore", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    commands: dict[str, argparse.ArgumentParser] = {}

    def add_common(p):
        p.add_argument("--config", help="flat key = value config file; flags win")
        p.add_argument("--out", default="out", help="output directory")

    p_synth = sub.add_parser("synth", help="generate a deterministic synthetic dataset")
    add_common(p_synth)
    p_synth.add_argument("--seed", type=int, default=0)
    p_synth.add_argument("--users", type=int, default=200)
    p_synth.add_argument("--hours", type=int, default=336)
    p_synth.add_argument("--urls", type=int, default=0)
    p_synth.add_argument("--signal", type=float, default=0.0)
    p_synth.add_argument("--celebrity-fraction", type=float, default=0.02)
    p_synth.add_argument("--base-mention-rate", type=float, default=0.05)
    p_synth.add_argument("--base-click-prob", type=float, default=0.05)
    p_synth.add_argument("--click-noise", type=float, default=0.2)
    p_synth.add_argument("--graph-model", choices=["preferential", "uniform"],
                         default="preferential")
    p_synth.add_argument("--follows-per-user", type=int, default=10)
    p_synth.add_argument("--spam-cluster-size", type=int, default=0)
    p_synth.add_argument("--mode", choices=["exact", "sampled"], default="exact")
    p_synth.add_argument("--burst", action="append",
                         help="user:start_hour:end_hour:rate (repeatable)")
    p_synth.set_defaults(func=cmd_synth)

    p_score = sub.add_parser("score", help="run the velocity pipeline over a stream")
    add_common(p_score)
    p_score.add_argument("--events", required=True)
    p_score.add_argument("--edges", required=True)
    p_score.add_argument("--counts", help="optional follower-count override file")
    p_score.add_argument("--zeta", default="auto",
                         help="damping constant, or 'auto' to estimate from the stream")
    p_score.add_argument("--mass-mode", choices=list(dynamics.MASS_MODES),
                         default="raw_followers")
    p_score.add_argument("--default-mass", type=float, default=1.0)
    p_score.add_argument("--force-source", choices=list(dynamics.FORCE_SOURCES),
                         default="mentions")
    p_score.add_argument("--epoch", help="ISO-8601 stream epoch / week anchor "
                                         "(default: first event, floored to the hour)")
    p_score.add_argument("--error-ceiling", type=float, default=0.01,
                         help="max tolerated record skip rate")
    p_score.set_defaults(func=cmd_score)

    p_trend = sub.add_parser("trend", help="rank trending users for one week")
    add_common(p_trend)
    p_trend.add_argument("--week", type=int, required=True)
    p_trend.add_argument("--threshold", type=float, default=0.10,
                         help="minimum relative velocity increase")
    p_trend.add_argument("--top-k", type=int, default=5)
    p_trend.set_defaults(func=cmd_trend)

    p_cent = sub.add_parser("centrality", help="baseline graph scorers")
    add_common(p_cent)
    p_cent.add_argument("--edges", required=True)
    p_cent.add_argument("--counts")
    p_cent.add_argument("--events", help="event stream (needed for ip)")
    p_cent.add_argument("--algorithm", default="all",
                        choices=["all", "pagerank", "tunkrank", "ip", "followers", "ratio"])
    p_cent.add_argument("--damping", type=float, default=centrality_mod.DEFAULT_DAMPING)
    p_cent.add_argument("--retweet-prob", type=float,
                        default=centrality_mod.DEFAULT_RETWEET_PROB)
    p_cent.add_argument("--tol", type=float, default=centrality_mod.DEFAULT_TOL)
    p_cent.add_argument("--max-iter", type=int, default=centrality_mod.DEFAULT_MAX_ITER)
    p_cent.add_argument("--reverse-pagerank", action="store_true",
                        help="flip edge orientation for comparison runs")
    p_cent.set_defaults(func=cmd_centrality)

    p_eval = sub.add_parser("eval", help="click-correlation reports")
    add_common(p_eval)
    p_eval.add_argument("--events", required=True)
    p_eval.add_argument("--edges", required=True)
    p_eval.add_argument("--counts")
    p_eval.add_argument("--clicks", required=True)
    p_eval.add_argument("--epoch", help="ISO-8601 stream epoch; must match the "
                                        "epoch the score run used")
    p_eval.add_argument("--iqr-k", type=float, default=1.5)
    p_eval.add_argument("--quartile-rule", choices=["linear", "tukey"], default="linear")
    p_eval.set_defaults(func=cmd_eval)

    commands.update(synth=p_synth, score=p_score, trend=p_trend,
                    centrality=p_cent, eval=p_eval)
    return parser, commands


_BOOL_KEYS = {"reverse_pagerank"}


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser, commands = build_parser()
    try:
        if "--config" in argv:
            pos = argv.index("--config") + 1
            if pos >= len(argv):
                raise CliError("--config needs a file path")
            defaults = load_config_file(_require_file(argv[pos], "config file"))
            for key in _BOOL_KEYS & defaults.keys():
                defaults[key] = defaults[key].lower() in {"1", "true", "yes"}
            for cmd_parser in commands.values():
                known = {a.dest for a in cmd_parser._actions}  # noqa: SLF001
                cmd_parser.set_defaults(**{k: v for k, v in defaults.items() if k in known})
        try:
            args = parser.parse_args(argv)
        except SystemExit as exc:
            return int(exc.code or 0)
        return args.func(args)
    except CliError as exc:
        print(f"veloscore: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"veloscore: data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
