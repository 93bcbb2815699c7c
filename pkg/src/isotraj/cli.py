"""Command-line entry point.

    isotraj ingest LOG --out PATH.csv
    isotraj predict --store DIR --log LOG --horizon TICKS [--out FILE.geojson]
    isotraj replay --log LOG [--log LOG ...] --days 1,2,3 --store DIR --report FILE
    isotraj report --store DIR

Exit codes: 0 success, 2 parse error, 3 config error, 4 insufficient data,
1 anything else.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .config import Config, load_config
from .errors import ConfigError, InsufficientDataError, IsoTrajError
from .ingest import SensorSpec, dead_reckon, format_path, parse_log
from .pipeline import (
    ObstacleField,
    format_report_csv,
    format_report_text,
    load_sections,
    replay_days,
    speed_model_for,
)
from .predict import (
    Constraints,
    PathStore,
    candidates_geojson,
    dump_geojson,
    format_states,
    predict_horizon,
)


def _read_log(path: str, cfg: Config):
    try:
        with open(path, encoding="utf-8", newline="") as fh:
            return parse_log(fh, cfg.sample_period_ms)
    except OSError as exc:
        raise ConfigError(f"cannot read log {path}: {exc}") from None


def _constraints(args, cfg: Config):
    path = getattr(args, "constraints", None) or cfg.predict.constraints
    return Constraints.load(path) if path else None


def _obstacles(args, cfg: Config):
    files = list(getattr(args, "obstacles", None) or [])
    files += [f for f in cfg.obstacle.files.split(",") if f.strip()]
    sections = load_sections([f.strip() for f in files])
    o = cfg.obstacle
    return ObstacleField(sections, o.resolution, o.lookahead_m, o.lookahead_step_m)


def cmd_ingest(args, cfg: Config) -> int:
    log = _read_log(args.log, cfg)
    points = dead_reckon(log.samples, SensorSpec.from_config(cfg.sensor), speed_model_for(cfg))
    Path(args.out).write_text(format_path(points), encoding="utf-8")
    for gap in log.gaps:
        print(f"gap: line {gap.line}, {gap.after_ms} -> {gap.before_ms} ms ({gap.length_ms} ms)",
              file=sys.stderr)
    print(f"{len(points)} points written to {args.out}")
    return 0


def cmd_predict(args, cfg: Config) -> int:
    log = _read_log(args.log, cfg)
    points = dead_reckon(log.samples, SensorSpec.from_config(cfg.sensor), speed_model_for(cfg))
    store = PathStore.load(args.store, cfg.store.cell_size)
    horizon = args.horizon or cfg.predict.horizon_ticks
    window = points[-cfg.maneuver.window_ticks:]
    cands = predict_horizon(store, window, horizon, cfg.dt, cfg.predict.max_candidates,
                            _constraints(args, cfg), cfg.store.laplace_alpha)
    text = dump_geojson(candidates_geojson([(points[-1].tick, None, cands)]))
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return 0


def cmd_replay(args, cfg: Config) -> int:
    try:
        days = [int(d) for d in args.days.split(",") if d.strip()]
    except ValueError:
        raise ConfigError(f"--days must be a comma list of integers, got {args.days!r}") from None
    if not days:
        raise InsufficientDataError("no days to replay")
    if len(args.log) == 1:
        logs = [_read_log(args.log[0], cfg)] * len(days)
    elif len(args.log) == len(days):
        logs = [_read_log(p, cfg) for p in args.log]
    else:
        raise ConfigError("give one --log for all days or one per day")
    store = PathStore.load(args.store, cfg.store.cell_size)
    results, store = replay_days(logs, days, cfg, store, _obstacles(args, cfg), _constraints(args, cfg))
    store.save(args.store)

    report = Path(args.report)
    out_dir = Path(args.out_dir) if args.out_dir else report.parent
    out_dir.mkdir(parents=True, exist_ok=True)
    for res in results:
        (out_dir / f"states_day{res.day}.csv").write_text(format_states(res.states), encoding="utf-8")
        preds = [(p.tick, res.day, p.candidates) for p in res.predictions]
        (out_dir / f"candidates_day{res.day}.geojson").write_text(
            dump_geojson(candidates_geojson(preds)), encoding="utf-8")
    report.write_text(format_report_text(results), encoding="utf-8")
    report.with_suffix(".csv").write_text(format_report_csv(results), encoding="utf-8")
    sys.stdout.write(format_report_text(results))
    return 0


def cmd_report(args, cfg: Config) -> int:
    store = PathStore.load(args.store, cfg.store.cell_size)
    visits = sum(c.visits for c in store.cells.values())
    print(f"cell size      {store.cell_size} m")
    print(f"cells          {len(store.cells)}")
    print(f"cell crossings {visits}")
    print(f"days           {', '.join(map(str, store.days)) or '-'}")
    print(f"trajectories   {len(store.ingested)}")
    busiest = sorted(store.cells.items(), key=lambda kv: (-kv[1].visits, kv[0]))[:10]
    if busiest:
        print("\nbusiest cells (ix, iy): visits, modal exit bin")
        for key, stats in busiest:
            print(f"  {key}: {stats.visits}, {stats.mode()}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="isotraj", description=__doc__.split("\n\n")[0])
    parser.add_argument("--config", help="key=value configuration file")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="parse a log and write the dead-reckoned path")
    p.add_argument("log")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("predict", help="candidate paths from the end of a log")
    p.add_argument("--store", required=True)
    p.add_argument("--log", required=True)
    p.add_argument("--horizon", type=int)
    p.add_argument("--constraints")
    p.add_argument("--out")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("replay", help="replay logs day by day against the store")
    p.add_argument("--log", action="append", required=True)
    p.add_argument("--days", required=True)
    p.add_argument("--store", required=True)
    p.add_argument("--report", required=True)
    p.add_argument("--out-dir")
    p.add_argument("--constraints")
    p.add_argument("--obstacles", action="append")
    p.set_defaults(func=cmd_replay)

    p = sub.add_parser("report", help="summarise a path store")
    p.add_argument("--store", required=True)
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        return args.func(args, cfg)
    except IsoTrajError as exc:
        print(f"isotraj: error: {exc}", file=sys.stderr)
        return exc.exit_code
    except ValueError as exc:
        print(f"isotraj: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
