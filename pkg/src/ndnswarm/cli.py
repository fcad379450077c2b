"""Command line front end: run scenarios, validate configs."""

from __future__ import annotations

import argparse
import dataclasses
import os
import sys

from . import harness, metrics
from .config import ParseError, load_scenario

FULL_SCALE_FACTOR = 10  # 10 MiB desk-scale torrent -> 100 MiB


def _resolve(scenario: str) -> str:
    if os.path.exists(scenario):
        return scenario
    shipped = harness.scenario_path(scenario)
    if os.path.exists(shipped):
        return shipped
    raise ParseError(
        "no such scenario %r (shipped: %s)" % (scenario, ", ".join(harness.list_scenarios()))
    )


def _load(args) -> "ScenarioConfig":
    cfg = load_scenario(_resolve(args.scenario), args.override)
    if getattr(args, "seed", None) is not None:
        cfg = harness.with_seed(cfg, args.seed)
    if getattr(args, "full_scale", False):
        cfg = dataclasses.replace(
            cfg,
            torrent=dataclasses.replace(
                cfg.torrent, file_size=cfg.torrent.file_size * FULL_SCALE_FACTOR
            ),
        )
    return cfg


def _cmd_run(args) -> int:
    cfg = _load(args)

    if args.reps > 1:
        agg = harness.run_percentile(cfg, args.reps, args.percentile)
        rows = [(k, v) for k, v in sorted(agg.items())]
        path = os.path.join(args.out, "aggregate.csv")
        metrics.write_csv(path, ["metric", "p%g" % args.percentile], rows)
        for k, v in rows:
            print("%s = %s" % (k, metrics.fmt(v)))
        print("wrote %s (%d runs)" % (path, args.reps))
        return 0

    result = harness.run_scenario(cfg)
    paths = harness.write_reports(result, args.out)
    if not args.no_figures:
        from . import figures

        paths += figures.render_all(result, args.out)

    print("scenario %s seed %d digest %s" % (result.scenario, result.seed, result.digest))
    for rep in result.consumers:
        if rep.aborted:
            status = "ABORTED"
        elif rep.completed_s is None:
            status = "incomplete at %gs" % result.duration_s
        else:
            status = "completed %.2fs" % rep.completed_s
        print(
            "%s: %s, %d packets, max %.2f Mbps, mean %.2f Mbps, %d retries"
            % (
                rep.node,
                status,
                rep.data_packets,
                rep.max_speed_bps / 1e6,
                rep.mean_speed_bps / 1e6,
                rep.retries,
            )
        )
    print("wrote %d report files under %s" % (len(paths), args.out))
    return 3 if result.any_aborted else 0


def _cmd_validate(args) -> int:
    cfg = _load(args)
    from .config import scenario_digest

    print("%s ok: %d nodes, %d links, %d apps, digest %s"
          % (cfg.name, len(cfg.nodes), len(cfg.links), len(cfg.apps), scenario_digest(cfg)))
    return 0


def _cmd_list(_args) -> int:
    for name in harness.list_scenarios():
        print(name)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ndnswarm",
        description="Deterministic simulator of peer-to-peer file sharing "
        "over named-data networking.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run a scenario, write CSV reports and figures")
    p.add_argument("scenario", help="shipped scenario name or a TOML file path")
    p.add_argument("--override", action="append", default=[], metavar="PATH=VALUE",
                   help="config override, e.g. sim.duration_s=30 (repeatable)")
    p.add_argument("--reps", type=int, default=1,
                   help="repeat over consecutive seeds and aggregate")
    p.add_argument("--percentile", type=float, default=90.0,
                   help="reported percentile for --reps > 1")
    p.add_argument("--out", default="out", help="report directory")
    p.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    p.add_argument("--full-scale", action="store_true",
                   help="scale the torrent up 10x to full size")
    p.add_argument("--no-figures", action="store_true", help="CSV reports only")
    p.set_defaults(fn=_cmd_run)

    p = sub.add_parser("validate", help="parse and validate a scenario config")
    p.add_argument("scenario")
    p.add_argument("--override", action="append", default=[], metavar="PATH=VALUE")
    p.set_defaults(fn=_cmd_validate)

    p = sub.add_parser("list-scenarios", help="list the shipped scenarios")
    p.set_defaults(fn=_cmd_list)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except ParseError as exc:
        print("config error: %s" % exc, file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
