"""Scenario configuration: TOML loading, overrides, validation.

A scenario file describes the topology ([[nodes]], [[links]]), the swarm
([torrent], [[apps]]), timed connectivity changes ([[events]]), and knobs
for the forwarding plane ([strategy], [forwarder]) and the run itself
([sim]). Command-line overrides use dotted paths into the same structure,
e.g. `sim.duration_s=30` or `links[2].bandwidth_mbps=4`.
"""

from __future__ import annotations

import dataclasses
import hashlib
import os
import re
from dataclasses import dataclass, field

import tomli

from .simnet import LinkSpec, NodeSpec
from .strategy import StrategyConfig


class ParseError(ValueError):
    pass


ROLES = ("peer", "router")
APP_KINDS = ("producer", "consumer")
EVENT_ACTIONS = ("disconnect", "connect")


@dataclass(frozen=True)
class SimSpec:
    duration_s: float = 60.0
    seed: int = 1
    metrics_interval_ms: float = 100.0
    record_events: bool = False


@dataclass(frozen=True)
class TorrentSpec:
    name: str = "/swarm/demo"
    file_count: int = 4
    file_size: int = 2_621_440
    payload_size: int = 1024


@dataclass(frozen=True)
class ForwarderSpec:
    cs_capacity: int = 0
    cs_enabled_roles: tuple = ()


@dataclass(frozen=True)
class AppSpec:
    node: str
    kind: str
    start_s: float = 0.0
    window: int = 64
    lifetime_ms: int = 4000
    retry_limit: int = 16
    serve: bool = True
    jitter_s: float = 0.0
    pace_interval_ms: int = 0
    record_stats: bool = False


@dataclass(frozen=True)
class EventSpec:
    at_s: float
    action: str
    node: str


@dataclass
class ScenarioConfig:
    name: str
    sim: SimSpec = field(default_factory=SimSpec)
    torrent: TorrentSpec = field(default_factory=TorrentSpec)
    forwarder: ForwarderSpec = field(default_factory=ForwarderSpec)
    strategy: StrategyConfig = field(default_factory=StrategyConfig)
    nodes: list = field(default_factory=list)
    links: list = field(default_factory=list)
    apps: list = field(default_factory=list)
    events: list = field(default_factory=list)


_PATH_TOKEN = re.compile(r"^([A-Za-z_][A-Za-z0-9_]*)(?:\[(\d+)\])?$")


def _parse_literal(text: str):
    low = text.lower()
    if low == "true":
        return True
    if low == "false":
        return False
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        pass
    return text


def apply_override(raw: dict, expr: str):
    """Apply one `path=value` override to the raw scenario dict in place."""
    if "=" not in expr:
        raise ParseError("override %r is not of the form path=value" % expr)
    path, _, value = expr.partition("=")
    tokens = path.strip().split(".")
    if not tokens or not all(tokens):
        raise ParseError("override %r has an empty path" % expr)
    target = raw
    trail = []
    for i, token in enumerate(tokens):
        m = _PATH_TOKEN.match(token)
        if m is None:
            raise ParseError("override %r: bad path element %r" % (expr, token))
        key, idx = m.group(1), m.group(2)
        trail.append(key)
        last = i == len(tokens) - 1
        if idx is None and last:
            if not isinstance(target, dict):
                raise ParseError("override %r: %s is not a table" % (expr, ".".join(trail[:-1])))
            target[key] = _parse_literal(value.strip())
            return
        if key not in target:
            raise ParseError("override %r: no such key %r" % (expr, ".".join(trail)))
        target = target[key]
        if idx is not None:
            if not isinstance(target, list):
                raise ParseError("override %r: %s is not an array" % (expr, ".".join(trail)))
            n = int(idx)
            if n >= len(target):
                raise ParseError(
                    "override %r: index %d out of range for %s (size %d)"
                    % (expr, n, ".".join(trail), len(target))
                )
            target = target[n]
            if last:
                raise ParseError("override %r: path ends on an array element" % expr)


def _typed(ctx: str, raw: dict, cls):
    """Build a dataclass from a TOML table, checking names and types."""
    if not isinstance(raw, dict):
        raise ParseError("%s: expected a table" % ctx)
    fields = {f.name: f for f in dataclasses.fields(cls)}
    kwargs = {}
    for key, value in raw.items():
        if key not in fields:
            raise ParseError("%s: unknown key %r" % (ctx, key))
        kwargs[key] = value
    try:
        obj = cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ParseError("%s: %s" % (ctx, exc)) from exc
    for name, f in fields.items():
        value = getattr(obj, name)
        if f.type in ("int",) and isinstance(value, bool):
            raise ParseError("%s: %s must be an integer" % (ctx, name))
        if f.type in ("int",) and not isinstance(value, int):
            raise ParseError("%s: %s must be an integer" % (ctx, name))
        if f.type in ("float",) and (
            isinstance(value, bool) or not isinstance(value, (int, float))
        ):
            raise ParseError("%s: %s must be a number" % (ctx, name))
        if f.type in ("str",) and not isinstance(value, str):
            raise ParseError("%s: %s must be a string" % (ctx, name))
        if f.type in ("bool",) and not isinstance(value, bool):
            raise ParseError("%s: %s must be a boolean" % (ctx, name))
    return obj


def scenario_from_dict(raw: dict, name: str = "scenario") -> ScenarioConfig:
    known = {"sim", "torrent", "forwarder", "strategy", "nodes", "links", "apps", "events"}
    for key in raw:
        if key not in known:
            raise ParseError("%s: unknown section %r" % (name, key))

    cfg = ScenarioConfig(name=name)
    cfg.sim = _typed("[sim]", raw.get("sim", {}), SimSpec)
    cfg.torrent = _typed("[torrent]", raw.get("torrent", {}), TorrentSpec)

    fwd_raw = dict(raw.get("forwarder", {}))
    roles = fwd_raw.pop("cs_enabled_roles", [])
    if not isinstance(roles, list) or not all(isinstance(r, str) for r in roles):
        raise ParseError("[forwarder]: cs_enabled_roles must be an array of strings")
    cfg.forwarder = _typed("[forwarder]", fwd_raw, ForwarderSpec)
    cfg.forwarder = dataclasses.replace(cfg.forwarder, cs_enabled_roles=tuple(roles))

    try:
        cfg.strategy = _typed("[strategy]", raw.get("strategy", {}), StrategyConfig)
    except ParseError:
        raise
    except ValueError as exc:
        raise ParseError("[strategy]: %s" % exc) from exc

    for i, tbl in enumerate(raw.get("nodes", [])):
        node = _typed("nodes[%d]" % i, tbl, NodeSpec)
        if node.role not in ROLES:
            raise ParseError("nodes[%d]: role must be one of %s" % (i, ", ".join(ROLES)))
        cfg.nodes.append(node)

    for i, tbl in enumerate(raw.get("links", [])):
        ctx = "links[%d]" % i
        tbl = dict(tbl)
        if "bandwidth_mbps" in tbl:
            mbps = tbl.pop("bandwidth_mbps")
            if not isinstance(mbps, (int, float)) or isinstance(mbps, bool) or mbps <= 0:
                raise ParseError("%s: bandwidth_mbps must be a positive number" % ctx)
            tbl["bandwidth_bps"] = int(mbps * 1_000_000)
        link = _typed(ctx, tbl, LinkSpec)
        cfg.links.append(link)

    for i, tbl in enumerate(raw.get("apps", [])):
        app = _typed("apps[%d]" % i, tbl, AppSpec)
        if app.kind not in APP_KINDS:
            raise ParseError("apps[%d]: kind must be one of %s" % (i, ", ".join(APP_KINDS)))
        if app.window < 1:
            raise ParseError("apps[%d]: window must be >= 1" % i)
        if app.start_s < 0 or app.jitter_s < 0:
            raise ParseError("apps[%d]: start_s and jitter_s must be >= 0" % i)
        cfg.apps.append(app)

    for i, tbl in enumerate(raw.get("events", [])):
        ev = _typed("events[%d]" % i, tbl, EventSpec)
        if ev.action not in EVENT_ACTIONS:
            raise ParseError("events[%d]: action must be one of %s" % (i, ", ".join(EVENT_ACTIONS)))
        if ev.at_s < 0:
            raise ParseError("events[%d]: at_s must be >= 0" % i)
        cfg.events.append(ev)

    node_ids = {n.node_id for n in cfg.nodes}
    for i, app in enumerate(cfg.apps):
        if app.node not in node_ids:
            raise ParseError("apps[%d]: unknown node %r" % (i, app.node))
    for i, ev in enumerate(cfg.events):
        if ev.node not in node_ids:
            raise ParseError("events[%d]: unknown node %r" % (i, ev.node))

    if cfg.sim.duration_s <= 0:
        raise ParseError("[sim]: duration_s must be > 0")
    if cfg.torrent.file_count < 1 or cfg.torrent.file_size < 1:
        raise ParseError("[torrent]: file_count and file_size must be >= 1")
    if cfg.torrent.payload_size < 1:
        raise ParseError("[torrent]: payload_size must be >= 1")
    if not cfg.torrent.name.startswith("/"):
        raise ParseError("[torrent]: name must be a URI starting with /")
    return cfg


def load_scenario(path: str, overrides: list[str] | None = None) -> ScenarioConfig:
    try:
        with open(path, "rb") as fh:
            raw = tomli.load(fh)
    except OSError as exc:
        raise ParseError("cannot read %s: %s" % (path, exc)) from exc
    except tomli.TOMLDecodeError as exc:
        raise ParseError("%s: %s" % (path, exc)) from exc
    for expr in overrides or []:
        apply_override(raw, expr)
    name = os.path.splitext(os.path.basename(path))[0]
    return scenario_from_dict(raw, name=name)


def scenario_digest(cfg: ScenarioConfig) -> str:
    """Stable digest over everything that can influence a run."""
    blob = repr(
        (
            cfg.sim,
            cfg.torrent,
            cfg.forwarder,
            cfg.strategy,
            tuple(cfg.nodes),
            tuple(cfg.links),
            tuple(cfg.apps),
            tuple(cfg.events),
        )
    ).encode()
    return hashlib.sha256(blob).hexdigest()[:16]
