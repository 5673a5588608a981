"""Scenario file loading, validation, overrides and round-tripping.

A scenario file is a single JSON object.  Top-level keys: topology, delays,
strategy, routing, link_latencies, coordinator, failures, commands, seed,
horizon.  Only topology, seed and horizon are required; everything else has a
documented default.  Unknown keys anywhere are rejected with the offending
field path, and ``scenario_to_dict(build_scenario(d))`` reproduces an
equivalent scenario (defaults materialized).
"""

from __future__ import annotations

import json
from dataclasses import replace

from .adjacent import DelayParams
from .errors import InvalidConfig, ScenarioInvalid
from .hierarchical import MODE_LCA
from .simkernel import (
    DEFAULT_LATENCIES,
    CommandSpec,
    FailureSpec,
    Scenario,
    validate_scenario,
)
from .topology import HierarchyConfig

_TOP_KEYS = {"topology", "delays", "strategy", "routing", "link_latencies",
             "coordinator", "failures", "commands", "seed", "horizon"}
_TOPOLOGY_KEYS = {"num_layers", "workers_per_cluster", "clusters_per_region",
                  "regions_per_hub", "hubs_per_domain", "domains", "adjacency"}
_DELAY_KEYS = {"alpha", "beta", "epsilon"}
_COORD_KEYS = {"K", "T_min", "round_period", "eager_refill", "single_promotion"}
_ROUTING_KEYS = {"mode"}
_COMMAND_KEYS = {"time", "origin", "scope", "targets", "payload"}
_FAILURE_KEYS = {"time", "kind", "action", "worker", "region", "link_class",
                 "drop", "edge"}
_SCOPE_KEYS = {"kind", "id"}


def _reject_unknown(obj: dict, allowed: set[str], path: str):
    unknown = sorted(set(obj) - allowed)
    if unknown:
        raise ScenarioInvalid(f"{path}.{unknown[0]}" if path else unknown[0],
                              "unknown key")


def _need(obj: dict, key: str, types, path: str):
    if key not in obj:
        raise ScenarioInvalid(f"{path}{key}", "missing required key")
    return _typed(obj, key, types, path)


def _typed(obj: dict, key: str, types, path: str, default=None):
    if key not in obj:
        return default
    val = obj[key]
    if types is float:
        ok = isinstance(val, (int, float)) and not isinstance(val, bool)
        want = "number"
    elif types is int:
        ok = isinstance(val, int) and not isinstance(val, bool)
        want = "int"
    else:
        ok = isinstance(val, types)
        want = types.__name__
    if not ok:
        raise ScenarioInvalid(f"{path}{key}", f"expected {want}, got {type(val).__name__}")
    return val


def build_scenario(raw: dict) -> Scenario:
    """Parse and fully validate a raw scenario dict into a Scenario."""
    if not isinstance(raw, dict):
        raise ScenarioInvalid("", "scenario must be a JSON object")
    _reject_unknown(raw, _TOP_KEYS, "")

    topo_raw = _need(raw, "topology", dict, "")
    _reject_unknown(topo_raw, _TOPOLOGY_KEYS, "topology")
    coord_raw = _typed(raw, "coordinator", dict, "", default={})
    _reject_unknown(coord_raw, _COORD_KEYS, "coordinator")
    try:
        config = HierarchyConfig(
            num_layers=_typed(topo_raw, "num_layers", int, "topology.", default=5),
            workers_per_cluster=_need(topo_raw, "workers_per_cluster", int, "topology."),
            clusters_per_region=_need(topo_raw, "clusters_per_region", int, "topology."),
            regions_per_hub=_typed(topo_raw, "regions_per_hub", int, "topology.", default=1),
            hubs_per_domain=_typed(topo_raw, "hubs_per_domain", int, "topology.", default=1),
            domains=_typed(topo_raw, "domains", int, "topology.", default=1),
            coordinator_k=_typed(coord_raw, "K", int, "coordinator.", default=5),
            t_min=_typed(coord_raw, "T_min", int, "coordinator.", default=3),
        )
    except InvalidConfig as e:
        raise ScenarioInvalid("topology", str(e)) from None

    adjacency = None
    if "adjacency" in topo_raw:
        rows = _typed(topo_raw, "adjacency", list, "topology.")
        adjacency = []
        for i, row in enumerate(rows):
            if not (isinstance(row, list) and len(row) == 2
                    and all(isinstance(x, int) for x in row)):
                raise ScenarioInvalid(f"topology.adjacency[{i}]",
                                      "expected a [region, region] pair")
            adjacency.append((row[0], row[1]))

    delays_raw = _typed(raw, "delays", dict, "", default={})
    _reject_unknown(delays_raw, _DELAY_KEYS, "delays")
    try:
        delay = DelayParams(
            alpha=float(_typed(delays_raw, "alpha", float, "delays.", default=1.0)),
            beta=float(_typed(delays_raw, "beta", float, "delays.", default=0.1)),
            epsilon=float(_typed(delays_raw, "epsilon", float, "delays.", default=0.05)),
        )
    except InvalidConfig as e:
        raise ScenarioInvalid("delays", str(e)) from None

    routing_raw = _typed(raw, "routing", dict, "", default={})
    _reject_unknown(routing_raw, _ROUTING_KEYS, "routing")
    route_mode = _typed(routing_raw, "mode", str, "routing.", default=MODE_LCA)

    lat_raw = _typed(raw, "link_latencies", dict, "", default={})
    link_latencies = dict(DEFAULT_LATENCIES)
    for k, v in lat_raw.items():
        if k not in DEFAULT_LATENCIES:
            raise ScenarioInvalid(f"link_latencies.{k}", "unknown link class")
        if not isinstance(v, (int, float)) or isinstance(v, bool):
            raise ScenarioInvalid(f"link_latencies.{k}", "expected a number")
        link_latencies[k] = float(v)

    commands = []
    for i, c in enumerate(_typed(raw, "commands", list, "", default=[])):
        path = f"commands[{i}]."
        if not isinstance(c, dict):
            raise ScenarioInvalid(f"commands[{i}]", "expected an object")
        _reject_unknown(c, _COMMAND_KEYS, f"commands[{i}]")
        scope_raw = _need(c, "scope", dict, path)
        _reject_unknown(scope_raw, _SCOPE_KEYS, f"{path}scope")
        kind = _need(scope_raw, "kind", str, f"{path}scope.")
        scope = (kind,) if kind == "global" else (kind, _typed(scope_raw, "id", int, f"{path}scope."))
        targets = _typed(c, "targets", list, path, default=[])
        for t in targets:
            if not isinstance(t, int):
                raise ScenarioInvalid(f"{path}targets", "expected a list of worker ids")
        payload_hex = _typed(c, "payload", str, path, default="")
        try:
            payload = bytes.fromhex(payload_hex)
        except ValueError:
            raise ScenarioInvalid(f"{path}payload", "expected a hex string") from None
        commands.append(CommandSpec(
            time=float(_need(c, "time", float, path)),
            origin=_need(c, "origin", int, path),
            scope=scope,
            targets=frozenset(targets),
            payload=payload,
        ))

    failures = []
    for i, f in enumerate(_typed(raw, "failures", list, "", default=[])):
        path = f"failures[{i}]."
        if not isinstance(f, dict):
            raise ScenarioInvalid(f"failures[{i}]", "expected an object")
        _reject_unknown(f, _FAILURE_KEYS, f"failures[{i}]")
        edge = None
        if "edge" in f:
            row = _typed(f, "edge", list, path)
            if len(row) != 2 or not all(isinstance(x, int) for x in row):
                raise ScenarioInvalid(f"{path}edge", "expected a [region, region] pair")
            edge = (row[0], row[1])
        failures.append(FailureSpec(
            time=float(_need(f, "time", float, path)),
            kind=_need(f, "kind", str, path),
            action=_need(f, "action", str, path),
            worker=_typed(f, "worker", int, path),
            region=_typed(f, "region", int, path),
            link_class=_typed(f, "link_class", str, path),
            drop=float(_typed(f, "drop", float, path, default=1.0)),
            edge=edge,
        ))

    sc = Scenario(
        config=config,
        seed=_need(raw, "seed", int, ""),
        horizon=float(_need(raw, "horizon", float, "")),
        strategy=_typed(raw, "strategy", str, "", default="adjacent"),
        delay=delay,
        adjacency_override=adjacency,
        link_latencies=link_latencies,
        commands=commands,
        failures=failures,
        round_period=float(_typed(coord_raw, "round_period", float, "coordinator.", default=1.0)),
        eager_refill=_typed(coord_raw, "eager_refill", bool, "coordinator.", default=False),
        single_promotion=_typed(coord_raw, "single_promotion", bool, "coordinator.", default=False),
        route_mode=route_mode,
    )
    validate_scenario(sc)
    return sc


def scenario_to_dict(sc: Scenario) -> dict:
    """Full explicit dict form; build_scenario() maps it back to an equal Scenario."""
    out = {
        "topology": {
            "num_layers": sc.config.num_layers,
            "workers_per_cluster": sc.config.workers_per_cluster,
            "clusters_per_region": sc.config.clusters_per_region,
            "regions_per_hub": sc.config.regions_per_hub,
            "hubs_per_domain": sc.config.hubs_per_domain,
            "domains": sc.config.domains,
        },
        "delays": {"alpha": sc.delay.alpha, "beta": sc.delay.beta,
                   "epsilon": sc.delay.epsilon},
        "strategy": sc.strategy,
        "routing": {"mode": sc.route_mode},
        "link_latencies": dict(sc.link_latencies),
        "coordinator": {
            "K": sc.config.coordinator_k,
            "T_min": sc.config.t_min,
            "round_period": sc.round_period,
            "eager_refill": sc.eager_refill,
            "single_promotion": sc.single_promotion,
        },
        "commands": [
            {
                "time": c.time,
                "origin": c.origin,
                "scope": {"kind": c.scope[0]} if c.scope[0] == "global"
                         else {"kind": c.scope[0], "id": c.scope[1]},
                "targets": sorted(c.targets),
                "payload": c.payload.hex(),
            }
            for c in sc.commands
        ],
        "failures": [],
        "seed": sc.seed,
        "horizon": sc.horizon,
    }
    if sc.adjacency_override is not None:
        out["topology"]["adjacency"] = [list(e) for e in sc.adjacency_override]
    for f in sc.failures:
        row: dict = {"time": f.time, "kind": f.kind, "action": f.action}
        if f.worker is not None:
            row["worker"] = f.worker
        if f.region is not None:
            row["region"] = f.region
        if f.link_class is not None:
            row["link_class"] = f.link_class
            row["drop"] = f.drop
        if f.edge is not None:
            row["edge"] = list(f.edge)
        out["failures"].append(row)
    return out


def apply_overrides(raw: dict, assignments: list[str]) -> dict:
    """Apply ``--set dotted.path=value`` pairs to a raw scenario dict.

    Values parse as JSON when possible and fall back to plain strings, so
    ``strategy=hierarchical`` and ``delays.alpha=2.0`` both work.  List
    indices are not supported.
    """
    for item in assignments:
        if "=" not in item:
            raise ScenarioInvalid("--set", f"expected key=value, got {item!r}")
        key, text = item.split("=", 1)
        try:
            value = json.loads(text)
        except json.JSONDecodeError:
            value = text
        node = raw
        parts = key.split(".")
        for part in parts[:-1]:
            nxt = node.get(part)
            if nxt is None:
                nxt = node[part] = {}
            if not isinstance(nxt, dict):
                raise ScenarioInvalid(key, f"{part} is not an object")
            node = nxt
        node[parts[-1]] = value
    return raw


def load_scenario_file(path: str, overrides: list[str] | None = None,
                       seed: int | None = None) -> Scenario:
    """Read, override, validate.  OSError propagates for the CLI's IO exit."""
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as e:
        raise ScenarioInvalid("json", f"scenario file is not valid JSON: {e}") from None
    if overrides:
        raw = apply_overrides(raw, overrides)
    sc = build_scenario(raw)
    if seed is not None:
        sc = replace(sc, seed=seed)
        validate_scenario(sc)
    return sc
