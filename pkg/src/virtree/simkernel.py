"""Deterministic discrete-event simulation kernel.

Events are totally ordered by (fire_time, seq): fire times are rounded to a
fixed 1e-9 quantum when scheduled and seq is the enqueue order, so two runs of
the same scenario replay the exact same event sequence and emit byte-identical
traces.  Randomness comes from named sub-streams derived from the scenario
seed via sha256, one per (purpose, scope), consumed in event order.

Events targeting workers that died in flight are tombstoned at fire time
rather than removed from the queue, and every message copy ends the run in
exactly one of: completed, dropped (dead target / jammed link), parked,
cancelled, suppressed, or in flight at the horizon.  The run asserts that
accounting balances.
"""

from __future__ import annotations

import heapq
import random
from dataclasses import dataclass, field

from . import adjacent as adj
from . import hierarchical as hier
from .coordinators import CoordinatorSet, monitor_round, region_live
from .errors import NoCandidate, RegionDead, ScenarioInvalid
from .messages import Message, msg_id_str, new_command, unexecuted_goals
from .metrics import MetricsReport, TraceRecord, build_report
from .topology import (
    HierarchyConfig,
    build_topology,
    derive_seed,
    goal_clusters_for_scope,
    reelect_role,
)

EV_DELIVERY = "MessageDelivery"
EV_BROADCAST = "ScheduledBroadcast"
EV_MAINTENANCE = "MaintenanceRound"
EV_FAILURE = "FailureInjection"
EV_RECOVERY = "RecoveryInjection"
EV_LINK = "LinkChange"

DEFAULT_LATENCIES = {"cluster": 0.1, "region": 0.2, "adjacent": 0.5, "tree": 1.0}

STRATEGIES = ("adjacent", "hierarchical")

MAX_PARK_RETRIES = 3


def quantize(t: float) -> float:
    """Fixed-precision event time: everything scheduled lands on 1e-9 ticks."""
    return round(t, 9)


@dataclass(frozen=True)
class CommandSpec:
    time: float
    origin: int
    scope: tuple
    targets: frozenset[int] = frozenset()
    payload: bytes = b""


@dataclass(frozen=True)
class FailureSpec:
    time: float
    kind: str  # "worker" | "region" | "link" | "adjacency"
    action: str  # kill | revive | jam | clear | add | remove
    worker: int | None = None
    region: int | None = None
    link_class: str | None = None
    drop: float = 1.0
    edge: tuple[int, int] | None = None


@dataclass
class Scenario:
    config: HierarchyConfig
    seed: int
    horizon: float
    strategy: str = "adjacent"
    delay: adj.DelayParams = field(default_factory=adj.DelayParams)
    adjacency_override: list[tuple[int, int]] | None = None
    link_latencies: dict[str, float] = field(default_factory=lambda: dict(DEFAULT_LATENCIES))
    commands: list[CommandSpec] = field(default_factory=list)
    failures: list[FailureSpec] = field(default_factory=list)
    round_period: float = 1.0
    eager_refill: bool = False
    single_promotion: bool = False
    route_mode: str = hier.MODE_LCA


def validate_scenario(sc: Scenario):
    """Field-level sanity checks; raises ScenarioInvalid naming the field."""
    cfg = sc.config
    if sc.strategy not in STRATEGIES:
        raise ScenarioInvalid("strategy", f"must be one of {STRATEGIES}, got {sc.strategy!r}")
    if sc.route_mode not in (hier.MODE_LCA, hier.MODE_ROOT):
        raise ScenarioInvalid("routing.mode", f"must be 'lca' or 'root', got {sc.route_mode!r}")
    if not sc.horizon > 0:
        raise ScenarioInvalid("horizon", f"must be > 0, got {sc.horizon}")
    if not 0 <= sc.seed < 2 ** 64:
        raise ScenarioInvalid("seed", "must fit in an unsigned 64-bit integer")
    if not sc.round_period > 0:
        raise ScenarioInvalid("coordinator.round_period", f"must be > 0, got {sc.round_period}")
    for name, value in sc.link_latencies.items():
        if name not in DEFAULT_LATENCIES:
            raise ScenarioInvalid(f"link_latencies.{name}", "unknown link class")
        if value < 0:
            raise ScenarioInvalid(f"link_latencies.{name}", f"must be >= 0, got {value}")
    if sc.adjacency_override is not None:
        for i, edge in enumerate(sc.adjacency_override):
            a, b = edge
            if a == b:
                raise ScenarioInvalid(f"topology.adjacency[{i}]", "self-loops not allowed")
            for r in edge:
                if not 0 <= r < cfg.n_regions:
                    raise ScenarioInvalid(f"topology.adjacency[{i}]",
                                          f"region {r} out of range (have {cfg.n_regions})")
    for i, cmd in enumerate(sc.commands):
        if cmd.time < 0:
            raise ScenarioInvalid(f"commands[{i}].time", "must be >= 0")
        if not 0 <= cmd.origin < cfg.n_clusters:
            raise ScenarioInvalid(f"commands[{i}].origin",
                                  f"cluster {cmd.origin} out of range (have {cfg.n_clusters})")
        kind = cmd.scope[0] if cmd.scope else None
        limits = {"cluster": cfg.n_clusters, "region": cfg.n_regions,
                  "hub": cfg.n_hubs, "domain": cfg.domains}
        if kind == "global":
            pass
        elif kind in limits:
            sid = cmd.scope[1] if len(cmd.scope) > 1 else None
            if sid is None or not 0 <= sid < limits[kind]:
                raise ScenarioInvalid(f"commands[{i}].scope",
                                      f"{kind} id {sid} out of range (have {limits[kind]})")
        else:
            raise ScenarioInvalid(f"commands[{i}].scope", f"unknown scope kind {kind!r}")
        for t in cmd.targets:
            if not 0 <= t < cfg.n_workers:
                raise ScenarioInvalid(f"commands[{i}].targets",
                                      f"worker {t} out of range (have {cfg.n_workers})")
    for i, f in enumerate(sc.failures):
        if f.time < 0:
            raise ScenarioInvalid(f"failures[{i}].time", "must be >= 0")
        if f.kind == "worker":
            if f.action not in ("kill", "revive"):
                raise ScenarioInvalid(f"failures[{i}].action", f"worker supports kill/revive, got {f.action!r}")
            if f.worker is None or not 0 <= f.worker < cfg.n_workers:
                raise ScenarioInvalid(f"failures[{i}].worker",
                                      f"worker {f.worker} out of range (have {cfg.n_workers})")
        elif f.kind == "region":
            if f.action != "kill":
                raise ScenarioInvalid(f"failures[{i}].action", f"region supports kill, got {f.action!r}")
            if f.region is None or not 0 <= f.region < cfg.n_regions:
                raise ScenarioInvalid(f"failures[{i}].region",
                                      f"region {f.region} out of range (have {cfg.n_regions})")
        elif f.kind == "link":
            if f.action not in ("jam", "clear"):
                raise ScenarioInvalid(f"failures[{i}].action", f"link supports jam/clear, got {f.action!r}")
            if f.link_class not in DEFAULT_LATENCIES:
                raise ScenarioInvalid(f"failures[{i}].link_class", f"unknown link class {f.link_class!r}")
            if not 0.0 <= f.drop <= 1.0:
                raise ScenarioInvalid(f"failures[{i}].drop", f"must be in [0, 1], got {f.drop}")
        elif f.kind == "adjacency":
            if f.action not in ("add", "remove"):
                raise ScenarioInvalid(f"failures[{i}].action", f"adjacency supports add/remove, got {f.action!r}")
            if f.edge is None or len(f.edge) != 2 or f.edge[0] == f.edge[1]:
                raise ScenarioInvalid(f"failures[{i}].edge", "need two distinct region ids")
            for r in f.edge:
                if not 0 <= r < cfg.n_regions:
                    raise ScenarioInvalid(f"failures[{i}].edge",
                                          f"region {r} out of range (have {cfg.n_regions})")
        else:
            raise ScenarioInvalid(f"failures[{i}].kind", f"unknown failure kind {f.kind!r}")


class _Kernel:
    def __init__(self, sc: Scenario):
        self.sc = sc
        self.topo = build_topology(sc.config, sc.seed, adjacency=sc.adjacency_override)
        self.now = 0.0
        self.heap: list = []
        self.event_seq = 0
        self.rec_seq = 0
        self.trace: list[TraceRecord] = []
        self.leader_states = {c: adj.LeaderState(cluster_id=c) for c in self.topo.clusters}
        self.coords = {r: CoordinatorSet.initial(self.topo, r) for r in self.topo.regions}
        self.links = hier.TreeLinks.build(self.topo)
        self.wexec: set[tuple[int, tuple]] = set()
        self.relayed: set[tuple[int, tuple]] = set()
        self.parked: list[dict] = []
        self.jam: dict[str, float] = {}
        self.counters: dict[str, int] = {}
        self._rngs: dict[tuple, random.Random] = {}

    # -- plumbing ---------------------------------------------------------

    def rng(self, *labels) -> random.Random:
        key = tuple(labels)
        r = self._rngs.get(key)
        if r is None:
            r = self._rngs[key] = random.Random(derive_seed(self.sc.seed, *labels))
        return r

    def bump(self, key: str, n: int = 1):
        self.counters[key] = self.counters.get(key, 0) + n

    def emit(self, comp: str, event: str, **data):
        self.trace.append(TraceRecord(time=self.now, seq=self.rec_seq,
                                      comp=comp, event=event, data=data))
        self.rec_seq += 1

    def push(self, fire: float, kind: str, payload: dict):
        heapq.heappush(self.heap, (quantize(fire), self.event_seq, kind, payload))
        self.event_seq += 1

    def latency(self, cls: str) -> float:
        return self.sc.link_latencies.get(cls, DEFAULT_LATENCIES[cls])

    def _worker_class(self, w_from: int, w_to: int) -> str:
        if self.topo.cluster_of[w_from] == self.topo.cluster_of[w_to]:
            return "cluster"
        if self.topo.region_of_worker(w_from) == self.topo.region_of_worker(w_to):
            return "region"
        return "adjacent"

    def send(self, dest: tuple, m: Message, sender: dict, cls: str | None,
             command: bool = False):
        """Enqueue one delivery; jammed link classes may eat it at send time."""
        if cls is not None and self.jam.get(cls, 0.0) > 0.0:
            if self.rng("jam", cls).random() < self.jam[cls]:
                self.bump("deliveries_dropped_jam")
                self.emit("kernel", "drop_jam", link_class=cls,
                          msg_id=msg_id_str(m.msg_id), dest=str(dest))
                return
        delay = 0.0 if command else self.latency(cls)
        self.bump("deliveries_enqueued")
        self.push(self.now + delay, EV_DELIVERY,
                  {"dest": dest, "msg": m, "sender": sender, "command": command})

    # -- failure / recovery -----------------------------------------------

    def kill_worker(self, w: int):
        if not self.topo.is_alive(w):
            return
        self.topo.mark_dead(w)
        self.emit("kernel", "failure", worker=w, cluster=self.topo.cluster_of[w],
                  region=self.topo.region_of_worker(w))
        c = self.topo.cluster_of[w]
        if self.topo.role_map.cluster_leader.get(c) == w:
            # queued broadcast events discover the cleared map and cancel
            self.leader_states[c].pending_broadcasts.clear()
        held = self.topo.roles_held_by(w)
        for layer, scope in held:
            try:
                reelect_role(self.topo, layer, scope)
                self.emit("kernel", "role_reelect", layer=layer, scope=scope,
                          old=w, new=self.topo.role_map.layer_map(layer)[scope])
            except NoCandidate:
                self.emit("kernel", "role_vacant", layer=layer, scope=scope, old=w)
        if held:
            self.retry_parked()

    def revive_worker(self, w: int):
        if self.topo.is_alive(w):
            return
        self.topo.mark_alive(w)
        self.emit("kernel", "recovery", worker=w)
        # fill any vacancy in the scopes this worker belongs to
        c = self.topo.cluster_of[w]
        chain = dict(zip((2, 3, 4, 5), self.topo.scope_chain(c)))
        changed = False
        for layer in range(2, self.topo.config.num_layers + 1):
            scope = chain[layer]
            if scope not in self.topo.role_map.layer_map(layer):
                try:
                    reelect_role(self.topo, layer, scope)
                    self.emit("kernel", "role_reelect", layer=layer, scope=scope,
                              old=None, new=self.topo.role_map.layer_map(layer)[scope])
                    changed = True
                except NoCandidate:
                    pass
        if changed:
            self.retry_parked()

    def retry_parked(self):
        """One retry pass over parked copies after a role-map change."""
        still = []
        for entry in self.parked:
            holder = self.links.holder(entry["node"])
            if holder is not None and self.topo.is_alive(holder):
                self.bump("parked_retried_ok")
                self.emit("alg3", "noroute_retry", node=str(entry["node"]),
                          msg_id=msg_id_str(entry["msg"].msg_id), ok=True)
                self.send(("node", entry["node"]), entry["msg"],
                          {"node": entry["from"]}, "tree")
            else:
                entry["retries"] += 1
                if entry["retries"] >= MAX_PARK_RETRIES:
                    self.bump("parked_failed")
                    self.bump("delivery_failures")
                    self.emit("alg3", "delivery_failed", node=str(entry["node"]),
                              msg_id=msg_id_str(entry["msg"].msg_id))
                else:
                    still.append(entry)
        self.parked = still

    def park(self, m: Message, node, from_node):
        self.bump("parked_total")
        self.emit("alg3", "noroute_parked", node=str(node),
                  msg_id=msg_id_str(m.msg_id))
        self.parked.append({"msg": m, "node": node, "from": from_node, "retries": 0})

    # -- handlers -----------------------------------------------------------

    def handle_delivery(self, payload: dict):
        dest = payload["dest"]
        m: Message = payload["msg"]
        if payload.get("command"):
            self.emit("kernel", "command_injected", msg_id=msg_id_str(m.msg_id),
                      origin=m.original_source, goals_total=len(m.goal_cluster_ids),
                      targets_total=len(m.target_worker_ids))
        kind = dest[0]
        if kind == "worker":
            self.deliver_worker(dest[1], m, payload["sender"])
        elif kind == "leader":
            self.deliver_leader(dest[1], m)
        else:
            self.deliver_node(dest[1], m, payload["sender"])

    def deliver_worker(self, w: int, m: Message, sender: dict):
        if not self.topo.is_alive(w):
            self.bump("deliveries_dropped_dead")
            self.emit("kernel", "drop_dead", worker=w, msg_id=msg_id_str(m.msg_id))
            return
        self.bump("deliveries_completed")
        mid = msg_id_str(m.msg_id)
        self.emit("alg1", "receive", worker=w, cluster=self.topo.cluster_of[w],
                  region=self.topo.region_of_worker(w),
                  from_worker=sender.get("worker"), from_region=sender.get("region"),
                  msg_id=mid, hop=m.hop_count)
        for action in adj.worker_on_receive(w, m, self.topo):
            if isinstance(action, adj.ExecuteLocally):
                self.apply_execution(w, m, comp="alg1")
            elif isinstance(action, adj.ReportToLeader):
                self.bump("reports_sent")
                self.send(("leader", action.cluster), m,
                          {"worker": w, "region": self.topo.region_of_worker(w)},
                          "cluster")
            else:  # BroadcastToReachable
                key = (w, m.msg_id)
                if key in self.relayed:
                    self.bump("relay_suppressed")
                    continue
                self.relayed.add(key)
                self.emit("alg1", "relay", worker=w, msg_id=mid,
                          fanout=len(action.workers), hop=m.hop_count)
                src_region = self.topo.region_of_worker(w)
                for peer in action.workers:
                    self.send(("worker", peer), m,
                              {"worker": w, "region": src_region},
                              self._worker_class(w, peer))

    def apply_execution(self, w: int, m: Message, comp: str):
        """Idempotent per (worker, msg): duplicates count but do not re-run."""
        key = (w, m.msg_id)
        if key in self.wexec:
            self.bump("duplicate_exec_suppressed")
            return
        self.wexec.add(key)
        self.emit(comp, "execute_worker", worker=w, msg_id=msg_id_str(m.msg_id),
                  targeted=w in m.target_worker_ids, hop=m.hop_count)

    def deliver_leader(self, c: int, m: Message):
        leader = self.topo.role_map.cluster_leader.get(c)
        if leader is None or not self.topo.is_alive(leader):
            self.bump("deliveries_dropped_dead")
            self.emit("kernel", "drop_dead", cluster=c, msg_id=msg_id_str(m.msg_id))
            return
        self.bump("deliveries_completed")
        state = self.leader_states[c]
        region = self.topo.region_of[c]
        mid = msg_id_str(m.msg_id)
        decision = adj.leader_on_receive_deferred(state, m, self.topo, self.sc.delay,
                                                  self.rng("alg2", region))
        if decision.outcome == "drop":
            self.bump("alg2_drops")
            self.emit("alg2", "drop", cluster=c, msg_id=mid, reason=decision.reason)
            return
        m2 = decision.message
        self.emit("alg2", "process", cluster=c, msg_id=mid, hop=m2.hop_count,
                  visited=sorted(m2.visited_cluster_ids),
                  executed_here=decision.executed_here)
        if decision.executed_here:
            self.emit("alg2", "execute_cluster", cluster=c, msg_id=mid, hop=m2.hop_count)
            for w in decision.delivered_workers:
                self.apply_execution(w, m2, comp="alg2")
        if decision.outcome == "scheduled":
            fire = quantize(self.now + decision.delay)
            state.pending_broadcasts[m2.msg_id] = fire
            self.bump("broadcasts_scheduled")
            self.emit("alg2", "schedule", cluster=c, msg_id=mid,
                      distance=decision.distance, delay=decision.delay, fire=fire)
            self.push(fire, EV_BROADCAST, {"cluster": c, "leader": leader, "msg": m2})
        else:
            self.emit("alg2", "stop", cluster=c, msg_id=mid)

    def handle_broadcast(self, payload: dict):
        c = payload["cluster"]
        m: Message = payload["msg"]
        state = self.leader_states[c]
        mid = msg_id_str(m.msg_id)
        if not self.topo.is_alive(payload["leader"]):
            self.bump("broadcasts_cancelled")
            self.emit("alg2", "broadcast_cancelled", cluster=c, msg_id=mid)
            return
        state.pending_broadcasts.pop(m.msg_id, None)
        if not unexecuted_goals(m):
            self.bump("broadcasts_suppressed")
            self.emit("alg2", "broadcast_suppressed", cluster=c, msg_id=mid)
            return
        mb = adj.worker_broadcast(state, m)
        self.bump("broadcasts_fired")
        self.emit("alg2", "broadcast", cluster=c, msg_id=mid, hop=mb.hop_count)
        leader_region = self.topo.region_of[c]
        for w in self.topo.workers_in_cluster[c]:
            if self.topo.is_alive(w):
                self.send(("worker", w), mb,
                          {"worker": payload["leader"], "region": leader_region},
                          "cluster")

    def deliver_node(self, node: tuple, m: Message, sender: dict):
        node = tuple(node)
        holder = self.links.holder(node)
        if holder is None or not self.topo.is_alive(holder):
            self.bump("deliveries_parked")
            self.park(m, node, sender.get("node"))
            return
        self.bump("deliveries_completed")
        mid = msg_id_str(m.msg_id)
        from_node = sender.get("node")
        if node[0] == 2:  # leaf: full cluster-leader processing
            c = node[1]
            state = self.leader_states[c]
            decision = hier.leader_on_receive_immediate(state, m, self.topo,
                                                        self.links, self.sc.route_mode,
                                                        injected=from_node is None)
            if decision.outcome == "drop":
                self.bump("alg3_drops")
                self.emit("alg3", "drop", cluster=c, msg_id=mid, reason=decision.reason)
                return
            m2 = decision.message
            self.emit("alg3", "process", cluster=c, msg_id=mid, hop=m2.hop_count,
                      visited=sorted(m2.visited_cluster_ids),
                      executed_here=decision.executed_here)
            if decision.executed_here:
                self.emit("alg3", "execute_cluster", cluster=c, msg_id=mid, hop=m2.hop_count)
                for w in decision.delivered_workers:
                    self.apply_execution(w, m2, comp="alg3")
            if decision.outcome == "stop":
                self.emit("alg3", "stop", cluster=c, msg_id=mid)
            for tnode, fm in decision.forwards:
                self.forward_tree(node, tnode, fm)
        else:
            fwds = hier.route_interior(node, m, from_node, self.topo, self.links,
                                       self.sc.route_mode)
            self.emit("alg3", "route", node=str(node), msg_id=mid,
                      n_out=len(fwds), hop=m.hop_count)
            for tnode, fm in fwds:
                self.forward_tree(node, tnode, fm)

    def forward_tree(self, src, dst, m: Message):
        holder = self.links.holder(dst)
        if holder is None or not self.topo.is_alive(holder):
            self.park(m, dst, src)
            return
        self.emit("alg3", "forward", src=str(src), dst=str(dst),
                  msg_id=msg_id_str(m.msg_id), hop=m.hop_count)
        self.send(("node", dst), m, {"node": src}, "tree")

    def handle_maintenance(self, payload: dict):
        rnd = payload["round"]
        for r in sorted(self.coords):
            cs = self.coords[r]
            try:
                out = monitor_round(cs, self.topo, load_of=self._load_of,
                                    eager_refill=self.sc.eager_refill,
                                    single_promotion=self.sc.single_promotion)
            except RegionDead:
                self.emit("alg4", "region_dead", region=r, src_region=r,
                          dst_region=r, round=rnd, t_min=cs.t_min)
                continue
            self.emit("alg4", "round", region=r, src_region=r, dst_region=r,
                      round=rnd, removed=out.removed, promoted=out.promoted,
                      size_before=out.size_before, size_after=out.size_after,
                      alive_before=out.alive_before, degraded=out.degraded,
                      t_min=cs.t_min)

    def _load_of(self, w: int) -> int:
        c = self.topo.cluster_of[w]
        if self.topo.role_map.cluster_leader.get(c) == w:
            return len(self.leader_states[c].pending_broadcasts)
        return 0

    def handle_failure(self, payload: dict):
        spec: FailureSpec = payload["spec"]
        if spec.kind == "worker":
            self.kill_worker(spec.worker)
        elif spec.kind == "region":
            for w in sorted(self.topo.workers_in_region(spec.region)):
                self.kill_worker(w)
        elif spec.kind == "link":
            if spec.action == "jam":
                self.jam[spec.link_class] = spec.drop
                self.emit("kernel", "link_jam", link_class=spec.link_class, drop=spec.drop)
            else:
                self.jam.pop(spec.link_class, None)
                self.emit("kernel", "link_clear", link_class=spec.link_class)
        else:  # adjacency
            a, b = spec.edge
            adj_map = {r: set(ns) for r, ns in self.topo.region_adjacency.items()}
            if spec.action == "add":
                adj_map[a].add(b)
                adj_map[b].add(a)
            else:
                adj_map[a].discard(b)
                adj_map[b].discard(a)
            self.topo.region_adjacency = {r: tuple(sorted(ns)) for r, ns in adj_map.items()}
            self.emit("kernel", "link_change", action=spec.action, edge=list(spec.edge))

    # -- main loop ----------------------------------------------------------

    def schedule_initial(self):
        sc = self.sc
        seq_per_origin: dict[int, int] = {}
        for cmd in sc.commands:
            seq = seq_per_origin.get(cmd.origin, 0)
            seq_per_origin[cmd.origin] = seq + 1
            goals = goal_clusters_for_scope(self.topo, cmd.scope)
            m = new_command(cmd.origin, seq, goals, set(cmd.targets), cmd.payload)
            dest = ("leader", cmd.origin) if sc.strategy == "adjacent" \
                else ("node", (2, cmd.origin))
            self.bump("deliveries_enqueued")
            self.push(cmd.time, EV_DELIVERY,
                      {"dest": dest, "msg": m, "sender": {}, "command": True})
        for spec in sc.failures:
            kind = EV_RECOVERY if (spec.kind == "worker" and spec.action == "revive") \
                else EV_LINK if spec.kind in ("link", "adjacency") else EV_FAILURE
            self.push(spec.time, kind, {"spec": spec})
        n_rounds = int(sc.horizon / sc.round_period + 1e-9)
        for i in range(1, n_rounds + 1):
            self.push(quantize(i * sc.round_period), EV_MAINTENANCE, {"round": i})

    def run(self) -> tuple[list[TraceRecord], MetricsReport]:
        sc = self.sc
        self.emit("kernel", "run_start", strategy=sc.strategy, seed=sc.seed,
                  horizon=sc.horizon, workers=sc.config.n_workers,
                  clusters=sc.config.n_clusters, regions=sc.config.n_regions,
                  route_mode=sc.route_mode)
        if sc.route_mode == hier.MODE_ROOT:
            # literal-root routing deviates from the default pruning behaviour
            self.emit("kernel", "route_mode_root", enabled=True)
        self.schedule_initial()
        while self.heap:
            fire, _seq, kind, payload = self.heap[0]
            if fire > sc.horizon:
                break
            heapq.heappop(self.heap)
            self.now = fire
            if kind == EV_DELIVERY:
                self.handle_delivery(payload)
            elif kind == EV_BROADCAST:
                self.handle_broadcast(payload)
            elif kind == EV_MAINTENANCE:
                self.handle_maintenance(payload)
            elif kind == EV_FAILURE:
                self.handle_failure(payload)
            elif kind == EV_RECOVERY:
                self.revive_worker(payload["spec"].worker)
            else:
                self.handle_failure(payload)

        for _fire, _seq, kind, _payload in self.heap:
            if kind == EV_DELIVERY:
                self.bump("deliveries_inflight")
            elif kind == EV_BROADCAST:
                self.bump("broadcasts_pending")
        self.bump("parked_pending", len(self.parked))

        g = self.counters.get
        conserved = (
            g("deliveries_enqueued", 0) == g("deliveries_completed", 0)
            + g("deliveries_dropped_dead", 0) + g("deliveries_parked", 0)
            + g("deliveries_inflight", 0)
            and g("broadcasts_scheduled", 0) == g("broadcasts_fired", 0)
            + g("broadcasts_cancelled", 0) + g("broadcasts_suppressed", 0)
            + g("broadcasts_pending", 0)
            and g("parked_total", 0) == g("parked_retried_ok", 0)
            + g("parked_failed", 0) + g("parked_pending", 0)
        )
        live = sum(1 for r, cs in self.coords.items() if region_live(cs, self.topo))
        self.emit("kernel", "run_end",
                  live_region_fraction=live / len(self.coords),
                  conservation=dict(sorted(self.counters.items())),
                  conserved=conserved)
        assert conserved, f"message accounting out of balance: {self.counters}"
        report = build_report(self.trace, sc.strategy)
        return self.trace, report


def run(scenario: Scenario) -> tuple[list[TraceRecord], MetricsReport]:
    """Validate and execute one scenario; returns (trace, metrics report)."""
    validate_scenario(scenario)
    return _Kernel(scenario).run()
