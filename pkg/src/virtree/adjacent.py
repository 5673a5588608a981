"""Deferred adjacent-region dissemination (worker-mediated forwarding).

Two cooperating receive paths:

* every worker applies three independent checks to each incoming copy:
  execute if personally targeted, report upward if its cluster has not seen
  the message and the copy was not just broadcast by its own leader, and
  rebroadcast to all reachable workers if the copy is flagged and came from
  its own leader;
* every cluster leader deduplicates, marks its cluster visited, delivers to
  goal targets, and defers its own worker broadcast by
  alpha * distance-to-nearest-unexecuted-goal + beta * local_load + U[0, eps)
  so that copies already heading toward the goal win the race.

Functions here are pure decision makers; the simulation kernel owns delivery,
scheduling and the deduplication that needs global state.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from .errors import InvalidConfig
from .messages import Message, MsgId, unexecuted_goals
from .topology import Topology, WorkerId, ClusterId, hierarchy_distance


@dataclass(frozen=True)
class DelayParams:
    """Coefficients of the deferred-forwarding delay. All must be >= 0."""

    alpha: float = 1.0
    beta: float = 0.1
    epsilon: float = 0.05

    def __post_init__(self):
        for name in ("alpha", "beta", "epsilon"):
            if getattr(self, name) < 0:
                raise InvalidConfig(f"delay parameter {name} must be >= 0")


@dataclass
class LeaderState:
    """Per-cluster leader bookkeeping.

    Keyed by cluster, not by holder, so a re-elected leader inherits the
    processed set and per-message idempotence survives failover.  local_load
    is the number of broadcasts currently pending, the quantity the delay
    formula charges for.
    """

    cluster_id: ClusterId
    processed_msgs: set[MsgId] = field(default_factory=set)
    pending_broadcasts: dict[MsgId, float] = field(default_factory=dict)

    @property
    def local_load(self) -> int:
        return len(self.pending_broadcasts)


# Worker-side actions, returned in this order when several apply.
@dataclass(frozen=True)
class ExecuteLocally:
    worker: WorkerId


@dataclass(frozen=True)
class ReportToLeader:
    cluster: ClusterId


@dataclass(frozen=True)
class BroadcastToReachable:
    workers: tuple[WorkerId, ...]


def reachable_workers(w: WorkerId, topo: Topology) -> list[WorkerId]:
    """Alive workers in w's region and all adjacent regions, excluding w."""
    r = topo.region_of_worker(w)
    out = []
    for region in sorted((r, *topo.region_adjacency[r])):
        for peer in topo.workers_in_region(region):
            if peer != w and topo.is_alive(peer):
                out.append(peer)
    return sorted(out)


def worker_on_receive(w: WorkerId, m: Message, topo: Topology) -> list:
    """Apply the three worker checks to one received copy.

    The checks are independent; any subset may fire.  Execution is emitted on
    every targeted receipt and the kernel keeps it idempotent per worker.
    """
    cluster = topo.cluster_of[w]
    actions = []
    if w in m.target_worker_ids:
        actions.append(ExecuteLocally(w))
    if cluster not in m.visited_cluster_ids and m.last_sent_cluster_id != cluster:
        actions.append(ReportToLeader(cluster))
    if m.forward_flag and m.last_sent_cluster_id == cluster:
        actions.append(BroadcastToReachable(tuple(reachable_workers(w, topo))))
    return actions


def min_goal_distance(topo: Topology, cluster: ClusterId, goals) -> int:
    return min(hierarchy_distance(topo, cluster, g) for g in goals)


def compute_delay(params: DelayParams, distance: int, load: int,
                  rng: random.Random) -> float:
    """alpha*distance + beta*load + uniform jitter from [0, epsilon).

    Always consumes exactly one draw from rng so stream positions do not
    depend on the parameter values.
    """
    return params.alpha * distance + params.beta * load + rng.random() * params.epsilon


@dataclass
class LeaderDecision:
    """Outcome of one deferred-mode leader receive.

    outcome: "drop" | "stop" | "scheduled"
    message: the leader's updated copy (visited/executed extended); None on drop
    delivered_workers: workers handed the command locally (goal cluster only)
    """

    outcome: str
    reason: str = ""
    message: Message | None = None
    delivered_workers: tuple[WorkerId, ...] = ()
    executed_here: bool = False
    distance: int | None = None
    delay: float | None = None


def _local_delivery(m: Message, cluster: ClusterId, topo: Topology) -> tuple[WorkerId, ...]:
    members = topo.workers_in_cluster[cluster]
    if m.target_worker_ids:
        chosen = [w for w in members if w in m.target_worker_ids and topo.is_alive(w)]
    else:
        # cluster-level command: every alive member takes it
        chosen = [w for w in members if topo.is_alive(w)]
    return tuple(chosen)


def leader_on_receive_deferred(state: LeaderState, m: Message, topo: Topology,
                               params: DelayParams, rng: random.Random) -> LeaderDecision:
    """Deferred-routing receive at a cluster leader.

    Drops duplicates (already processed, or own cluster already in the copy's
    visited set), marks the cluster visited, delivers and marks executed when
    the cluster is a goal, then either stops (no unexecuted goals left) or
    computes a deferred broadcast delay.  The caller schedules the broadcast
    and maintains pending_broadcasts.
    """
    c = state.cluster_id
    if m.msg_id in state.processed_msgs:
        return LeaderDecision(outcome="drop", reason="processed")
    if c in m.visited_cluster_ids:
        state.processed_msgs.add(m.msg_id)
        return LeaderDecision(outcome="drop", reason="visited")
    state.processed_msgs.add(m.msg_id)

    m2 = m.copy(visited_cluster_ids=m.visited_cluster_ids | {c})
    delivered: tuple[WorkerId, ...] = ()
    executed_here = False
    if c in m2.goal_cluster_ids:
        delivered = _local_delivery(m2, c, topo)
        m2 = m2.copy(executed_cluster_ids=m2.executed_cluster_ids | {c})
        executed_here = True

    remaining = unexecuted_goals(m2)
    if not remaining:
        return LeaderDecision(outcome="stop", message=m2,
                              delivered_workers=delivered, executed_here=executed_here)

    dist = min_goal_distance(topo, c, remaining)
    delay = compute_delay(params, dist, state.local_load, rng)
    return LeaderDecision(outcome="scheduled", message=m2,
                          delivered_workers=delivered, executed_here=executed_here,
                          distance=dist, delay=delay)


def worker_broadcast(state: LeaderState, m: Message) -> Message:
    """Build the flagged copy a leader hands to its own workers at fire time."""
    return m.copy(
        hop_count=m.hop_count + 1,
        last_sent_cluster_id=state.cluster_id,
        forward_flag=True,
    )
