"""Region-scoped redundant coordinator maintenance.

Each region keeps K active coordinators; peers monitor each other once per
maintenance round, remove the failed, and when fewer than T_min remain promote
the fittest region-local candidates.  Nothing here ever looks outside the
region, which is what keeps repair traffic contained.

A region stays live while at least one coordinator is alive, so independent
failures with probability p leave it live with probability 1 - p**K.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from .errors import RegionDead
from .topology import (
    HierarchyConfig,
    RegionId,
    Topology,
    WorkerId,
    build_topology,
    derive_seed,
)


@dataclass
class CoordinatorSet:
    """Active coordinator roster for one region."""

    region: RegionId
    k: int
    t_min: int
    active: list[WorkerId]
    health: dict[WorkerId, bool] = field(default_factory=dict)
    metric: dict[WorkerId, float] = field(default_factory=dict)

    @classmethod
    def initial(cls, topo: Topology, region: RegionId) -> "CoordinatorSet":
        members = sorted(topo.workers_in_region(region))
        k = topo.config.coordinator_k
        return cls(region=region, k=k, t_min=topo.config.t_min, active=members[:k])


def candidate_metric(topo: Topology, w: WorkerId, load: int = 0) -> float:
    """Fitness of a promotion candidate.

    0.5 * connectivity + 0.3 * (1 - load_norm) + 0.2 * energy.  Connectivity
    is the alive fraction of the worker's region peers; load is normalised as
    load / (load + 1) so any pending-work count maps into [0, 1).
    """
    region = topo.region_of_worker(w)
    peers = [p for p in topo.workers_in_region(region) if p != w]
    connectivity = (sum(1 for p in peers if topo.is_alive(p)) / len(peers)) if peers else 1.0
    load_norm = load / (load + 1)
    return 0.5 * connectivity + 0.3 * (1.0 - load_norm) + 0.2 * topo.energy[w]


def region_live(cs: CoordinatorSet, topo: Topology) -> bool:
    """True while at least one active coordinator is alive (safety floor)."""
    return any(topo.is_alive(w) for w in cs.active)


def needs_reselection(cs: CoordinatorSet, topo: Topology) -> bool:
    """True iff alive actives fell below T_min; exactly T_min is still fine."""
    return sum(1 for w in cs.active if topo.is_alive(w)) < cs.t_min


def select_replacements(cs: CoordinatorSet, topo: Topology, need: int,
                        load_of=None) -> list[WorkerId]:
    """Pick up to `need` promotion candidates, best metric first.

    Candidates are alive region workers not already in the roster; ties break
    toward the lower worker id.  May return fewer than asked when the region
    is running out of healthy workers.
    """
    if need <= 0:
        return []
    roster = set(cs.active)
    scored = []
    for w in sorted(topo.workers_in_region(cs.region)):
        if w in roster or not topo.is_alive(w):
            continue
        load = load_of(w) if load_of else 0
        m = candidate_metric(topo, w, load)
        cs.metric[w] = m
        scored.append((-m, w))
    scored.sort()
    return [w for _, w in scored[:need]]


@dataclass
class RoundOutcome:
    region: RegionId
    removed: list[WorkerId]
    promoted: list[WorkerId]
    size_before: int
    size_after: int
    alive_before: int
    degraded: bool


def monitor_round(cs: CoordinatorSet, topo: Topology, load_of=None,
                  eager_refill: bool = False,
                  single_promotion: bool = False) -> RoundOutcome:
    """One synchronized maintenance round for a region.

    Removes coordinators that died since the previous round (one-round
    detection), then refills toward T_min (or K with eager_refill) when the
    alive count breached T_min.  single_promotion caps the refill at one
    promotion per round.  Raises RegionDead when no alive coordinator remains
    to run the round at all.

    Promotion only edits the roster: virtual-role bindings are left exactly
    as they were.
    """
    size_before = len(cs.active)
    alive = [w for w in cs.active if topo.is_alive(w)]
    alive_before = len(alive)
    if alive_before == 0:
        cs.health = {w: False for w in cs.active}
        raise RegionDead(f"region {cs.region} has no alive coordinator")

    removed = [w for w in cs.active if not topo.is_alive(w)]
    cs.active = alive
    cs.health = {w: True for w in cs.active}

    promoted: list[WorkerId] = []
    degraded = False
    if len(cs.active) < cs.t_min:
        target = cs.k if eager_refill else cs.t_min
        need = target - len(cs.active)
        if single_promotion:
            need = min(need, 1)
        promoted = select_replacements(cs, topo, need, load_of)
        cs.active.extend(promoted)
        for w in promoted:
            cs.health[w] = True
        degraded = len(cs.active) < cs.t_min

    return RoundOutcome(
        region=cs.region,
        removed=removed,
        promoted=promoted,
        size_before=size_before,
        size_after=len(cs.active),
        alive_before=alive_before,
        degraded=degraded,
    )


def predicted_liveness(p: float, k: int) -> float:
    """Closed-form region liveness 1 - p**k for failure probability p."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"failure probability must lie in [0, 1], got {p}")
    if k < 1:
        raise ValueError(f"coordinator count must be >= 1, got {k}")
    return 1.0 - p ** k


def liveness_trials(p: float, k: int, trials: int, seed: int) -> list[bool]:
    """Monte-Carlo region liveness: each trial fails coordinators iid with p.

    Runs against a real single-region roster and region_live, drawing from
    one sha256-derived stream, so results are reproducible from (p, k, seed)
    alone.  Kept simulator-free on purpose: the validation budget is 1e5
    trials per parameter point.
    """
    predicted_liveness(p, k)  # reuse the argument checks
    cfg = HierarchyConfig(workers_per_cluster=k, clusters_per_region=1,
                          coordinator_k=k, t_min=1)
    topo = build_topology(cfg, seed)
    cs = CoordinatorSet.initial(topo, 0)
    rng = random.Random(derive_seed(seed, "liveness", k, repr(p)))
    out = []
    for _ in range(trials):
        topo.alive = {w for w in cs.active if rng.random() >= p}
        out.append(region_live(cs, topo))
    return out
