import json
import random

import pytest

from virtree.errors import InvalidConfig, NoCandidate, UnknownCluster, UnknownScope
from virtree.topology import (
    HierarchyConfig,
    Topology,
    build_topology,
    derive_seed,
    goal_clusters_for_scope,
    grid_adjacency,
    hierarchy_distance,
    reelect_role,
)


class TestConfig:
    def test_counts_multiply_through(self):
        cfg = HierarchyConfig(workers_per_cluster=2, clusters_per_region=4,
                              regions_per_hub=2, hubs_per_domain=2)
        assert cfg.n_workers == 32
        assert cfg.n_clusters == 16
        assert cfg.n_regions == 4
        assert cfg.n_hubs == 2
        assert cfg.n_domains == 1

    def test_num_layers_range(self):
        with pytest.raises(InvalidConfig):
            HierarchyConfig(workers_per_cluster=2, clusters_per_region=3, num_layers=1)
        with pytest.raises(InvalidConfig):
            HierarchyConfig(workers_per_cluster=2, clusters_per_region=3, num_layers=6)

    def test_zero_counts_rejected(self):
        with pytest.raises(InvalidConfig):
            HierarchyConfig(workers_per_cluster=0, clusters_per_region=3)
        with pytest.raises(InvalidConfig):
            HierarchyConfig(workers_per_cluster=2, clusters_per_region=3, domains=0)

    def test_t_min_bounds(self):
        with pytest.raises(InvalidConfig):
            HierarchyConfig(workers_per_cluster=3, clusters_per_region=3,
                            coordinator_k=3, t_min=4)
        with pytest.raises(InvalidConfig):
            HierarchyConfig(workers_per_cluster=3, clusters_per_region=3,
                            coordinator_k=3, t_min=0)

    def test_k_cannot_exceed_region_size(self):
        with pytest.raises(InvalidConfig):
            HierarchyConfig(workers_per_cluster=2, clusters_per_region=2,
                            coordinator_k=5, t_min=3)


class TestBuild:
    def test_small_plate_counts(self, topo32):
        assert len(topo32.cluster_of) == 32
        assert len(topo32.region_of) == 16
        assert len(topo32.role_map.cluster_leader) == 16
        assert len(topo32.role_map.regional_hub) == 4

    def test_eight_worker_shape_and_role_multiplicity(self):
        cfg = HierarchyConfig(workers_per_cluster=2, clusters_per_region=2,
                              regions_per_hub=1, hubs_per_domain=2,
                              coordinator_k=2, t_min=1)
        topo = build_topology(cfg, seed=1)
        assert cfg.n_workers == 8
        assert len(topo.role_map.cluster_leader) == 4
        assert len(topo.role_map.regional_hub) == 2
        assert len(topo.role_map.local_global) == 2
        assert len(topo.role_map.global_command) == 1
        # the top role piggybacks on a worker that already holds a local-global role
        top = topo.role_map.global_command[0]
        assert top in set(topo.role_map.local_global.values())

    def test_initial_roles_lowest_id(self, topo32):
        for c, leader in topo32.role_map.cluster_leader.items():
            assert leader == min(topo32.workers_in_cluster[c])
        for r, hub in topo32.role_map.regional_hub.items():
            assert hub == min(topo32.workers_in_region(r))

    def test_build_deterministic(self):
        cfg = HierarchyConfig(workers_per_cluster=2, clusters_per_region=4,
                              regions_per_hub=2)
        a = build_topology(cfg, seed=99)
        b = build_topology(cfg, seed=99)
        dump = lambda t: json.dumps(t.to_dict(), sort_keys=True)
        assert dump(a) == dump(b)
        c = build_topology(cfg, seed=100)
        assert dump(a) != dump(c)  # seed feeds the energy scalars

    def test_energy_bounds(self, topo32):
        assert all(0.2 <= e <= 1.0 for e in topo32.energy.values())

    def test_everyone_starts_alive(self, topo32):
        assert topo32.alive == set(range(32))

    def test_truncated_layers_keep_containment(self):
        cfg = HierarchyConfig(workers_per_cluster=2, clusters_per_region=2,
                              regions_per_hub=2, hubs_per_domain=2, num_layers=3,
                              coordinator_k=2, t_min=1)
        topo = build_topology(cfg, seed=3)
        assert topo.role_map.local_global == {}
        assert topo.role_map.global_command == {}
        # containment stays full depth even without the upper roles
        assert len(topo.hub_of) == cfg.n_regions
        assert len(topo.domain_of) == cfg.n_hubs

    def test_dict_round_trip(self, topo32):
        topo32.mark_dead(5)
        reelect_role(topo32, 2, 2)
        back = Topology.from_dict(topo32.to_dict())
        assert back.to_dict() == topo32.to_dict()

    def test_scope_chain_total(self, topo32):
        for w in topo32.workers:
            c = topo32.cluster_of[w]
            chain = topo32.scope_chain(c)
            assert chain[0] == c
            assert chain[1] == topo32.region_of[c]


class TestDeriveSeed:
    def test_stable_and_label_sensitive(self):
        assert derive_seed(1, "a") == derive_seed(1, "a")
        assert derive_seed(1, "a") != derive_seed(1, "b")
        assert derive_seed(1, "a") != derive_seed(2, "a")
        assert 0 <= derive_seed(12345, "x", 7) < 2 ** 64


class TestGridAdjacency:
    def test_single_region(self):
        assert grid_adjacency(1) == {0: ()}

    def test_two_by_two(self):
        adj = grid_adjacency(4)
        assert adj == {0: (1, 2), 1: (0, 3), 2: (0, 3), 3: (1, 2)}

    def test_ragged_last_row(self):
        assert grid_adjacency(3) == {0: (1, 2), 1: (0,), 2: (0,)}

    def test_symmetric_no_self_loops(self):
        adj = grid_adjacency(12)
        for r, nbrs in adj.items():
            assert r not in nbrs
            for n in nbrs:
                assert r in adj[n]


class TestHierarchyDistance:
    def test_ladder(self, two_domain_topo):
        topo = two_domain_topo
        # clusters: 2 per region, 2 regions per hub, 2 hubs per domain, 2 domains
        assert hierarchy_distance(topo, 0, 0) == 0
        assert hierarchy_distance(topo, 0, 1) == 1   # same region
        assert hierarchy_distance(topo, 0, 2) == 2   # same hub
        assert hierarchy_distance(topo, 0, 4) == 3   # same domain
        assert hierarchy_distance(topo, 0, 8) == 4   # other domain

    def test_symmetric(self, two_domain_topo):
        topo = two_domain_topo
        for a in (0, 3, 9):
            for b in (1, 8, 15):
                assert hierarchy_distance(topo, a, b) == hierarchy_distance(topo, b, a)

    def test_zero_iff_equal(self, two_domain_topo):
        for a in range(16):
            for b in range(16):
                d = hierarchy_distance(two_domain_topo, a, b)
                assert (d == 0) == (a == b)

    def test_unknown_cluster(self, topo32):
        with pytest.raises(UnknownCluster):
            hierarchy_distance(topo32, 0, 999)


class TestGoalClusters:
    def test_region_scope(self, topo32):
        assert goal_clusters_for_scope(topo32, ("region", 1)) == {4, 5, 6, 7}

    def test_cluster_scope_singleton(self, topo32):
        assert goal_clusters_for_scope(topo32, ("cluster", 9)) == {9}

    def test_hub_and_domain(self, topo32):
        assert goal_clusters_for_scope(topo32, ("hub", 0)) == set(range(8))
        assert goal_clusters_for_scope(topo32, ("domain", 0)) == set(range(16))

    def test_global_covers_everything(self, topo32):
        assert goal_clusters_for_scope(topo32, ("global",)) == set(range(16))

    def test_unknown_scope(self, topo32):
        with pytest.raises(UnknownScope):
            goal_clusters_for_scope(topo32, ("continent", 0))
        with pytest.raises(UnknownScope):
            goal_clusters_for_scope(topo32, ("region", 99))
        with pytest.raises(UnknownScope):
            goal_clusters_for_scope(topo32, ("region",))


class TestReelection:
    def test_two_worker_cluster_survivor_takes_over(self, topo32):
        assert topo32.role_map.cluster_leader[0] == 0
        topo32.mark_dead(0)
        reelect_role(topo32, 2, 0)
        assert topo32.role_map.cluster_leader[0] == 1

    def test_hub_election_picks_lowest_leader(self, topo32):
        # region 0 leaders are 0,2,4,6; drop the hub holder and its cluster
        topo32.mark_dead(0)
        topo32.mark_dead(1)
        with pytest.raises(NoCandidate):
            reelect_role(topo32, 2, 0)
        reelect_role(topo32, 3, 0)
        assert topo32.role_map.regional_hub[0] == 2

    def test_no_candidate_vacates_binding(self, topo32):
        topo32.mark_dead(4)
        topo32.mark_dead(5)
        with pytest.raises(NoCandidate):
            reelect_role(topo32, 2, 2)
        assert 2 not in topo32.role_map.cluster_leader

    def test_other_bindings_untouched(self, topo32):
        before = dict(topo32.role_map.cluster_leader)
        topo32.mark_dead(6)
        reelect_role(topo32, 2, 3)
        after = topo32.role_map.cluster_leader
        assert after[3] == 7
        assert {c: w for c, w in after.items() if c != 3} == \
               {c: w for c, w in before.items() if c != 3}

    def test_layer_above_build_rejected(self):
        cfg = HierarchyConfig(workers_per_cluster=2, clusters_per_region=2,
                              num_layers=3, coordinator_k=2, t_min=1)
        topo = build_topology(cfg, seed=1)
        with pytest.raises(UnknownScope):
            reelect_role(topo, 4, 0)

    def test_holders_stay_alive_and_in_scope_under_attrition(self):
        cfg = HierarchyConfig(workers_per_cluster=3, clusters_per_region=2,
                              regions_per_hub=2, hubs_per_domain=2,
                              coordinator_k=3, t_min=2)
        rng = random.Random(2024)
        for trial in range(20):
            topo = build_topology(cfg, seed=trial)
            victims = rng.sample(range(cfg.n_workers), k=cfg.n_workers // 2)
            for w in victims:
                held = topo.roles_held_by(w)
                topo.mark_dead(w)
                for layer, scope in held:
                    try:
                        reelect_role(topo, layer, scope)
                    except NoCandidate:
                        pass
            for c, leader in topo.role_map.cluster_leader.items():
                assert topo.is_alive(leader)
                assert topo.cluster_of[leader] == c
            for r, hub in topo.role_map.regional_hub.items():
                assert topo.is_alive(hub)
                assert topo.region_of_worker(hub) == r
            for h, lg in topo.role_map.local_global.items():
                assert topo.is_alive(lg)
                assert topo.hub_of[topo.region_of_worker(lg)] == h
