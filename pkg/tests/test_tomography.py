from fractions import Fraction

import numpy as np
import pytest

import delaytomo.tomography as tg
from delaytomo.network import Network, path_delay
from delaytomo.sensing import DelayVector, build_matrix, encode
from delaytomo.topology import complete_graph, erdos_renyi, line_graph


def k4():
    return complete_graph(4)


class TestSpanningPath:
    def test_single_link_support(self):
        net = line_graph(5)
        p = tg.build_spanning_path(net, {2})
        assert p.nodes == (2, 3) and p.length == 1

    def test_covers_k4_tour_support(self):
        # The four-link tour support on K4 admits the walk 3-0-1-2-3; any
        # valid spanning walk must cover all four links.
        net = k4()
        support = {net.link_id(3, 0), net.link_id(0, 1), net.link_id(1, 2), net.link_id(2, 3)}
        p = tg.build_spanning_path(net, support)
        assert p.length >= 4
        mm = net.multiplicities(p)
        assert all(mm.links.get(e, 0) >= 1 for e in support)
        net.make_path(p.nodes)  # structurally a walk

    @pytest.mark.parametrize("order", ["arbitrary", "nearest"])
    @pytest.mark.parametrize("seed", [0, 1, 2, 3])
    def test_random_supports_all_covered(self, order, seed):
        rng = np.random.default_rng(seed)
        net = erdos_renyi(40, 0.12, rng)
        support = {int(e) for e in rng.choice(net.n_links, 9, replace=False)}
        p = tg.build_spanning_path(net, support, order=order, rng=rng)
        mm = net.multiplicities(p)
        assert all(mm.links.get(e, 0) >= 1 for e in support)
        # bridged one-by-one: every bridge costs at most the diameter
        assert p.length <= len(support) * (net.diameter() + 1)

    def test_empty_support_rejected(self):
        with pytest.raises(ValueError):
            tg.build_spanning_path(line_graph(3), set())


class TestWeightedPath:
    def test_zero_weights_reproduce_spanning(self):
        net = k4()
        p = net.make_path([3, 0, 1, 2, 3])
        q = tg.build_weighted_path(net, p, {})
        assert q.nodes == p.nodes

    def test_k4_tour_with_unit_loops(self):
        # Loops on the first and third backbone links triple their
        # multiplicities: (1,0,1,0,1,1) pattern becomes (3,0,3,0,1,1).
        net = k4()
        p = net.make_path([3, 0, 1, 2, 3])
        w = {net.link_id(3, 0): 1, net.link_id(1, 2): 1}
        q = tg.build_weighted_path(net, p, w)
        mm = net.multiplicities(q)
        assert mm.links[net.link_id(3, 0)] == 3
        assert mm.links[net.link_id(1, 2)] == 3
        assert mm.links[net.link_id(0, 1)] == 1
        assert mm.links[net.link_id(2, 3)] == 1
        assert q.length == p.length + 2 * sum(w.values())

    def test_k4_tour_with_deeper_loops(self):
        # Two loops on the first link, one on the third: multiplicities
        # (5,0,3,0,1,1), and the half-difference measures 2*d1 + d3.
        net = k4()
        p = net.make_path([3, 0, 1, 2, 3])
        e1, e3 = net.link_id(3, 0), net.link_id(1, 2)
        q = tg.build_weighted_path(net, p, {e1: 2, e3: 1})
        mm = net.multiplicities(q)
        assert mm.links[e1] == 5 and mm.links[e3] == 3
        d = [2, 3, 5, 7, 11, 13]
        half = tg.subtract_measurements(path_delay(net, q, d), path_delay(net, p, d))
        assert half == 2 * d[e1] + 1 * d[e3]

    def test_loops_attach_at_first_visit_only(self):
        net = line_graph(3)
        p = net.make_path([0, 1, 2, 1, 0])  # link (0,1) visited twice
        q = tg.build_weighted_path(net, p, {net.link_id(0, 1): 3})
        mm = net.multiplicities(q)
        assert mm.links[net.link_id(0, 1)] == 2 + 2 * 3

    def test_weight_off_path_rejected(self):
        net = line_graph(4)
        p = net.make_path([0, 1])
        with pytest.raises(ValueError):
            tg.build_weighted_path(net, p, {net.link_id(2, 3): 1})

    @pytest.mark.parametrize("seed", [5, 6, 7])
    def test_multiplicity_identity_random(self, seed):
        rng = np.random.default_rng(seed)
        net = erdos_renyi(30, 0.15, rng)
        support = [int(e) for e in rng.choice(net.n_links, 6, replace=False)]
        p = tg.build_spanning_path(net, support, rng=rng)
        w = {e: int(rng.integers(1, 5)) for e in support}
        q = tg.build_weighted_path(net, p, w)
        base, got = net.multiplicities(p), net.multiplicities(q)
        for e in set(base.links) | set(got.links):
            assert got.links.get(e, 0) == base.links.get(e, 0) + 2 * w.get(e, 0)


class TestSubtract:
    def test_equal_delays_give_zero(self):
        assert tg.subtract_measurements(7, 7) == 0

    def test_exact_halving(self):
        assert tg.subtract_measurements(10, 3) == Fraction(7, 2)
        assert tg.subtract_measurements(11, 3) == 4
        assert tg.subtract_measurements(1.0, 0.0) == 0.5

    @pytest.mark.parametrize("seed", [0, 1])
    def test_recovers_dot_product(self, seed):
        rng = np.random.default_rng(seed)
        net = erdos_renyi(25, 0.2, rng)
        support = [int(e) for e in rng.choice(net.n_links, 5, replace=False)]
        w = {e: int(rng.integers(1, 4)) for e in support}
        d = [int(rng.integers(0, 9)) for _ in range(net.n_links)]
        p = tg.build_spanning_path(net, support, rng=rng)
        q = tg.build_weighted_path(net, p, w)
        got = tg.subtract_measurements(path_delay(net, q, d), path_delay(net, p, d))
        assert got == sum(w[e] * d[e] for e in support)


class TestNodeWeightedPath:
    def test_zero_weights_reproduce_spanning(self):
        net = k4()
        p = net.make_path([0, 1, 2])
        q = tg.build_node_weighted_path(net, p, {}, {})
        assert q.nodes == p.nodes

    def test_star_center_loop_measures_center_delay(self):
        # Star: center 0, leaves 1..3; loop partner is a zero-delay leaf.
        net = Network(4, [(0, 1), (0, 2), (0, 3)])
        p = net.make_path([0])
        partners, bad = tg.choose_loop_partners(
            net, [0], policy="oracle_noncongested",
            truth=DelayVector.from_sparse(4, {0: 9}),
        )
        assert bad == 0
        q = tg.build_node_weighted_path(net, p, {0: 1}, partners)
        dv = [9, 0, 0, 0]
        half = tg.subtract_measurements(
            path_delay(net, q, dv, "nodes"), path_delay(net, p, dv, "nodes")
        )
        assert half == 9

    def test_visit_counts_rise_by_twice_weight(self):
        net = Network(4, [(0, 1), (0, 2), (0, 3)])
        p = net.make_path([1, 0, 2])
        q = tg.build_node_weighted_path(net, p, {0: 2}, {0: 3})
        base, got = net.multiplicities(p), net.multiplicities(q)
        assert got.nodes[0] == base.nodes[0] + 4
        assert got.nodes[3] == base.nodes.get(3, 0) + 4

    def test_congested_partner_pollutes_measurement(self):
        # Loop at node 0 bounces through congested node 1: the recovered
        # term is w*(d0 + d1), not w*d0 -- the isolation failure mode.
        net = line_graph(3)
        p = net.make_path([0])
        truth = DelayVector.from_sparse(3, {0: 5, 1: 7})
        partners, bad = tg.choose_loop_partners(
            net, [0], policy="oracle_noncongested", truth=truth
        )
        assert bad == 1  # node 0 has no non-congested neighbor
        q = tg.build_node_weighted_path(net, p, {0: 2}, partners)
        half = tg.subtract_measurements(
            path_delay(net, q, truth, "nodes"), path_delay(net, p, truth, "nodes")
        )
        assert half == 2 * (5 + 7)

    def test_weight_off_walk_rejected(self):
        net = line_graph(4)
        with pytest.raises(ValueError):
            tg.build_node_weighted_path(net, net.make_path([0, 1]), {3: 1}, {3: 2})


class TestRecover:
    def test_zero_truth(self):
        net = erdos_renyi(30, 0.15, np.random.default_rng(0))
        m = build_matrix(net.n_links, 3, 4, seed=0)
        res = tg.recover(net, m, DelayVector.zeros(net.n_links))
        assert res.status == "success"
        assert all(v == 0 for v in res.estimate.entries)

    def test_single_congested_link(self):
        net = erdos_renyi(12, 0.35, np.random.default_rng(1))
        m = build_matrix(net.n_links, 1, 4, seed=1)
        truth = DelayVector.from_sparse(net.n_links, {5: 42})
        res = tg.recover(net, m, truth)
        assert res.status == "success"
        assert res.estimate.entries == truth.entries
        assert res.metrics.probes <= 2 * m.group_height * m.n_groups
        assert res.metrics.probes == (1 + m.group_height) * m.n_groups

    @pytest.mark.parametrize("builder", ["naive", "steiner"])
    def test_plan_identity_exact(self, builder):
        # The tomography-derived measurements equal the direct product
        # entrywise, for both path builders.
        rng = np.random.default_rng(3)
        net = erdos_renyi(40, 0.12, rng)
        m = build_matrix(net.n_links, 4, 4, seed=3)
        support = rng.choice(net.n_links, 4, replace=False)
        truth = DelayVector.from_sparse(
            net.n_links, {int(j): int(rng.integers(1, 101)) for j in support}
        )
        plan, _ = tg.build_plan(net, m, path_builder=builder)
        y_paths = tg.simulate_outputs(net, m, plan, truth)
        assert y_paths.groups == encode(m, truth).groups

    def test_steiner_and_naive_agree_on_estimate(self):
        rng = np.random.default_rng(4)
        net = erdos_renyi(35, 0.15, rng)
        m = build_matrix(net.n_links, 3, 4, seed=4)
        support = rng.choice(net.n_links, 3, replace=False)
        truth = DelayVector.from_sparse(
            net.n_links, {int(j): int(rng.integers(1, 101)) for j in support}
        )
        a = tg.recover(net, m, truth, path_builder="naive")
        b = tg.recover(net, m, truth, path_builder="steiner")
        assert a.status == b.status == "success"
        assert a.estimate.entries == b.estimate.entries == truth.entries

    def test_hop_bound_relative_to_spanning(self):
        net = erdos_renyi(40, 0.12, np.random.default_rng(6))
        m = build_matrix(net.n_links, 4, 4, seed=6)
        truth = DelayVector.zeros(net.n_links)
        res = tg.recover(net, m, truth)
        cap = 1 + 2 * m.weight_cap
        for g in res.plan.groups:
            for q in g.weighted:
                assert q.length <= g.spanning.length * cap

    def test_matrix_network_size_mismatch(self):
        net = line_graph(5)
        m = build_matrix(7, 1, 2, seed=0)
        with pytest.raises(ValueError):
            tg.recover(net, m, DelayVector.zeros(7))

    def test_float_truth_uses_float_decode(self):
        net = erdos_renyi(30, 0.15, np.random.default_rng(8))
        m = build_matrix(net.n_links, 3, 4, seed=8)
        rng = np.random.default_rng(8)
        support = rng.choice(net.n_links, 3, replace=False)
        truth = DelayVector.from_sparse(
            net.n_links, {int(j): float(rng.random() + 0.5) for j in support}
        )
        res = tg.recover(net, m, truth)
        assert res.status == "success"
        assert res.estimate.entries == pytest.approx(truth.entries, rel=1e-7)

    def test_node_mode_recovery_with_isolation(self):
        from delaytomo.harness import sample_truth

        net = erdos_renyi(80, 0.1, np.random.default_rng(11))
        m = build_matrix(net.n_nodes, 4, 4, seed=11)
        truth = sample_truth(
            net.n_nodes, 4, np.random.default_rng(11), isolation=True, net=net
        )
        res = tg.recover(net, m, truth, mode="nodes", loop_policy="oracle_noncongested")
        assert res.metrics.isolation_violations == 0
        assert res.status == "success"
        assert res.estimate.entries == truth.entries

    def test_node_mode_flags_adversarial_instance(self):
        # All of node 0's neighbors congested: violation flagged and the
        # affected coordinate comes out wrong (or the decode fails).
        net = Network(7, [(0, 1), (0, 2), (0, 3), (0, 4), (4, 5), (5, 6)])
        truth = DelayVector.from_sparse(7, {0: 5, 1: 3, 2: 4, 3: 9, 4: 2})
        m = build_matrix(7, 5, 4, seed=3)
        res = tg.recover(net, m, truth, mode="nodes", loop_policy="oracle_noncongested")
        assert res.metrics.isolation_violations > 0
        assert res.status != "success" or res.estimate[0] != truth[0]


class TestPlanRecords:
    def test_record_shape_and_walk_validity(self):
        net = erdos_renyi(25, 0.2, np.random.default_rng(2))
        m = build_matrix(net.n_links, 2, 3, seed=2)
        plan, _ = tg.build_plan(net, m)
        records = list(tg.plan_records(plan, net))
        spanning = [r for r in records if r["kind"] == "spanning"]
        weighted = [r for r in records if r["kind"] == "weighted"]
        assert len(spanning) == len(plan.groups)
        assert len(weighted) == len(plan.groups) * m.group_height
        for rec in records:
            net.make_path(rec["walk"])
            assert (rec["subrow"] is None) == (rec["kind"] == "spanning")
        for rec in weighted:
            assert all(lp["count"] >= 1 for lp in rec["loops"])
