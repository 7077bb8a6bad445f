"""Social graph: structure, classification, redistribution, weight algebra."""

import random
from fractions import Fraction

import pytest

from sociogrid.social import (
    AGENT_LAYER,
    CONNECTION,
    GROUP_LAYER,
    INDEPENDENT,
    INEQUALITY,
    ISOLATION,
    OVERLAPPING,
    UNCLASSIFIED,
    DegreeStats,
    SocialGraph,
    SocialGraphError,
    classify_structure,
    degree_stats,
    merge_weights,
    observation_sources,
    redistribute,
)


def agents_only(n):
    g = SocialGraph()
    for i in range(n):
        g.add_node(f"a{i}", AGENT_LAYER)
    return g


def one_group(weights: dict[str, Fraction | None]):
    g = agents_only(len(weights))
    g.add_node("g0", GROUP_LAYER)
    for agent, w in weights.items():
        g.join_group(agent, "g0", w)
    return g


class TestGraphBasics:
    def test_node_layer_conflict(self):
        g = SocialGraph()
        g.add_node("x", AGENT_LAYER)
        g.add_node("x", AGENT_LAYER)  # idempotent
        with pytest.raises(SocialGraphError):
            g.add_node("x", GROUP_LAYER)

    def test_edge_requires_endpoints(self):
        g = agents_only(1)
        with pytest.raises(SocialGraphError):
            g.add_edge("a0", "ghost")

    def test_self_edge_rejected(self):
        g = agents_only(1)
        with pytest.raises(SocialGraphError):
            g.add_edge("a0", "a0")

    def test_weight_range(self):
        g = agents_only(2)
        with pytest.raises(SocialGraphError):
            g.add_edge("a0", "a1", reward_weight=Fraction(3, 2))

    def test_remove_node_drops_incident_edges(self):
        g = agents_only(3)
        g.add_edge("a0", "a1")
        g.add_edge("a1", "a2")
        g.add_edge("a2", "a0")
        g.remove_node("a1")
        assert set(g.edges) == {("a2", "a0")}

    def test_membership_queries(self):
        g = one_group({"a0": None, "a1": None})
        g.add_node("g1", GROUP_LAYER)
        g.join_group("a1", "g1")
        assert g.members_of("g0") == ["a0", "a1"]
        assert g.groups_of("a1") == ["g0", "g1"]
        assert g.groups_of("a0") == ["g0"]

    def test_snapshot_round_trip(self):
        g = one_group({"a0": Fraction(2, 3), "a1": Fraction(1, 3)})
        g.add_edge("a0", "a1", share_observation=True)
        back = SocialGraph.from_snapshot(g.snapshot())
        assert back.layers == g.layers
        assert back.edges == g.edges
        assert back.snapshot() == g.snapshot()


class TestMemberWeights:
    def test_equal_split_when_unset(self):
        g = one_group({"a0": None, "a1": None, "a2": None})
        assert g.member_weights("g0") == {
            "a0": Fraction(1, 3),
            "a1": Fraction(1, 3),
            "a2": Fraction(1, 3),
        }

    def test_explicit_weights_returned_exactly(self):
        g = one_group({"a0": Fraction(2, 5), "a1": Fraction(3, 5)})
        assert g.member_weights("g0") == {"a0": Fraction(2, 5), "a1": Fraction(3, 5)}

    def test_bad_sum_rejected(self):
        g = one_group({"a0": Fraction(1, 2), "a1": Fraction(1, 4)})
        with pytest.raises(SocialGraphError):
            g.member_weights("g0")

    def test_empty_group(self):
        g = agents_only(1)
        g.add_node("g0", GROUP_LAYER)
        assert g.member_weights("g0") == {}


class TestClassification:
    def test_isolation(self):
        assert classify_structure(agents_only(4)) == ISOLATION

    def test_connection(self):
        g = agents_only(4)
        g.add_edge("a0", "a1", share_observation=True)
        assert classify_structure(g) == CONNECTION

    def test_independent_group(self):
        g = agents_only(4)
        for gid, members in (("g0", ["a0", "a1"]), ("g1", ["a2", "a3"])):
            g.add_node(gid, GROUP_LAYER)
            for m in members:
                g.join_group(m, gid)
        assert classify_structure(g) == INDEPENDENT

    def test_overlapping_group(self):
        g = agents_only(3)
        for gid in ("g0", "g1"):
            g.add_node(gid, GROUP_LAYER)
        g.join_group("a0", "g0")
        g.join_group("a1", "g0")
        g.join_group("a1", "g1")  # a1 belongs to both
        g.join_group("a2", "g1")
        assert classify_structure(g) == OVERLAPPING

    def test_inequality(self):
        g = one_group(
            {
                "a0": Fraction(2, 5),
                "a1": Fraction(3, 10),
                "a2": Fraction(1, 5),
                "a3": Fraction(1, 10),
            }
        )
        assert classify_structure(g) == INEQUALITY

    def test_inequality_beats_overlap(self):
        g = agents_only(2)
        g.add_node("g0", GROUP_LAYER)
        g.add_node("g1", GROUP_LAYER)
        g.join_group("a0", "g0", Fraction(3, 4))
        g.join_group("a1", "g0", Fraction(1, 4))
        g.join_group("a0", "g1")
        assert classify_structure(g) == INEQUALITY

    def test_partial_grouping_unclassified(self):
        g = agents_only(2)
        g.add_node("g0", GROUP_LAYER)
        g.join_group("a0", "g0")
        assert classify_structure(g) == UNCLASSIFIED

    def test_extra_layer_unclassified(self):
        g = agents_only(2)
        g.add_node("meta", 3)
        assert classify_structure(g) == UNCLASSIFIED


class TestRedistribute:
    def test_frozen_inequality_example(self):
        g = one_group(
            {
                "a0": Fraction(2, 5),
                "a1": Fraction(3, 10),
                "a2": Fraction(1, 5),
                "a3": Fraction(1, 10),
            }
        )
        raw = {"a0": Fraction(10), "a1": Fraction(0), "a2": Fraction(0), "a3": Fraction(0)}
        assert redistribute(raw, g) == {
            "a0": Fraction(4),
            "a1": Fraction(3),
            "a2": Fraction(2),
            "a3": Fraction(1),
        }

    def test_ungrouped_keep_raw(self):
        g = agents_only(2)
        raw = {"a0": Fraction(7, 3), "a1": Fraction(-2)}
        assert redistribute(raw, g) == raw

    def test_agent_to_agent_edges_do_not_redistribute(self):
        g = agents_only(2)
        g.add_edge("a0", "a1", share_observation=True)
        raw = {"a0": Fraction(5), "a1": Fraction(0)}
        assert redistribute(raw, g) == raw

    def test_multi_group_split(self):
        # a0 in two groups: raw 6 splits 3+3 into the pools; g0 = {a0, a1}
        # equal, g1 = {a0, a2} equal; a0 gets 1.5 + 1.5
        g = agents_only(3)
        for gid in ("g0", "g1"):
            g.add_node(gid, GROUP_LAYER)
        g.join_group("a0", "g0")
        g.join_group("a1", "g0")
        g.join_group("a0", "g1")
        g.join_group("a2", "g1")
        raw = {"a0": Fraction(6), "a1": Fraction(0), "a2": Fraction(0)}
        shared = redistribute(raw, g)
        assert shared == {
            "a0": Fraction(3),
            "a1": Fraction(3, 2),
            "a2": Fraction(3, 2),
        }

    def test_negative_rewards_redistribute_too(self):
        g = one_group({"a0": None, "a1": None})
        raw = {"a0": Fraction(-4), "a1": Fraction(0)}
        assert redistribute(raw, g) == {"a0": Fraction(-2), "a1": Fraction(-2)}

    def test_conservation_random_graphs(self):
        rng = random.Random(2024)
        for _ in range(300):
            n_agents = rng.randint(1, 6)
            n_groups = rng.randint(0, 3)
            g = agents_only(n_agents)
            for k in range(n_groups):
                g.add_node(f"g{k}", GROUP_LAYER)
            for i in range(n_agents):
                for k in range(n_groups):
                    if rng.random() < 0.5:
                        g.join_group(f"a{i}", f"g{k}")
            raw = {
                f"a{i}": Fraction(rng.randint(-50, 50), rng.randint(1, 9))
                for i in range(n_agents)
            }
            shared = redistribute(raw, g)
            assert sum(shared.values()) == sum(raw.values())
            assert set(shared) == set(raw)


class TestMergeWeights:
    def test_frozen_example(self):
        merged = merge_weights(
            {"a": Fraction(3, 5), "b": Fraction(2, 5)},
            "c",
            Fraction(1, 2),
            Fraction(1, 2),
        )
        assert merged == {
            "a": Fraction(3, 10),
            "b": Fraction(1, 5),
            "c": Fraction(1, 2),
        }
        assert sum(merged.values()) == 1

    def test_always_sums_to_one(self):
        rng = random.Random(7)
        weights = {"m0": Fraction(1)}
        for i in range(1, 40):
            share = Fraction(rng.randint(1, 99), 100)
            weights = merge_weights(weights, f"m{i}", 1 - share, share)
            assert sum(weights.values()) == 1
            assert all(w >= 0 for w in weights.values())

    def test_existing_member_rejected(self):
        with pytest.raises(SocialGraphError):
            merge_weights({"a": Fraction(1)}, "a", Fraction(1, 2), Fraction(1, 2))

    def test_bad_share_sum_rejected(self):
        with pytest.raises(SocialGraphError):
            merge_weights({"a": Fraction(1)}, "b", Fraction(1, 2), Fraction(1, 3))


class TestObservationSharing:
    def test_sources_are_incoming_share_edges(self):
        g = agents_only(3)
        g.add_edge("a1", "a0", share_observation=True)
        g.add_edge("a2", "a0", share_observation=False)
        g.add_edge("a0", "a1", share_observation=True)
        assert observation_sources(g, "a0") == ["a1"]
        assert observation_sources(g, "a1") == ["a0"]
        assert observation_sources(g, "a2") == []

    def test_group_edges_never_share(self):
        g = one_group({"a0": None, "a1": None})
        # membership edges a->g carry no observation; nothing flows back
        assert observation_sources(g, "a0") == []


class TestDegreeStats:
    def test_symmetric_pair(self):
        g = agents_only(3)
        g.add_edge("a0", "a1")
        g.add_edge("a1", "a0")
        stats = degree_stats(g, AGENT_LAYER)
        assert stats.symmetric
        assert stats.maximum == 1
        assert stats.average == pytest.approx(2 / 3)

    def test_asymmetric(self):
        g = agents_only(3)
        g.add_edge("a0", "a1")
        g.add_edge("a0", "a2")
        stats = degree_stats(g, AGENT_LAYER)
        assert not stats.symmetric
        assert stats.maximum_out == 2
        assert stats.maximum_in == 1
        assert stats.average_out == pytest.approx(2 / 3)

    def test_empty_layer(self):
        g = agents_only(2)
        assert degree_stats(g, GROUP_LAYER) == DegreeStats(0.0, 0, 0.0, 0, True)

    def test_group_layer_counts_membership(self):
        g = one_group({"a0": None, "a1": None})
        stats = degree_stats(g, GROUP_LAYER)
        assert stats.maximum_in == 2
        assert stats.average_in == pytest.approx(2.0)
