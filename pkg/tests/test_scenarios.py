"""Scenario protocol machines driven through the engine step loop."""

from fractions import Fraction

import pytest

from conftest import tiny_document
from sociogrid.actions import NOOP, Action
from sociogrid.config import load_scenario
from sociogrid.engine import Engine
from sociogrid.social import INDEPENDENT, INEQUALITY, classify_structure


def make_engine(doc, seed=0):
    eng = Engine(load_scenario(doc), seed)
    eng.reset()
    return eng


def contract_doc(n_agents=3, rounds=2, physical=6):
    return tiny_document(
        agents=[{"role": "walker", "count": n_agents}],
        scenario={"kind": "contract", "rounds": rounds, "physical_steps": physical},
        episode_length=rounds * n_agents + physical,
    )


def negotiation_doc(n_agents=3, stage=8, physical=4, max_proposals=2):
    return tiny_document(
        agents=[{"role": "walker", "count": n_agents}],
        scenario={
            "kind": "negotiation",
            "negotiation_steps": stage,
            "physical_steps": physical,
            "max_proposals": max_proposals,
        },
        episode_length=stage + physical,
    )


def structure_doc():
    """Pinned 4-agent world, imposed unequal group, pair split at step 2."""
    unequal = {
        "groups": [
            {
                "id": "g_all",
                "members": {
                    "walker_0": "2/5",
                    "walker_1": "3/10",
                    "walker_2": "1/5",
                    "walker_3": "1/10",
                },
            }
        ],
        "edges": [],
    }
    pairs = {
        "groups": [
            {"id": "g0", "members": ["walker_0", "walker_1"]},
            {"id": "g1", "members": ["walker_2", "walker_3"]},
        ],
        "edges": [],
    }
    return tiny_document(
        piles={"wood": {"positions": [[0, 1]]}, "stone": {"positions": [[4, 4]]}},
        agents=[
            {
                "role": "walker",
                "count": 4,
                "positions": [[0, 1], [2, 2], [3, 3], [4, 0]],
            }
        ],
        scenario={
            "kind": "social_structure",
            "initial": unequal,
            "schedule": [{"step": 2, "graph": pairs}],
        },
        episode_length=6,
    )


class TestContract:
    def test_order_is_seeded_permutation(self):
        eng = make_engine(contract_doc(), seed=3)
        assert sorted(eng.scenario.order) == eng.agent_ids
        other = make_engine(contract_doc(), seed=3)
        assert other.scenario.order == eng.scenario.order

    def test_selector_rotates_through_order(self):
        eng = make_engine(contract_doc())
        order = eng.scenario.order
        for t in range(6):  # rounds * n_agents
            obs = eng.last_observations[eng.agent_ids[0]]
            assert obs.phase["stage"] == "formation"
            assert obs.phase["selector"] == order[t % 3]
            eng.step({})
        assert eng.last_observations[eng.agent_ids[0]].phase["stage"] == "physical"
        assert eng.last_observations[eng.agent_ids[0]].phase["selector"] is None

    def test_only_selector_may_select(self):
        eng = make_engine(contract_doc())
        selector = eng.scenario.order[0]
        bystander = next(a for a in eng.agent_ids if a != selector)
        result = eng.step(
            {
                selector: Action.select_group("group_0"),
                bystander: Action.select_group("group_1"),
            }
        )
        assert eng.graph.members_of("group_0") == [selector]
        assert eng.graph.members_of("group_1") == []
        assert result.info["noops"][bystander]["reason"] == "not_your_turn"

    def test_later_selection_overrides(self):
        eng = make_engine(contract_doc(n_agents=2, rounds=2, physical=2))
        agent = eng.scenario.order[0]
        eng.step({agent: Action.select_group("group_0")})  # t=0: agent's turn
        eng.step({})                                       # t=1: partner's turn
        eng.step({agent: Action.select_group("group_1")})  # t=2: agent again
        assert eng.graph.groups_of(agent) == ["group_1"]

    def test_physical_gated_during_formation(self):
        eng = make_engine(contract_doc())
        mover = eng.agent_ids[0]
        before = eng.world.agents[mover].position
        result = eng.step({mover: Action.move("N")})
        assert result.info["noops"][mover]["reason"] == "phase"
        assert eng.world.agents[mover].position == before

    def test_frozen_after_formation(self):
        eng = make_engine(contract_doc())
        for _ in range(6):
            eng.step({})
        agent = eng.scenario.order[0]
        result = eng.step({agent: Action.select_group("group_0")})
        assert result.info["noops"][agent]["reason"] == "frozen"
        # and physical actions run now
        result = eng.step({agent: Action.move("stay")})
        assert agent not in result.info["noops"]

    def test_shared_group_splits_equally(self):
        eng = make_engine(contract_doc(n_agents=3, rounds=1, physical=3))
        for _ in range(3):
            selector = eng.scenario.selector(eng)
            eng.step({selector: Action.select_group("group_0")})
        weights = eng.graph.member_weights("group_0")
        assert weights == {a: Fraction(1, 3) for a in eng.agent_ids}

    def test_bad_target_direct(self):
        eng = make_engine(contract_doc())
        selector = eng.scenario.order[0]
        outcome = eng.scenario.apply_social(
            eng, selector, Action.select_group("group_99"), {}
        )
        assert not outcome.ok and outcome.reason == "bad_target"

    def test_unknown_group_is_illegal_template_via_engine(self):
        eng = make_engine(contract_doc())
        selector = eng.scenario.order[0]
        result = eng.step({selector: Action.select_group("group_99")})
        assert result.info["noops"][selector]["reason"] == "illegal_template"


class TestNegotiation:
    def walkers(self, eng):
        return eng.agent_ids  # walker_0, walker_1, ...

    def test_full_bargaining_walkthrough(self):
        eng = make_engine(negotiation_doc())
        w0, w1, w2 = self.walkers(eng)

        r = eng.step({w0: Action.request(w1), w1: Action.request(w0)})
        assert r.info["sessions_opened"] == [[w0, w1]]
        assert eng.last_observations[w0].phase["session"]["turn"] == w0

        r = eng.step({w0: Action.propose(Fraction(3, 5))})
        assert w0 not in r.info["noops"]
        table = eng.last_observations[w1].phase["session"]["table"]
        assert table["proposer"] == w0
        assert table["shares"] == {w0: "3/5", w1: "2/5"}

        r = eng.step({w1: Action.accept()})
        assert r.info["sessions_closed"] == [
            {"participants": [w0, w1], "outcome": "accepted"}
        ]
        assert r.info["groups_formed"] == ["group_0"]
        assert eng.graph.member_weights("group_0") == {
            w0: Fraction(3, 5),
            w1: Fraction(2, 5),
        }

        # the grouped side bargains as one: w1 represents {w0, w1} against w2
        eng.step({w1: Action.request(w2), w2: Action.request(w1)})
        eng.step({w1: Action.propose(Fraction(1, 2))})
        r = eng.step({w2: Action.accept()})
        assert eng.graph.groups() == ["group_1"]
        assert eng.graph.member_weights("group_1") == {
            w0: Fraction(3, 10),
            w1: Fraction(1, 5),
            w2: Fraction(1, 2),
        }

        # stage boundary freezes the final weights
        eng.step({})
        r = eng.step({})  # t=7 -> boundary
        assert eng.scenario.final_weights == {
            w0: Fraction(3, 10),
            w1: Fraction(1, 5),
            w2: Fraction(1, 2),
        }
        assert eng.last_observations[w0].phase["final_weights"] == {
            w0: "3/10",
            w1: "1/5",
            w2: "1/2",
        }

        # physical stage: bargaining verbs are over
        r = eng.step({w0: Action.propose(Fraction(1, 2))})
        assert r.info["noops"][w0]["reason"] == "phase"

    def test_one_sided_request_does_not_open(self):
        eng = make_engine(negotiation_doc())
        w0, w1, _ = self.walkers(eng)
        r = eng.step({w0: Action.request(w1)})
        assert "sessions_opened" not in r.info
        assert eng.scenario.sessions == {}

    def test_turn_discipline_and_missing_session(self):
        eng = make_engine(negotiation_doc())
        w0, w1, w2 = self.walkers(eng)
        eng.step({w0: Action.request(w1), w1: Action.request(w0)})
        r = eng.step(
            {
                w1: Action.propose(Fraction(1, 2)),  # not w1's turn
                w2: Action.propose(Fraction(1, 2)),  # w2 has no session
            }
        )
        assert r.info["noops"][w1]["reason"] == "not_your_turn"
        assert r.info["noops"][w2]["reason"] == "no_session"

    def test_bad_proposal_and_empty_table(self):
        eng = make_engine(negotiation_doc())
        w0, w1, _ = self.walkers(eng)
        eng.step({w0: Action.request(w1), w1: Action.request(w0)})
        r = eng.step({w0: Action.accept()})
        assert r.info["noops"][w0]["reason"] == "nothing_on_table"
        r = eng.step({w0: Action.propose(Fraction(3, 2))})
        assert r.info["noops"][w0]["reason"] == "bad_proposal"

    def test_request_while_in_session(self):
        eng = make_engine(negotiation_doc())
        w0, w1, w2 = self.walkers(eng)
        eng.step({w0: Action.request(w1), w1: Action.request(w0)})
        r = eng.step({w0: Action.request(w2)})
        assert r.info["noops"][w0]["reason"] == "in_session"

    def test_proposal_budget_auto_declines(self):
        eng = make_engine(negotiation_doc(max_proposals=2))
        w0, w1, _ = self.walkers(eng)
        eng.step({w0: Action.request(w1), w1: Action.request(w0)})
        eng.step({w0: Action.propose(Fraction(1, 2))})
        eng.step({w1: Action.propose(Fraction(2, 3))})
        r = eng.step({w0: Action.propose(Fraction(1, 2))})
        assert r.info["noops"][w0]["reason"] == "proposal_budget"
        assert r.info["sessions_closed"] == [
            {"participants": [w0, w1], "outcome": "budget_declined"}
        ]
        assert eng.scenario.sessions == {}
        assert eng.graph.groups() == []

    def test_decline_closes_without_group(self):
        eng = make_engine(negotiation_doc())
        w0, w1, _ = self.walkers(eng)
        eng.step({w0: Action.request(w1), w1: Action.request(w0)})
        eng.step({w0: Action.propose(Fraction(9, 10))})
        r = eng.step({w1: Action.decline()})
        assert r.info["sessions_closed"] == [
            {"participants": [w0, w1], "outcome": "declined"}
        ]
        assert eng.graph.groups() == []

    def test_engaged_group_defers_new_sessions(self):
        eng = make_engine(negotiation_doc(n_agents=4, stage=8, physical=4))
        w0, w1, w2, w3 = self.walkers(eng)
        eng.step({w0: Action.request(w1), w1: Action.request(w0)})
        eng.step({w0: Action.propose(Fraction(1, 2))})
        eng.step({w1: Action.accept()})  # group_0 = {w0, w1}
        eng.step({w0: Action.request(w2), w2: Action.request(w0)})  # opens
        # w1's co-member w0 sits at a table: the group is engaged
        r = eng.step({w1: Action.request(w3), w3: Action.request(w1)})
        assert r.info["sessions_deferred"] == [[w1, w3]]
        assert w3 not in eng.scenario.sessions

    def test_same_group_pair_deferred(self):
        eng = make_engine(negotiation_doc())
        w0, w1, _ = self.walkers(eng)
        eng.step({w0: Action.request(w1), w1: Action.request(w0)})
        eng.step({w0: Action.propose(Fraction(1, 2))})
        eng.step({w1: Action.accept()})
        r = eng.step({w0: Action.request(w1), w1: Action.request(w0)})
        assert r.info["sessions_deferred"] == [[w0, w1]]

    def test_stage_end_closes_open_sessions(self):
        eng = make_engine(negotiation_doc(stage=3, physical=3))
        w0, w1, w2 = self.walkers(eng)
        eng.step({w0: Action.request(w1), w1: Action.request(w0)})
        eng.step({w0: Action.propose(Fraction(1, 2))})
        r = eng.step({})  # t=2 -> boundary, session still open
        assert r.info["sessions_closed"] == [
            {"participants": [w0, w1], "outcome": "stage_end_declined"}
        ]
        assert eng.scenario.sessions == {}
        assert eng.scenario.final_weights == {
            w0: Fraction(0),
            w1: Fraction(0),
            w2: Fraction(0),
        }

    def test_session_opens_message_channel(self):
        eng = make_engine(negotiation_doc())
        w0, w1, w2 = self.walkers(eng)
        eng.step({w0: Action.request(w1), w1: Action.request(w0)})
        r = eng.step(
            {
                w0: Action.message(w1, "deal?"),
                w2: Action.message(w0, "psst"),
            }
        )
        assert r.observations[w1].inbox == ({"from": w0, "text": "deal?"},)
        assert r.info["noops"][w2]["reason"] == "no_channel"


class TestExploration:
    def test_connect_shares_window_directionally(self):
        eng = make_engine(tiny_document())
        w0, w1, _ = eng.agent_ids
        r = eng.step({w0: Action.connect(w1)})
        assert eng.graph.has_edge(w0, w1)
        assert w0 in r.observations[w1].shared_windows
        assert w1 not in r.observations[w0].shared_windows

    def test_connect_twice_exists(self):
        eng = make_engine(tiny_document())
        w0, w1, _ = eng.agent_ids
        eng.step({w0: Action.connect(w1)})
        r = eng.step({w0: Action.connect(w1)})
        assert r.info["noops"][w0]["reason"] == "exists"

    def test_disconnect(self):
        eng = make_engine(tiny_document())
        w0, w1, _ = eng.agent_ids
        eng.step({w0: Action.connect(w1)})
        r = eng.step({w0: Action.disconnect(w1)})
        assert w0 not in r.info["noops"]
        assert not eng.graph.has_edge(w0, w1)
        r = eng.step({w0: Action.disconnect(w1)})
        assert r.info["noops"][w0]["reason"] == "absent"

    def test_message_needs_the_edge_direction(self):
        eng = make_engine(tiny_document())
        w0, w1, _ = eng.agent_ids
        eng.step({w0: Action.connect(w1)})
        r = eng.step(
            {
                w0: Action.message(w1, "hello"),
                w1: Action.message(w0, "who?"),
            }
        )
        assert r.observations[w1].inbox == ({"from": w0, "text": "hello"},)
        assert r.info["noops"][w1]["reason"] == "no_channel"

    def test_group_join_and_leave(self):
        eng = make_engine(tiny_document())
        w0, w1, _ = eng.agent_ids
        eng.step({w0: Action.connect("group_0"), w1: Action.connect("group_0")})
        assert eng.graph.member_weights("group_0") == {
            w0: Fraction(1, 2),
            w1: Fraction(1, 2),
        }
        eng.step({w1: Action.disconnect("group_0")})
        assert eng.graph.member_weights("group_0") == {w0: Fraction(1)}

    def test_bad_target_direct(self):
        eng = make_engine(tiny_document())
        outcome = eng.scenario.apply_social(
            eng, eng.agent_ids[0], Action.connect("ghost"), {}
        )
        assert not outcome.ok and outcome.reason == "bad_target"


class TestSocialStructure:
    def test_imposed_graph_and_scheduled_replacement(self):
        eng = make_engine(structure_doc())
        assert classify_structure(eng.graph) == INEQUALITY
        r = eng.step({})  # t=0
        assert "graph_replaced" not in r.info
        r = eng.step({})  # t=1
        assert classify_structure(eng.graph) == INEQUALITY
        r = eng.step({})  # t=2: schedule fires at begin_step
        assert r.info.get("graph_replaced") is True
        assert classify_structure(eng.graph) == INDEPENDENT
        assert eng.graph.members_of("g0") == ["walker_0", "walker_1"]
        r = eng.step({})  # t=3: fires only once
        assert "graph_replaced" not in r.info

    def test_rewards_flow_through_imposed_weights(self):
        eng = make_engine(structure_doc())
        r = eng.step({"walker_0": Action.pick("wood")})
        assert r.raw_rewards["walker_0"] == Fraction(1)
        assert r.shared_rewards == {
            "walker_0": Fraction(2, 5),
            "walker_1": Fraction(3, 10),
            "walker_2": Fraction(1, 5),
            "walker_3": Fraction(1, 10),
        }

    def test_social_verbs_disabled(self):
        eng = make_engine(structure_doc())
        w0 = eng.agent_ids[0]
        r = eng.step({w0: Action.connect("walker_1")})
        assert r.info["noops"][w0]["reason"] == "illegal_template"
        outcome = eng.scenario.apply_social(eng, w0, Action.connect("walker_1"), {})
        assert not outcome.ok and outcome.reason == "social_disabled"

    def test_physical_always_allowed(self):
        eng = make_engine(structure_doc())
        r = eng.step({"walker_1": Action.move("stay")})
        assert "walker_1" not in r.info["noops"]
