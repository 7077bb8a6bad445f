"""Scenario protocol machines: who may do what, when, to the social graph.

Four scenario kinds gate and sequence the engine's step loop:

- social_structure: the graph is imposed and replaced wholesale at scheduled
  steps; agents cannot edit it. Physical actions run every step.
- contract: a formation stage of rounds*N steps. A seeded permutation of the
  roster is fixed at reset; at formation step t exactly one agent (the
  permutation at position t mod N) may re-select its group among N empty
  groups, overriding earlier choices. Afterwards memberships freeze and the
  physical stage runs with equal-split sharing.
- negotiation: a bargaining stage. Mutually requesting pairs open a private
  session; participants alternate proposing a binding (own, other) reward
  split that must sum to 1, starting with the lexicographically smaller id.
  Accepting merges the two sides into one weighted group: every member of a
  side keeps its old weight scaled by that side's negotiated share. Sessions
  auto-decline once the proposal budget is spent; a group may sit in at most
  one session at a time (extra mutual requests are deferred). After the stage
  the groups freeze and the physical stage runs.
- exploration: free-form; agents may connect/disconnect agent-agent sharing
  edges and join/leave a fixed pool of groups at any step, alongside physical
  actions.

Scenario runtimes mutate engine state passed in (`eng` is the live Engine);
their own mutable state is exposed via `phase_snapshot` so it lands in state
hashes, and via `observation_extras` so agents can see stage and turn.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .actions import Action
from .config import (
    ContractConfig,
    ExplorationConfig,
    NegotiationConfig,
    ScenarioSpec,
    SocialStructureConfig,
)
from .encoding import fraction_to_jsonable
from .social import AGENT_LAYER, GROUP_LAYER, SocialGraph, build_graph, merge_weights
from .world import ActionOutcome


def make_runtime(spec: ScenarioSpec, agent_ids: list[str]) -> "ScenarioRuntime":
    sc = spec.scenario
    if isinstance(sc, ContractConfig):
        return ContractRuntime(spec, sc, agent_ids)
    if isinstance(sc, NegotiationConfig):
        return NegotiationRuntime(spec, sc, agent_ids)
    if isinstance(sc, ExplorationConfig):
        return ExplorationRuntime(spec, sc, agent_ids)
    if isinstance(sc, SocialStructureConfig):
        return SocialStructureRuntime(spec, sc, agent_ids)
    raise TypeError(f"unknown scenario config {type(sc).__name__}")


class ScenarioRuntime:
    """Base: a permissive scenario with no social verbs."""

    kind = "base"

    def __init__(self, spec: ScenarioSpec, agent_ids: list[str]):
        self.spec = spec
        self.agent_ids = list(agent_ids)

    # -- lifecycle --------------------------------------------------------

    def initial_graph(self, eng) -> SocialGraph:
        graph = SocialGraph()
        for agent_id in self.agent_ids:
            graph.add_node(agent_id, AGENT_LAYER)
        return graph

    def begin_step(self, eng, info: dict) -> None:
        pass

    def end_step(self, eng, info: dict) -> None:
        pass

    # -- gating -----------------------------------------------------------

    def physical_allowed(self, eng, agent_id: str) -> bool:
        return True

    def social_verbs(self, eng, agent_id: str) -> list[str]:
        return []

    def apply_social(self, eng, agent_id: str, action: Action, info: dict) -> ActionOutcome:
        return ActionOutcome.noop("social_disabled")

    def message_channel_open(self, eng, src: str, dst: str) -> bool:
        """Extra message routes beyond explicit graph edges."""
        return False

    # -- reporting --------------------------------------------------------

    def stage(self, eng) -> str:
        return "physical"

    def phase_snapshot(self, eng) -> dict:
        return {"kind": self.kind}

    def observation_extras(self, eng, agent_id: str) -> dict:
        return {"kind": self.kind, "stage": self.stage(eng)}


# ---------------------------------------------------------------------------
# social structure
# ---------------------------------------------------------------------------


class SocialStructureRuntime(ScenarioRuntime):
    kind = "social_structure"

    def __init__(self, spec: ScenarioSpec, config: SocialStructureConfig, agent_ids: list[str]):
        super().__init__(spec, agent_ids)
        self.config = config
        self.applied = 0  # schedule entries already applied

    def initial_graph(self, eng) -> SocialGraph:
        return build_graph(self.config.initial, self.agent_ids)

    def begin_step(self, eng, info: dict) -> None:
        # wholesale replacement exactly at each scheduled step
        while self.applied < len(self.config.schedule) and self.config.schedule[self.applied][0] == eng.t:
            _, graph_spec = self.config.schedule[self.applied]
            eng.graph = build_graph(graph_spec, self.agent_ids)
            eng.graph_dirty = True
            info["graph_replaced"] = True
            self.applied += 1

    def phase_snapshot(self, eng) -> dict:
        return {"kind": self.kind, "applied": self.applied}


# ---------------------------------------------------------------------------
# contract
# ---------------------------------------------------------------------------


class ContractRuntime(ScenarioRuntime):
    kind = "contract"

    def __init__(self, spec: ScenarioSpec, config: ContractConfig, agent_ids: list[str]):
        super().__init__(spec, agent_ids)
        self.config = config
        self.formation_steps = config.rounds * len(agent_ids)
        self.group_ids = [f"group_{i}" for i in range(len(agent_ids))]
        self.order: list[str] = []  # sampled at initial_graph time

    def initial_graph(self, eng) -> SocialGraph:
        graph = super().initial_graph(eng)
        for group_id in self.group_ids:
            graph.add_node(group_id, GROUP_LAYER)
        self.order = eng.rng.sample(self.agent_ids, len(self.agent_ids))
        return graph

    def stage(self, eng) -> str:
        return "formation" if eng.t < self.formation_steps else "physical"

    def selector(self, eng) -> str | None:
        if eng.t < self.formation_steps:
            return self.order[eng.t % len(self.order)]
        return None

    def physical_allowed(self, eng, agent_id: str) -> bool:
        return eng.t >= self.formation_steps

    def social_verbs(self, eng, agent_id: str) -> list[str]:
        return [f"select_group:{g}" for g in self.group_ids]

    def apply_social(self, eng, agent_id: str, action: Action, info: dict) -> ActionOutcome:
        if action.verb != "select_group":
            return ActionOutcome.noop("unsupported_verb")
        if eng.t >= self.formation_steps:
            return ActionOutcome.noop("frozen")
        if agent_id != self.selector(eng):
            return ActionOutcome.noop("not_your_turn")
        if action.target not in self.group_ids:
            return ActionOutcome.noop("bad_target", target=action.target)
        for group_id in eng.graph.groups_of(agent_id):
            eng.graph.leave_group(agent_id, group_id)
        eng.graph.join_group(agent_id, action.target)  # equal split
        eng.graph_dirty = True
        return ActionOutcome.success(group=action.target)

    def phase_snapshot(self, eng) -> dict:
        return {"kind": self.kind, "order": self.order}

    def observation_extras(self, eng, agent_id: str) -> dict:
        return {
            "kind": self.kind,
            "stage": self.stage(eng),
            "selector": self.selector(eng),
            "formation_steps": self.formation_steps,
        }


# ---------------------------------------------------------------------------
# negotiation
# ---------------------------------------------------------------------------


@dataclass
class Session:
    a: str  # lexicographically smaller participant
    b: str
    turn: str
    proposals_made: int = 0
    # (proposer, proposer_share, partner_share); binding once accepted
    table: tuple[str, Fraction, Fraction] | None = None

    def partner(self, agent_id: str) -> str:
        return self.b if agent_id == self.a else self.a

    def snapshot(self) -> dict:
        table = None
        if self.table is not None:
            proposer, own, other = self.table
            table = {
                "proposer": proposer,
                "shares": {
                    proposer: fraction_to_jsonable(own),
                    (self.b if proposer == self.a else self.a): fraction_to_jsonable(other),
                },
            }
        return {
            "participants": [self.a, self.b],
            "turn": self.turn,
            "proposals_made": self.proposals_made,
            "table": table,
        }


class NegotiationRuntime(ScenarioRuntime):
    kind = "negotiation"

    def __init__(self, spec: ScenarioSpec, config: NegotiationConfig, agent_ids: list[str]):
        super().__init__(spec, agent_ids)
        self.config = config
        self.sessions: dict[str, Session] = {}  # agent -> its open session
        self.pending_requests: dict[str, str] = {}
        self.group_counter = 0
        self.final_weights: dict[str, Fraction] | None = None

    # -- helpers ----------------------------------------------------------

    def stage(self, eng) -> str:
        return "negotiation" if eng.t < self.config.negotiation_steps else "physical"

    def physical_allowed(self, eng, agent_id: str) -> bool:
        return eng.t >= self.config.negotiation_steps

    def social_verbs(self, eng, agent_id: str) -> list[str]:
        verbs = [f"request:{other}" for other in self.agent_ids if other != agent_id]
        verbs += ["propose", "accept", "decline"]
        return verbs

    def message_channel_open(self, eng, src: str, dst: str) -> bool:
        session = self.sessions.get(src)
        return session is not None and session.partner(src) == dst

    def _engaged(self, agent_id: str, eng) -> bool:
        """An agent is engaged while it, or any co-member of its groups, sits
        in an open session (one table per group at a time)."""
        if agent_id in self.sessions:
            return True
        for group_id in eng.graph.groups_of(agent_id):
            for member in eng.graph.members_of(group_id):
                if member in self.sessions:
                    return True
        return False

    def _close(self, session: Session) -> None:
        self.sessions.pop(session.a, None)
        self.sessions.pop(session.b, None)

    def _side_weights(self, eng, agent_id: str) -> dict[str, Fraction]:
        """The weighted membership an agent brings to the table: its group's
        weights, or itself at weight 1."""
        groups = eng.graph.groups_of(agent_id)
        if not groups:
            return {agent_id: Fraction(1)}
        return eng.graph.member_weights(groups[0])

    def _merge(self, eng, session: Session, info: dict) -> None:
        proposer, proposer_share, partner_share = session.table  # type: ignore[misc]
        acceptor = session.partner(proposer)
        proposer_side = self._side_weights(eng, proposer)
        acceptor_side = self._side_weights(eng, acceptor)
        if len(acceptor_side) == 1:
            merged = merge_weights(
                {m: w for m, w in proposer_side.items()},
                acceptor,
                proposer_share,
                partner_share,
            )
        else:
            merged = {m: w * proposer_share for m, w in proposer_side.items()}
            merged.update({m: w * partner_share for m, w in acceptor_side.items()})
        old_groups = sorted(
            set(eng.graph.groups_of(proposer)) | set(eng.graph.groups_of(acceptor))
        )
        for group_id in old_groups:
            eng.graph.remove_node(group_id)
        group_id = f"group_{self.group_counter}"
        self.group_counter += 1
        eng.graph.add_node(group_id, GROUP_LAYER)
        for member, weight in merged.items():
            eng.graph.join_group(member, group_id, weight)
        eng.graph_dirty = True
        info.setdefault("groups_formed", []).append(group_id)

    # -- verbs ------------------------------------------------------------

    def apply_social(self, eng, agent_id: str, action: Action, info: dict) -> ActionOutcome:
        if self.stage(eng) != "negotiation":
            return ActionOutcome.noop("phase")
        if action.verb == "request":
            if agent_id in self.sessions:
                return ActionOutcome.noop("in_session")
            target = action.target
            if target is None or target == agent_id or target not in self.agent_ids:
                return ActionOutcome.noop("bad_target", target=target)
            self.pending_requests[agent_id] = target
            return ActionOutcome.success(requested=target)
        session = self.sessions.get(agent_id)
        if session is None:
            return ActionOutcome.noop("no_session")
        if session.turn != agent_id:
            return ActionOutcome.noop("not_your_turn")
        if action.verb == "propose":
            if action.value is None or not (0 <= action.value <= 1):
                return ActionOutcome.noop("bad_proposal", value=str(action.value))
            if session.proposals_made >= self.config.max_proposals:
                self._close(session)
                info.setdefault("sessions_closed", []).append(
                    {"participants": [session.a, session.b], "outcome": "budget_declined"}
                )
                return ActionOutcome.noop("proposal_budget")
            session.table = (agent_id, action.value, 1 - action.value)
            session.proposals_made += 1
            session.turn = session.partner(agent_id)
            return ActionOutcome.success(proposed=float(action.value))
        if action.verb == "accept":
            if session.table is None or session.table[0] == agent_id:
                return ActionOutcome.noop("nothing_on_table")
            self._merge(eng, session, info)
            self._close(session)
            info.setdefault("sessions_closed", []).append(
                {"participants": [session.a, session.b], "outcome": "accepted"}
            )
            return ActionOutcome.success()
        if action.verb == "decline":
            self._close(session)
            info.setdefault("sessions_closed", []).append(
                {"participants": [session.a, session.b], "outcome": "declined"}
            )
            return ActionOutcome.success()
        return ActionOutcome.noop("unsupported_verb")

    # -- step hooks -------------------------------------------------------

    def end_step(self, eng, info: dict) -> None:
        # open sessions for mutual requests, smallest pair first; one open
        # table per group at a time
        mutual = sorted(
            (min(a, b), max(a, b))
            for a, b in self.pending_requests.items()
            if self.pending_requests.get(b) == a and a < b
        )
        for a, b in mutual:
            if self._engaged(a, eng) or self._engaged(b, eng):
                info.setdefault("sessions_deferred", []).append([a, b])
                continue
            shared = set(eng.graph.groups_of(a)) & set(eng.graph.groups_of(b))
            if shared:
                info.setdefault("sessions_deferred", []).append([a, b])
                continue
            session = Session(a=a, b=b, turn=a)
            self.sessions[a] = session
            self.sessions[b] = session
            info.setdefault("sessions_opened", []).append([a, b])
        self.pending_requests.clear()

        # the stage boundary: close leftover sessions, freeze weights
        if eng.t + 1 == self.config.negotiation_steps:
            for session in {id(s): s for s in self.sessions.values()}.values():
                info.setdefault("sessions_closed", []).append(
                    {"participants": [session.a, session.b], "outcome": "stage_end_declined"}
                )
            self.sessions.clear()
            weights: dict[str, Fraction] = {a: Fraction(0) for a in self.agent_ids}
            for group_id in eng.graph.groups():
                for member, weight in eng.graph.member_weights(group_id).items():
                    weights[member] = weights.get(member, Fraction(0)) + weight
            self.final_weights = weights

    def phase_snapshot(self, eng) -> dict:
        return {
            "kind": self.kind,
            "sessions": [s.snapshot() for s in sorted(
                {id(s): s for s in self.sessions.values()}.values(), key=lambda s: (s.a, s.b)
            )],
            "group_counter": self.group_counter,
            "final_weights": (
                None
                if self.final_weights is None
                else {a: fraction_to_jsonable(w) for a, w in sorted(self.final_weights.items())}
            ),
        }

    def observation_extras(self, eng, agent_id: str) -> dict:
        extras = {
            "kind": self.kind,
            "stage": self.stage(eng),
            "negotiation_steps": self.config.negotiation_steps,
        }
        session = self.sessions.get(agent_id)
        if session is not None:
            extras["session"] = session.snapshot()
        if self.final_weights is not None:
            extras["final_weights"] = {
                a: fraction_to_jsonable(w) for a, w in sorted(self.final_weights.items())
            }
        return extras


# ---------------------------------------------------------------------------
# exploration
# ---------------------------------------------------------------------------


class ExplorationRuntime(ScenarioRuntime):
    kind = "exploration"

    def __init__(self, spec: ScenarioSpec, config: ExplorationConfig, agent_ids: list[str]):
        super().__init__(spec, agent_ids)
        self.config = config
        self.group_ids = [f"group_{i}" for i in range(config.groups)]

    def initial_graph(self, eng) -> SocialGraph:
        graph = super().initial_graph(eng)
        for group_id in self.group_ids:
            graph.add_node(group_id, GROUP_LAYER)
        return graph

    def social_verbs(self, eng, agent_id: str) -> list[str]:
        targets = [a for a in self.agent_ids if a != agent_id] + self.group_ids
        return [f"connect:{t}" for t in targets] + [f"disconnect:{t}" for t in targets]

    def apply_social(self, eng, agent_id: str, action: Action, info: dict) -> ActionOutcome:
        target = action.target
        if target is None or target == agent_id or target not in eng.graph.layers:
            return ActionOutcome.noop("bad_target", target=target)
        is_group = eng.graph.layers[target] == GROUP_LAYER
        if action.verb == "connect":
            if is_group:
                if eng.graph.has_edge(agent_id, target):
                    return ActionOutcome.noop("exists")
                eng.graph.join_group(agent_id, target)  # equal split
            else:
                if eng.graph.has_edge(agent_id, target):
                    return ActionOutcome.noop("exists")
                eng.graph.add_edge(agent_id, target, share_observation=True)
            eng.graph_dirty = True
            return ActionOutcome.success(target=target)
        if action.verb == "disconnect":
            if not eng.graph.has_edge(agent_id, target):
                return ActionOutcome.noop("absent")
            eng.graph.remove_edge(agent_id, target)
            eng.graph_dirty = True
            return ActionOutcome.success(target=target)
        return ActionOutcome.noop("unsupported_verb")

    def phase_snapshot(self, eng) -> dict:
        return {"kind": self.kind}
