"""Deterministic step engine: joint actions in, observations and rewards out.

Step pipeline (fixed order, documented so replays and transports agree):
1. scenario begin hook (scheduled graph replacements);
2. one seeded shuffle fixes this step's agent priority;
3. actions resolve: missing/malformed/off-template attempts become no-ops
   with a reason in the info channel — nothing raises mid-step;
4. verb classes apply in order: social verbs, moves, picks, dumps,
   synthesize, then messages (messages deliver in sender-id order). Within a
   class, agents act in priority order, which settles contested picks;
5. raw rewards = per-agent valuation deltas (exact rationals), shared
   rewards = redistribution through the group layer;
6. scenario end hook (session matching, stage freezes);
7. discovery: kinds seen in the new windows or touched in inventories join
   the per-agent discovered/ever-held sets; action templates only ever grow
   within an episode (gating happens at execution time, not by delisting);
8. observations build, the recorder (if any) appends one trace record.

A seed fully determines the episode given the action stream: the only random
draws are world generation, the contract formation permutation, and the
per-step priority shuffle, always in that order.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from fractions import Fraction

from .actions import NOOP, SOCIAL_VERBS, Action
from .config import ScenarioSpec
from .encoding import canonical_json, fraction_to_jsonable, sha256_hex
from .scenarios import ScenarioRuntime, make_runtime
from .social import SocialGraph, observation_sources, redistribute
from .world import (
    ActionOutcome,
    VisibleCell,
    WorldState,
    apply_dump,
    apply_move,
    apply_pick,
    apply_synthesize,
    generate_world,
    observe_window,
    valuation,
    valuation_delta,
)

MOVE_TEMPLATES = ("move:N", "move:S", "move:E", "move:W", "move:stay")


@dataclass(frozen=True)
class Observation:
    """Everything one agent may see at one step."""

    agent_id: str
    t: int
    role: str
    position: tuple[int, int]
    window: tuple[VisibleCell, ...]
    inventory: dict[str, int]
    valuation: Fraction
    social: dict
    shared_windows: dict[str, tuple[VisibleCell, ...]]
    legal: tuple[str, ...]
    inbox: tuple[dict, ...]
    phase: dict
    done: bool

    def to_jsonable(self) -> dict:
        return {
            "agent_id": self.agent_id,
            "t": self.t,
            "role": self.role,
            "position": list(self.position),
            "window": [cell.to_jsonable() for cell in self.window],
            "inventory": dict(self.inventory),
            "valuation": fraction_to_jsonable(self.valuation),
            "social": self.social,
            "shared_windows": {
                src: [cell.to_jsonable() for cell in cells]
                for src, cells in self.shared_windows.items()
            },
            "legal": list(self.legal),
            "inbox": list(self.inbox),
            "phase": self.phase,
            "done": self.done,
        }


@dataclass(frozen=True)
class StepResult:
    observations: dict[str, Observation]
    raw_rewards: dict[str, Fraction]
    shared_rewards: dict[str, Fraction]
    done: bool
    info: dict


class Engine:
    """One episode of one scenario. Construct, reset(), then step() until done."""

    def __init__(self, spec: ScenarioSpec, seed: int, recorder=None):
        self.spec = spec
        self.seed = seed
        self.recorder = recorder
        self.agent_ids: list[str] = spec.agent_ids()
        instances = spec.agent_instances()
        self.roles: dict[str, str] = {a.agent_id: a.role for a in instances}
        self._has_reset = False

    # -- lifecycle --------------------------------------------------------

    def reset(self) -> dict[str, Observation]:
        self.rng = random.Random(self.seed)
        self.world: WorldState = generate_world(self.spec, self.rng)
        self.scenario: ScenarioRuntime = make_runtime(self.spec, self.agent_ids)
        self.graph: SocialGraph = self.scenario.initial_graph(self)
        self.graph_dirty = True
        self.graph_version = 0
        self._graph_snapshot_cache: dict | None = None
        self.t = 0
        self.done = self.spec.episode_length == 0
        self.discovered: dict[str, set[str]] = {
            a: self._initial_discovered(a) for a in self.agent_ids
        }
        self.ever_held: dict[str, set[str]] = {
            a: set(self.world.agents[a].inventory.contents) for a in self.agent_ids
        }
        self.templates: dict[str, set[str]] = {a: set() for a in self.agent_ids}
        self.cumulative_raw: dict[str, Fraction] = {a: Fraction(0) for a in self.agent_ids}
        self.cumulative_shared: dict[str, Fraction] = {a: Fraction(0) for a in self.agent_ids}
        self.execution_counts: dict[str, int] = {}
        self._windows: dict[str, tuple[VisibleCell, ...]] = {}
        self._refresh_discovery_and_templates()
        observations = self._build_observations({})
        self._last_observations = observations
        self._has_reset = True
        if self.recorder is not None:
            self.recorder.on_reset(self)
        return observations

    def _initial_discovered(self, agent_id: str) -> set[str]:
        """Requirement-free natural kinds and events are common knowledge;
        synthesized kinds must be seen or made first."""
        known = {
            r.name
            for r in self.world.registry.natural_resources()
            if not r.requirement
        }
        known |= {e.name for e in self.world.registry.events.values() if not e.requirement}
        known |= set(self.world.agents[agent_id].inventory.contents)
        return known

    # -- step -------------------------------------------------------------

    def step(self, actions: dict[str, Action]) -> StepResult:
        if not self._has_reset:
            raise RuntimeError("call reset() before step()")
        if self.done:
            raise RuntimeError("episode already finished")

        t = self.t
        info: dict = {"t": t, "noops": {}, "events": {}}
        self.scenario.begin_step(self, info)
        priority = self.rng.sample(self.agent_ids, len(self.agent_ids))
        info["priority"] = priority

        resolved = self._resolve(actions, info)
        inventory_changes: dict[str, dict[str, int]] = {a: {} for a in self.agent_ids}

        def register(agent_id: str, outcome: ActionOutcome) -> None:
            if not outcome.ok:
                entry: dict = {"reason": outcome.reason}
                if outcome.detail:
                    entry.update(outcome.detail)
                info["noops"][agent_id] = entry
            if outcome.inventory_changes:
                bucket = inventory_changes[agent_id]
                for kind, amount in outcome.inventory_changes.items():
                    bucket[kind] = bucket.get(kind, 0) + amount

        # 1. social verbs
        for agent_id in priority:
            action = resolved[agent_id]
            if action.verb in SOCIAL_VERBS:
                register(agent_id, self.scenario.apply_social(self, agent_id, action, info))

        # 2-5. physical classes in fixed order
        for verb in ("move", "pick", "dump", "synthesize"):
            pick_winners: dict[tuple, str] = {}
            for agent_id in priority:
                action = resolved[agent_id]
                if action.verb != verb:
                    continue
                if not self.scenario.physical_allowed(self, agent_id):
                    register(agent_id, ActionOutcome.noop("phase"))
                    continue
                if verb == "move":
                    outcome = apply_move(self.world, agent_id, action.target or "stay")
                elif verb == "pick":
                    kind = action.target or ""
                    key = (self.world.agents[agent_id].position, kind)
                    outcome = apply_pick(self.world, agent_id, kind)
                    if outcome.ok:
                        pick_winners[key] = agent_id
                    elif outcome.reason == "no_pile" and key in pick_winners:
                        outcome = ActionOutcome.noop(
                            "contested", resource=kind, winner=pick_winners[key]
                        )
                elif verb == "dump":
                    outcome = apply_dump(self.world, agent_id, action.target or "")
                else:
                    outcome = apply_synthesize(self.world, agent_id)
                    if outcome.ok and outcome.detail:
                        name = outcome.detail["event"]
                        info["events"][name] = info["events"].get(name, 0) + 1
                        self.execution_counts[name] = self.execution_counts.get(name, 0) + 1
                register(agent_id, outcome)

        # 6. messages, delivered in sender-id order at the next observation
        step_inbox: dict[str, list[dict]] = {}
        for agent_id in sorted(self.agent_ids):
            action = resolved[agent_id]
            if action.verb != "message":
                continue
            target = action.target
            open_channel = (
                target in self.world.agents
                and target != agent_id
                and (
                    self.graph.has_edge(agent_id, target)
                    or self.scenario.message_channel_open(self, agent_id, target)
                )
            )
            if open_channel:
                step_inbox.setdefault(target, []).append(
                    {"from": agent_id, "text": action.text or ""}
                )
                info.setdefault("messages", []).append({"from": agent_id, "to": target})
            else:
                register(agent_id, ActionOutcome.noop("no_channel", target=target))

        raw: dict[str, Fraction] = {}
        for agent_id in self.agent_ids:
            changes = inventory_changes[agent_id]
            raw[agent_id] = (
                valuation_delta(self.world, agent_id, changes) if changes else Fraction(0)
            )
        shared = redistribute(raw, self.graph)

        self.scenario.end_step(self, info)

        self.t = t + 1
        self.done = self.t >= self.spec.episode_length
        for agent_id in self.agent_ids:
            self.cumulative_raw[agent_id] += raw[agent_id]
            self.cumulative_shared[agent_id] += shared[agent_id]

        self._refresh_discovery_and_templates()
        observations = self._build_observations(step_inbox)
        self._last_observations = observations

        result = StepResult(
            observations=observations,
            raw_rewards=raw,
            shared_rewards=shared,
            done=self.done,
            info=info,
        )
        if self.recorder is not None:
            self.recorder.on_step(self, resolved, result)
            if self.done:
                self.recorder.on_end(self)
        return result

    def _resolve(self, actions: dict[str, Action], info: dict) -> dict[str, Action]:
        resolved: dict[str, Action] = {}
        for agent_id in self.agent_ids:
            action = actions.get(agent_id)
            if action is None:
                resolved[agent_id] = NOOP
                info["noops"][agent_id] = {"reason": "missing"}
                continue
            if not isinstance(action, Action):
                resolved[agent_id] = NOOP
                info["noops"][agent_id] = {"reason": "malformed"}
                continue
            if action.verb != "noop" and action.to_template() not in self.templates[agent_id]:
                resolved[agent_id] = NOOP
                info["noops"][agent_id] = {
                    "reason": "illegal_template",
                    "template": action.to_template(),
                }
                continue
            resolved[agent_id] = action
        return resolved

    # -- discovery and observation ----------------------------------------

    def _refresh_discovery_and_templates(self) -> None:
        registry = self.world.registry
        for agent_id in self.agent_ids:
            body = self.world.agents[agent_id]
            discovered = self.discovered[agent_id]
            held_now = set(body.inventory.contents)
            discovered |= held_now
            self.ever_held[agent_id] |= held_now

            window = tuple(
                observe_window(self.world, agent_id, self.spec.observation_radius)
            )
            self._windows[agent_id] = window
            for cell in window:
                for kind in cell.piles:
                    discovered.add(kind)
                if cell.site is not None:
                    discovered.add(cell.site)

            templates = self.templates[agent_id]
            templates.update(MOVE_TEMPLATES)
            templates.add("noop")
            templates.add("synthesize")
            for other in self.agent_ids:
                if other != agent_id:
                    templates.add(f"message:{other}")
            for kind in discovered:
                if kind in registry.resources:
                    templates.add(f"pick:{kind}")
            for kind in self.ever_held[agent_id]:
                templates.add(f"dump:{kind}")
            templates.update(self.scenario.social_verbs(self, agent_id))

    def graph_snapshot(self) -> dict:
        """Current social graph snapshot; recomputed (and version-bumped)
        only after a mutation marked the cache dirty."""
        if self.graph_dirty or self._graph_snapshot_cache is None:
            self._graph_snapshot_cache = self.graph.snapshot()
            self.graph_version += 1
            self.graph_dirty = False
        return self._graph_snapshot_cache

    def _build_observations(self, step_inbox: dict[str, list[dict]]) -> dict[str, Observation]:
        graph_snap = self.graph_snapshot()
        observations: dict[str, Observation] = {}
        for agent_id in self.agent_ids:
            body = self.world.agents[agent_id]
            sources = observation_sources(self.graph, agent_id)
            observations[agent_id] = Observation(
                agent_id=agent_id,
                t=self.t,
                role=self.roles[agent_id],
                position=body.position,
                window=self._windows[agent_id],
                inventory=body.inventory.snapshot(),
                valuation=valuation(self.world, agent_id),
                social=graph_snap,
                shared_windows={src: self._windows[src] for src in sources},
                legal=tuple(sorted(self.templates[agent_id])),
                inbox=tuple(step_inbox.get(agent_id, [])),
                phase=self.scenario.observation_extras(self, agent_id),
                done=self.done,
            )
        return observations

    @property
    def last_observations(self) -> dict[str, Observation]:
        return self._last_observations

    # -- hashing ----------------------------------------------------------

    def state_digest(self) -> dict:
        return {
            "t": self.t,
            "world": self.world.snapshot(),
            "graph": self.graph_snapshot(),
            "discovered": {a: sorted(s) for a, s in self.discovered.items()},
            "ever_held": {a: sorted(s) for a, s in self.ever_held.items()},
            "templates": {a: sorted(s) for a, s in self.templates.items()},
            "phase": self.scenario.phase_snapshot(self),
            "cumulative_raw": {
                a: fraction_to_jsonable(v) for a, v in self.cumulative_raw.items()
            },
            "cumulative_shared": {
                a: fraction_to_jsonable(v) for a, v in self.cumulative_shared.items()
            },
            "executions": dict(sorted(self.execution_counts.items())),
        }

    def state_hash(self) -> str:
        return sha256_hex(canonical_json(self.state_digest()))

    def rng_hash(self) -> str:
        return sha256_hex(repr(self.rng.getstate()))[:16]
