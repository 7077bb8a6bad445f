"""Grid world: cells, inventories, generation, visibility, physical actions.

State model:
- a cell is open or blocked terrain; open cells may hold one event site, a
  pile map (resource -> unit count, several kinds may share a cell), and any
  number of agents;
- each agent has an inventory with optional per-kind capacity and a per-kind
  preference multiplier used for valuation.

Visibility rule: an agent perceives a resource kind or event kind only while
holding at least one unit of every resource in that kind's requirement set.
Imperceivable things are filtered out of observations and cannot be picked or
executed.

Valuation: sum over kinds of units * preference * objective reward, computed
in exact rationals. Per-step rewards elsewhere are valuation deltas, so an
episode's total reward telescopes to final minus initial valuation.

Action helpers mutate the world in place and return an ActionOutcome; illegal
attempts never raise, they report a reason ("blocked", "capacity", ...) so the
engine can surface them in the per-step info channel.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from fractions import Fraction

from .config import ScenarioSpec
from .encoding import fraction_to_jsonable
from .registry import ContentRegistry, EventKind

DIRECTIONS: dict[str, tuple[int, int]] = {
    "N": (-1, 0),
    "S": (1, 0),
    "W": (0, -1),
    "E": (0, 1),
    "stay": (0, 0),
}


class WorldError(ValueError):
    """Raised when a world cannot be generated as specified."""


@dataclass
class Inventory:
    """Multiset of resources with optional per-kind capacity limits."""

    contents: dict[str, int] = field(default_factory=dict)
    capacity: dict[str, int | None] = field(default_factory=dict)

    def count(self, kind: str) -> int:
        return self.contents.get(kind, 0)

    def limit(self, kind: str) -> int | None:
        """None means unbounded."""
        return self.capacity.get(kind, None)

    def room(self, kind: str) -> int | None:
        cap = self.limit(kind)
        if cap is None:
            return None
        return max(0, cap - self.count(kind))

    def can_add(self, additions: dict[str, int]) -> bool:
        for kind, amount in additions.items():
            room = self.room(kind)
            if room is not None and amount > room:
                return False
        return True

    def add(self, kind: str, amount: int = 1) -> None:
        self.contents[kind] = self.count(kind) + amount
        if self.contents[kind] == 0:
            del self.contents[kind]

    def remove(self, kind: str, amount: int = 1) -> None:
        have = self.count(kind)
        if have < amount:
            raise ValueError(f"cannot remove {amount} {kind}, only {have} held")
        self.add(kind, -amount)

    def snapshot(self) -> dict[str, int]:
        return {k: v for k, v in sorted(self.contents.items()) if v}


@dataclass
class AgentBody:
    agent_id: str
    role: str
    position: tuple[int, int]
    inventory: Inventory
    preference: dict[str, Fraction]

    def preference_for(self, kind: str) -> Fraction:
        return self.preference.get(kind, Fraction(1))


@dataclass
class WorldState:
    height: int
    width: int
    registry: ContentRegistry
    blocks: frozenset[tuple[int, int]]
    piles: dict[tuple[int, int], dict[str, int]]
    sites: dict[tuple[int, int], str]
    agents: dict[str, AgentBody]

    def in_bounds(self, pos: tuple[int, int]) -> bool:
        return 0 <= pos[0] < self.height and 0 <= pos[1] < self.width

    def is_open(self, pos: tuple[int, int]) -> bool:
        return self.in_bounds(pos) and pos not in self.blocks

    def pile_at(self, pos: tuple[int, int]) -> dict[str, int]:
        return self.piles.get(pos, {})

    def occupants(self, pos: tuple[int, int]) -> list[str]:
        return sorted(a.agent_id for a in self.agents.values() if a.position == pos)

    def snapshot(self) -> dict:
        """Canonical JSON-able form, used for state hashing and inspection."""
        return {
            "height": self.height,
            "width": self.width,
            "blocks": sorted(list(p) for p in self.blocks),
            "piles": {
                f"{r},{c}": {k: v for k, v in sorted(pile.items()) if v}
                for (r, c), pile in sorted(self.piles.items())
                if any(pile.values())
            },
            "sites": {f"{r},{c}": name for (r, c), name in sorted(self.sites.items())},
            "agents": {
                a.agent_id: {
                    "role": a.role,
                    "position": list(a.position),
                    "inventory": a.inventory.snapshot(),
                }
                for a in sorted(self.agents.values(), key=lambda x: x.agent_id)
            },
        }


# ---------------------------------------------------------------------------
# generation
# ---------------------------------------------------------------------------


def generate_world(spec: ScenarioSpec, rng: random.Random) -> WorldState:
    """Build the initial world for a scenario.

    Placement order is fixed so a seed fully determines the map: terrain
    blocks, then event sites per kind in sorted name order, then piles per
    kind in sorted name order (one unit per sampled cell; kinds may overlap
    each other and sites), then agents on open site-free cells. Sorting by
    name (rather than document order) keeps generation identical when a
    scenario document is round-tripped through canonical JSON, which sorts
    object keys. Explicit positions are honored before sampling. Raises
    WorldError when the map cannot fit what the spec asks for (validation
    bounds this, but explicit positions can still collide).
    """
    all_cells = [(r, c) for r in range(spec.height) for c in range(spec.width)]

    if spec.terrain_blocks.positions is not None:
        blocks = set(spec.terrain_blocks.positions)
    else:
        blocks = set(rng.sample(all_cells, spec.terrain_blocks.count))
    open_cells = [p for p in all_cells if p not in blocks]

    sites: dict[tuple[int, int], str] = {}
    for name, placement in sorted(spec.sites.items()):
        if placement.positions is not None:
            chosen = list(placement.positions)
        else:
            free = [p for p in open_cells if p not in sites]
            if placement.count > len(free):
                raise WorldError(f"not enough open cells for {placement.count} {name} sites")
            chosen = rng.sample(free, placement.count)
        for pos in chosen:
            if pos in blocks or pos in sites:
                raise WorldError(f"site position {pos} unavailable for {name}")
            sites[pos] = name

    piles: dict[tuple[int, int], dict[str, int]] = {}
    for name, placement in sorted(spec.piles.items()):
        if placement.positions is not None:
            chosen = list(placement.positions)
        else:
            free = [p for p in open_cells if name not in piles.get(p, {})]
            if placement.count > len(free):
                raise WorldError(f"not enough open cells for {placement.count} {name} piles")
            chosen = rng.sample(free, placement.count)
        for pos in chosen:
            if pos in blocks:
                raise WorldError(f"pile position {pos} for {name} is blocked")
            piles.setdefault(pos, {})
            piles[pos][name] = piles[pos].get(name, 0) + 1

    agents: dict[str, AgentBody] = {}
    placeable = [p for p in open_cells if p not in sites]
    sampled_needed = [a for a in spec.agent_instances() if a.position is None]
    if len(sampled_needed) > len(placeable):
        raise WorldError("not enough open site-free cells for all agents")
    sampled = rng.sample(placeable, len(sampled_needed))
    sample_iter = iter(sampled)
    for inst in spec.agent_instances():
        pos = inst.position if inst.position is not None else next(sample_iter)
        if pos in blocks:
            raise WorldError(f"agent position {pos} is blocked")
        agents[inst.agent_id] = AgentBody(
            agent_id=inst.agent_id,
            role=inst.role,
            position=pos,
            inventory=Inventory(contents=dict(inst.inventory), capacity=dict(inst.capacity)),
            preference=dict(inst.preference),
        )

    return WorldState(
        height=spec.height,
        width=spec.width,
        registry=spec.registry,
        blocks=frozenset(blocks),
        piles=piles,
        sites=sites,
        agents=agents,
    )


# ---------------------------------------------------------------------------
# visibility and observation
# ---------------------------------------------------------------------------


def can_perceive(inventory: Inventory, requirement: frozenset[str]) -> bool:
    """True while the holder has >= 1 unit of every required kind."""
    return all(inventory.count(req) >= 1 for req in requirement)


def perceivable_resources(world: WorldState, inventory: Inventory) -> set[str]:
    return {
        r.name
        for r in world.registry.resources.values()
        if can_perceive(inventory, r.requirement)
    }


def perceivable_events(world: WorldState, inventory: Inventory) -> set[str]:
    return {
        e.name
        for e in world.registry.events.values()
        if can_perceive(inventory, e.requirement)
    }


@dataclass(frozen=True)
class VisibleCell:
    position: tuple[int, int]
    blocked: bool
    piles: dict[str, int]
    site: str | None
    occupants: tuple[str, ...]

    def to_jsonable(self) -> dict:
        return {
            "position": list(self.position),
            "blocked": self.blocked,
            "piles": dict(self.piles),
            "site": self.site,
            "occupants": list(self.occupants),
        }


def observe_window(world: WorldState, agent_id: str, radius: int) -> list[VisibleCell]:
    """The (2r+1)^2 window around the agent, clipped at borders, with piles
    and sites the agent cannot perceive filtered out. Row-major order. Other
    agents' positions are visible; their inventories never are."""
    body = world.agents[agent_id]
    res_vis = perceivable_resources(world, body.inventory)
    ev_vis = perceivable_events(world, body.inventory)
    r0, c0 = body.position
    cells: list[VisibleCell] = []
    for r in range(max(0, r0 - radius), min(world.height, r0 + radius + 1)):
        for c in range(max(0, c0 - radius), min(world.width, c0 + radius + 1)):
            pos = (r, c)
            pile = {
                k: v
                for k, v in sorted(world.pile_at(pos).items())
                if v > 0 and k in res_vis
            }
            site = world.sites.get(pos)
            if site is not None and site not in ev_vis:
                site = None
            cells.append(
                VisibleCell(
                    position=pos,
                    blocked=pos in world.blocks,
                    piles=pile,
                    site=site,
                    occupants=tuple(world.occupants(pos)),
                )
            )
    return cells


# ---------------------------------------------------------------------------
# valuation
# ---------------------------------------------------------------------------


def valuation(world: WorldState, agent_id: str) -> Fraction:
    """Credits for the agent's current holdings:
    sum over kinds of count * preference * objective_reward."""
    body = world.agents[agent_id]
    total = Fraction(0)
    for kind, count in body.inventory.contents.items():
        if count:
            reward = world.registry.resource(kind).objective_reward
            total += count * body.preference_for(kind) * reward
    return total


def valuation_delta(world: WorldState, agent_id: str, changes: dict[str, int]) -> Fraction:
    body = world.agents[agent_id]
    total = Fraction(0)
    for kind, amount in changes.items():
        if amount:
            total += amount * body.preference_for(kind) * world.registry.resource(kind).objective_reward
    return total


# ---------------------------------------------------------------------------
# physical actions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ActionOutcome:
    ok: bool
    reason: str | None = None
    detail: dict | None = None
    inventory_changes: dict[str, int] | None = None  # for the acting agent

    @staticmethod
    def success(**detail) -> "ActionOutcome":
        return ActionOutcome(ok=True, detail=detail or None)

    @staticmethod
    def noop(reason: str, **detail) -> "ActionOutcome":
        return ActionOutcome(ok=False, reason=reason, detail=detail or None)


def apply_move(world: WorldState, agent_id: str, direction: str) -> ActionOutcome:
    """One step N/S/E/W or stay. Blocked or out-of-bounds targets leave the
    agent in place. Cells may hold several agents."""
    if direction not in DIRECTIONS:
        return ActionOutcome.noop("bad_direction", direction=direction)
    body = world.agents[agent_id]
    dr, dc = DIRECTIONS[direction]
    target = (body.position[0] + dr, body.position[1] + dc)
    if not world.in_bounds(target):
        return ActionOutcome.noop("out_of_bounds")
    if target in world.blocks:
        return ActionOutcome.noop("blocked")
    body.position = target
    return ActionOutcome.success(position=list(target))


def apply_pick(world: WorldState, agent_id: str, kind: str) -> ActionOutcome:
    """Transfer one unit of `kind` from the agent's cell into its inventory.
    Requires a nonempty perceivable pile and spare capacity."""
    body = world.agents[agent_id]
    if kind not in world.registry.resources:
        return ActionOutcome.noop("unknown_resource", resource=kind)
    pile = world.pile_at(body.position)
    if pile.get(kind, 0) < 1:
        return ActionOutcome.noop("no_pile", resource=kind)
    if not can_perceive(body.inventory, world.registry.resource(kind).requirement):
        return ActionOutcome.noop("imperceivable", resource=kind)
    room = body.inventory.room(kind)
    if room is not None and room < 1:
        return ActionOutcome.noop("capacity", resource=kind)
    pile[kind] -= 1
    if pile[kind] == 0:
        del pile[kind]
        if not pile:
            world.piles.pop(body.position, None)
    body.inventory.add(kind, 1)
    return ActionOutcome(ok=True, inventory_changes={kind: 1})


def apply_dump(world: WorldState, agent_id: str, kind: str) -> ActionOutcome:
    """Drop one held unit onto the agent's cell, merging into any pile there."""
    body = world.agents[agent_id]
    if kind not in world.registry.resources:
        return ActionOutcome.noop("unknown_resource", resource=kind)
    if body.inventory.count(kind) < 1:
        return ActionOutcome.noop("empty", resource=kind)
    body.inventory.remove(kind, 1)
    pile = world.piles.setdefault(body.position, {})
    pile[kind] = pile.get(kind, 0) + 1
    return ActionOutcome(ok=True, inventory_changes={kind: -1})


def apply_synthesize(world: WorldState, agent_id: str) -> ActionOutcome:
    """Run the recipe of the site under the agent once.

    Inputs come from the actor's own inventory and outputs return to it; the
    site survives and can fire again. The whole execution is rejected if any
    output would overflow capacity (inputs are not consumed in that case).
    """
    body = world.agents[agent_id]
    site = world.sites.get(body.position)
    if site is None:
        return ActionOutcome.noop("no_site")
    event: EventKind = world.registry.event(site)
    if not can_perceive(body.inventory, event.requirement):
        return ActionOutcome.noop("imperceivable", event=site)
    missing = [
        kind
        for kind, amount in event.inputs
        if body.inventory.count(kind) < amount
    ]
    if missing:
        return ActionOutcome.noop("missing_inputs", event=site, missing=missing)
    after_inputs = dict(event.output_map())
    for kind, amount in event.inputs:
        after_inputs[kind] = after_inputs.get(kind, 0) - amount
    gains = {k: v for k, v in after_inputs.items() if v > 0}
    if not body.inventory.can_add(gains):
        return ActionOutcome.noop("capacity", event=site)
    changes: dict[str, int] = {}
    for kind, amount in event.inputs:
        body.inventory.remove(kind, amount)
        changes[kind] = changes.get(kind, 0) - amount
    for kind, amount in event.outputs:
        body.inventory.add(kind, amount)
        changes[kind] = changes.get(kind, 0) + amount
    changes = {k: v for k, v in changes.items() if v}
    return ActionOutcome(ok=True, detail={"event": site}, inventory_changes=changes)


def natural_totals(world: WorldState) -> dict[str, int]:
    """Total units of each natural kind across piles and inventories; constant
    under move/pick/dump, reduced only by event inputs."""
    totals: dict[str, int] = {
        r.name: 0 for r in world.registry.natural_resources()
    }
    for pile in world.piles.values():
        for kind, count in pile.items():
            if kind in totals:
                totals[kind] += count
    for body in world.agents.values():
        for kind, count in body.inventory.contents.items():
            if kind in totals:
                totals[kind] += count
    return totals


def format_credits(value: Fraction) -> int | str:
    return fraction_to_jsonable(value)
