"""Resource and event catalog: the crafting chain as an immutable registry.

A registry declares what can exist in a world: resource kinds (natural kinds
placed at generation, synthesized kinds produced only by events) and event
kinds (recipes that consume inputs from the actor's inventory and emit
outputs). Every kind may carry a requirement set — resource names the actor
must hold at least one unit of before it can perceive or use the kind.

Design notes:
- Registries are validated once and then treated as immutable; scenarios
  reference a registry slice rather than copying definitions around.
- The synthesis graph (inputs -> outputs) must be acyclic, and each
  synthesized kind must have exactly one producing event, so "the event that
  makes X" is always well defined.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

from .encoding import to_fraction


class RegistryError(ValueError):
    """Raised when a registry or registry slice is internally inconsistent."""

    def __init__(self, problems: list[str]):
        self.problems = list(problems)
        super().__init__("; ".join(problems))


@dataclass(frozen=True)
class ResourceKind:
    """One resource kind.

    requirement: resource names the holder needs (>=1 unit each) to perceive
    piles of this kind on the map and to pick them up.
    objective_reward: credits per unit held, before per-agent preference.
    """

    name: str
    objective_reward: Fraction
    requirement: frozenset[str] = frozenset()
    synthesized: bool = False


@dataclass(frozen=True)
class EventKind:
    """One event (recipe). Inputs are taken from the actor's own inventory,
    outputs land in it; the site itself is never consumed.

    requirement: resource names the actor must hold to perceive sites of this
    event and to execute it.
    """

    name: str
    inputs: tuple[tuple[str, int], ...]
    outputs: tuple[tuple[str, int], ...]
    requirement: frozenset[str] = frozenset()

    def input_map(self) -> dict[str, int]:
        return dict(self.inputs)

    def output_map(self) -> dict[str, int]:
        return dict(self.outputs)


@dataclass
class ContentRegistry:
    """Ordered, validated collection of resource and event kinds."""

    resources: dict[str, ResourceKind] = field(default_factory=dict)
    events: dict[str, EventKind] = field(default_factory=dict)

    # -- construction -----------------------------------------------------

    def add_resource(self, kind: ResourceKind) -> None:
        self.resources[kind.name] = kind

    def add_event(self, kind: EventKind) -> None:
        self.events[kind.name] = kind

    def validate(self) -> None:
        """Check all structural invariants; raises RegistryError listing every
        problem found rather than stopping at the first."""
        problems: list[str] = []
        names_seen = set(self.resources)
        for name in self.events:
            if name in names_seen:
                problems.append(f"name {name!r} used for both a resource and an event")

        for res in self.resources.values():
            for req in sorted(res.requirement):
                if req not in self.resources:
                    problems.append(f"resource {res.name!r} requires unknown resource {req!r}")

        produced_by: dict[str, list[str]] = {}
        for ev in self.events.values():
            if not ev.inputs:
                problems.append(f"event {ev.name!r} has no inputs")
            if not ev.outputs:
                problems.append(f"event {ev.name!r} has no outputs")
            for res_name, count in ev.inputs + ev.outputs:
                if res_name not in self.resources:
                    problems.append(f"event {ev.name!r} references unknown resource {res_name!r}")
                if count < 1:
                    problems.append(f"event {ev.name!r} has non-positive count for {res_name!r}")
            for req in sorted(ev.requirement):
                if req not in self.resources:
                    problems.append(f"event {ev.name!r} requires unknown resource {req!r}")
            for res_name, _ in ev.outputs:
                produced_by.setdefault(res_name, []).append(ev.name)

        for res_name, producers in sorted(produced_by.items()):
            res = self.resources.get(res_name)
            if res is not None and not res.synthesized:
                problems.append(f"natural resource {res_name!r} is produced by {producers}")
            if len(producers) > 1:
                problems.append(f"resource {res_name!r} has multiple producers {sorted(producers)}")
        for res in self.resources.values():
            if res.synthesized and res.name not in produced_by:
                problems.append(f"synthesized resource {res.name!r} has no producing event")

        cycle = self._find_cycle()
        if cycle:
            problems.append(f"synthesis graph has a cycle: {' -> '.join(cycle)}")

        if problems:
            raise RegistryError(problems)

    def _find_cycle(self) -> list[str] | None:
        """Kahn's algorithm over resources; edges run input -> output."""
        succ: dict[str, set[str]] = {name: set() for name in self.resources}
        indeg = {name: 0 for name in self.resources}
        for ev in self.events.values():
            for in_name, _ in ev.inputs:
                for out_name, _ in ev.outputs:
                    if in_name in succ and out_name in indeg and out_name not in succ[in_name]:
                        succ[in_name].add(out_name)
                        indeg[out_name] += 1
        queue = [n for n, d in indeg.items() if d == 0]
        seen = 0
        while queue:
            node = queue.pop()
            seen += 1
            for nxt in succ[node]:
                indeg[nxt] -= 1
                if indeg[nxt] == 0:
                    queue.append(nxt)
        if seen == len(indeg):
            return None
        return sorted(n for n, d in indeg.items() if d > 0)

    # -- queries ----------------------------------------------------------

    def resource(self, name: str) -> ResourceKind:
        return self.resources[name]

    def event(self, name: str) -> EventKind:
        return self.events[name]

    def natural_resources(self) -> list[ResourceKind]:
        return [r for r in self.resources.values() if not r.synthesized]

    def synthesized_resources(self) -> list[ResourceKind]:
        return [r for r in self.resources.values() if r.synthesized]

    def producer_of(self, resource_name: str) -> EventKind:
        """The unique event producing a synthesized resource."""
        for ev in self.events.values():
            if any(name == resource_name for name, _ in ev.outputs):
                return ev
        raise KeyError(f"no event produces {resource_name!r}")

    def subset(self, resource_names: list[str], event_names: list[str]) -> "ContentRegistry":
        """A validated slice containing only the named kinds."""
        missing = [n for n in resource_names if n not in self.resources]
        missing += [n for n in event_names if n not in self.events]
        if missing:
            raise RegistryError([f"unknown kind {n!r}" for n in missing])
        sliced = ContentRegistry(
            resources={n: self.resources[n] for n in resource_names},
            events={n: self.events[n] for n in event_names},
        )
        sliced.validate()
        return sliced


def _res(name: str, reward: int | str, requirement: tuple[str, ...] = (), synthesized: bool = False) -> ResourceKind:
    return ResourceKind(
        name=name,
        objective_reward=to_fraction(reward),
        requirement=frozenset(requirement),
        synthesized=synthesized,
    )


def builtin_registry() -> ContentRegistry:
    """The full built-in crafting chain.

    Fifteen resources and nine events, wood through totem. Gated natural
    kinds: coal needs a hammer, iron a torch, gem mines a pickaxe, clay a
    shovel. Every synthesized kind has exactly one recipe.
    """
    reg = ContentRegistry()
    for kind in (
        _res("wood", 1),
        _res("stone", 1),
        _res("hammer", 5, synthesized=True),
        _res("coal", 2, requirement=("hammer",)),
        _res("torch", 20, synthesized=True),
        _res("iron", 3, requirement=("torch",)),
        _res("steel", 30, synthesized=True),
        _res("shovel", 100, synthesized=True),
        _res("pickaxe", 150, synthesized=True),
        _res("gem_mine", 4, requirement=("pickaxe",)),
        _res("clay", 4, requirement=("shovel",)),
        _res("pottery", 40, synthesized=True),
        _res("cutter", 100, synthesized=True),
        _res("gem", 200, synthesized=True),
        _res("totem", 1000, synthesized=True),
    ):
        reg.add_resource(kind)
    for ev in (
        EventKind("hammer_craft", (("wood", 1), ("stone", 1)), (("hammer", 1),)),
        EventKind("torch_craft", (("wood", 1), ("coal", 1)), (("torch", 1),), frozenset({"coal"})),
        EventKind("steel_making", (("iron", 1), ("coal", 1)), (("steel", 1),), frozenset({"iron"})),
        EventKind("potting", (("clay", 2), ("coal", 1)), (("pottery", 1),), frozenset({"clay"})),
        EventKind("shovel_craft", (("steel", 2), ("wood", 2)), (("shovel", 1),), frozenset({"steel"})),
        EventKind("pickaxe_craft", (("steel", 3), ("wood", 2)), (("pickaxe", 1),), frozenset({"steel"})),
        EventKind("cutter_craft", (("steel", 2), ("stone", 3)), (("cutter", 1),), frozenset({"steel"})),
        EventKind("gem_cutting", (("gem_mine", 1),), (("gem", 1),), frozenset({"cutter", "gem_mine"})),
        EventKind("totem_making", (("gem", 2), ("pottery", 1), ("steel", 1)), (("totem", 1),), frozenset({"gem"})),
    ):
        reg.add_event(ev)
    reg.validate()
    return reg


BUILTIN = builtin_registry()
