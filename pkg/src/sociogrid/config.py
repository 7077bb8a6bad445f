"""Scenario documents: schema, validation, presets, round-trip serialization.

A scenario document is a plain JSON object describing one world: map shape,
terrain blocks, the registry slice in play (builtin names plus optional custom
kinds), initial pile and site placements, agent roster, and the scenario kind
with its parameters. `load_scenario` turns a document into a fully resolved
`ScenarioSpec` or raises with a list of violations, each carrying the path of
the offending field. `validate_document` returns the violation list without
raising, for tooling.

Defaults: unspecified capacity means unbounded, unspecified preference means
1 per unit. Numeric fields accept ints, floats (read as decimals), or exact
strings like "20/3".
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any

from .encoding import fraction_to_jsonable, to_fraction
from .registry import BUILTIN, ContentRegistry, EventKind, RegistryError, ResourceKind

SCENARIO_KINDS = ("social_structure", "contract", "negotiation", "exploration")

# ---------------------------------------------------------------------------
# schema dataclasses
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Violation:
    path: str
    message: str

    def __str__(self) -> str:
        return f"{self.path}: {self.message}"


class ScenarioValidationError(ValueError):
    def __init__(self, violations: list[Violation]):
        self.violations = list(violations)
        super().__init__("; ".join(str(v) for v in violations))


@dataclass(frozen=True)
class Placement:
    """Where instances of one kind go: an explicit cell list, or a count to be
    sampled onto distinct open cells at generation time."""

    count: int
    positions: tuple[tuple[int, int], ...] | None = None


@dataclass(frozen=True)
class AgentGroupSpec:
    """One roster entry: `count` agents sharing a role and endowments.
    Instances get ids `<role>_<index>` with indices continuing across entries
    of the same role."""

    role: str
    count: int
    capacity: dict[str, int | None] = field(default_factory=dict)
    preference: dict[str, Fraction] = field(default_factory=dict)
    inventory: dict[str, int] = field(default_factory=dict)
    positions: tuple[tuple[int, int], ...] | None = None


@dataclass(frozen=True)
class AgentInstance:
    """A single resolved agent."""

    agent_id: str
    role: str
    capacity: dict[str, int | None]
    preference: dict[str, Fraction]
    inventory: dict[str, int]
    position: tuple[int, int] | None


@dataclass(frozen=True)
class GroupSpec:
    """Declarative group for imposed social graphs. `members` maps agent id to
    a reward weight, or to None for an equal split."""

    group_id: str
    members: dict[str, Fraction | None]


@dataclass(frozen=True)
class EdgeSpec:
    src: str
    dst: str
    share_observation: bool = True
    reward_weight: Fraction | None = None


@dataclass(frozen=True)
class GraphSpec:
    groups: tuple[GroupSpec, ...] = ()
    edges: tuple[EdgeSpec, ...] = ()


@dataclass(frozen=True)
class SocialStructureConfig:
    kind: str
    initial: GraphSpec
    schedule: tuple[tuple[int, GraphSpec], ...] = ()


@dataclass(frozen=True)
class ContractConfig:
    kind: str
    rounds: int          # each agent selects this many times during formation
    physical_steps: int  # steps after the formation stage


@dataclass(frozen=True)
class NegotiationConfig:
    kind: str
    negotiation_steps: int
    physical_steps: int
    max_proposals: int = 6  # per session; auto-decline afterwards


@dataclass(frozen=True)
class ExplorationConfig:
    kind: str
    groups: int


ScenarioConfig = SocialStructureConfig | ContractConfig | NegotiationConfig | ExplorationConfig


@dataclass(frozen=True)
class ScenarioSpec:
    """Fully resolved scenario, ready for the engine."""

    name: str
    height: int
    width: int
    terrain_blocks: Placement
    registry: ContentRegistry
    piles: dict[str, Placement]
    sites: dict[str, Placement]
    agent_groups: tuple[AgentGroupSpec, ...]
    observation_radius: int
    episode_length: int
    scenario: ScenarioConfig

    def agent_instances(self) -> list[AgentInstance]:
        counters: dict[str, int] = {}
        out: list[AgentInstance] = []
        for group in self.agent_groups:
            for k in range(group.count):
                idx = counters.get(group.role, 0)
                counters[group.role] = idx + 1
                pos = group.positions[k] if group.positions is not None else None
                out.append(
                    AgentInstance(
                        agent_id=f"{group.role}_{idx}",
                        role=group.role,
                        capacity=dict(group.capacity),
                        preference=dict(group.preference),
                        inventory=dict(group.inventory),
                        position=pos,
                    )
                )
        return out

    def agent_ids(self) -> list[str]:
        return [a.agent_id for a in self.agent_instances()]


# ---------------------------------------------------------------------------
# document parsing
# ---------------------------------------------------------------------------


class _Collector:
    """Accumulates violations instead of raising on first error."""

    def __init__(self) -> None:
        self.violations: list[Violation] = []

    def add(self, path: str, message: str) -> None:
        self.violations.append(Violation(path, message))

    def __bool__(self) -> bool:
        return bool(self.violations)


def _parse_positions(raw: Any, path: str, errs: _Collector) -> tuple[tuple[int, int], ...] | None:
    if not isinstance(raw, list):
        errs.add(path, "positions must be a list of [row, col] pairs")
        return None
    out = []
    for i, item in enumerate(raw):
        if (
            not isinstance(item, (list, tuple))
            or len(item) != 2
            or not all(isinstance(v, int) and not isinstance(v, bool) for v in item)
        ):
            errs.add(f"{path}[{i}]", "expected an integer [row, col] pair")
            return None
        out.append((item[0], item[1]))
    return tuple(out)


def _parse_placement(raw: Any, path: str, errs: _Collector) -> Placement | None:
    if isinstance(raw, bool):
        errs.add(path, "expected a count or a positions object")
        return None
    if isinstance(raw, int):
        if raw < 0:
            errs.add(path, "count must be >= 0")
            return None
        return Placement(count=raw)
    if isinstance(raw, dict):
        if "positions" in raw:
            positions = _parse_positions(raw["positions"], f"{path}.positions", errs)
            if positions is None:
                return None
            return Placement(count=len(positions), positions=positions)
        if "count" in raw and isinstance(raw["count"], int) and raw["count"] >= 0:
            return Placement(count=raw["count"])
    errs.add(path, "expected a count or a positions object")
    return None


def _parse_fraction_map(raw: Any, path: str, errs: _Collector) -> dict[str, Fraction]:
    out: dict[str, Fraction] = {}
    if raw is None:
        return out
    if not isinstance(raw, dict):
        errs.add(path, "expected an object of resource -> number")
        return out
    for key, value in raw.items():
        try:
            out[key] = to_fraction(value)
        except (ValueError, ZeroDivisionError):
            errs.add(f"{path}.{key}", f"not a valid number: {value!r}")
    return out


def _parse_capacity_map(raw: Any, path: str, errs: _Collector) -> dict[str, int | None]:
    out: dict[str, int | None] = {}
    if raw is None:
        return out
    if not isinstance(raw, dict):
        errs.add(path, "expected an object of resource -> count or null")
        return out
    for key, value in raw.items():
        if value is None:
            out[key] = None
        elif isinstance(value, int) and not isinstance(value, bool) and value >= 0:
            out[key] = value
        else:
            errs.add(f"{path}.{key}", f"capacity must be a nonnegative integer or null, got {value!r}")
    return out


def _parse_int_map(raw: Any, path: str, errs: _Collector) -> dict[str, int]:
    out: dict[str, int] = {}
    if raw is None:
        return out
    if not isinstance(raw, dict):
        errs.add(path, "expected an object of resource -> count")
        return out
    for key, value in raw.items():
        if isinstance(value, int) and not isinstance(value, bool) and value >= 0:
            out[key] = value
        else:
            errs.add(f"{path}.{key}", f"count must be a nonnegative integer, got {value!r}")
    return out


def _parse_registry(doc: dict, errs: _Collector) -> ContentRegistry | None:
    base = ContentRegistry(resources=dict(BUILTIN.resources), events=dict(BUILTIN.events))
    for i, raw in enumerate(doc.get("custom_resources", [])):
        path = f"custom_resources[{i}]"
        if not isinstance(raw, dict) or "name" not in raw:
            errs.add(path, "expected an object with a name")
            continue
        try:
            base.add_resource(
                ResourceKind(
                    name=str(raw["name"]),
                    objective_reward=to_fraction(raw.get("reward", 0)),
                    requirement=frozenset(raw.get("requirement", [])),
                    synthesized=bool(raw.get("synthesized", False)),
                )
            )
        except (ValueError, TypeError) as exc:
            errs.add(path, str(exc))
    for i, raw in enumerate(doc.get("custom_events", [])):
        path = f"custom_events[{i}]"
        if not isinstance(raw, dict) or "name" not in raw:
            errs.add(path, "expected an object with a name")
            continue
        inputs = _parse_int_map(raw.get("inputs"), f"{path}.inputs", errs)
        outputs = _parse_int_map(raw.get("outputs"), f"{path}.outputs", errs)
        base.add_event(
            EventKind(
                name=str(raw["name"]),
                inputs=tuple(sorted(inputs.items())),
                outputs=tuple(sorted(outputs.items())),
                requirement=frozenset(raw.get("requirement", [])),
            )
        )

    resource_names = doc.get("resources")
    if not isinstance(resource_names, list) or not resource_names:
        errs.add("resources", "expected a nonempty list of resource names")
        return None
    events_raw = doc.get("events", {})
    if not isinstance(events_raw, dict):
        errs.add("events", "expected an object of event -> placement")
        return None
    unknown = False
    for name in resource_names:
        if name not in base.resources:
            errs.add("resources", f"unknown resource {name!r}")
            unknown = True
    for name in events_raw:
        if name not in base.events:
            errs.add("events", f"unknown event {name!r}")
            unknown = True
    if unknown:
        return None
    try:
        return base.subset(list(resource_names), list(events_raw.keys()))
    except RegistryError as exc:
        for problem in exc.problems:
            errs.add("resources", problem)
        return None


def _parse_graph_spec(raw: Any, path: str, errs: _Collector) -> GraphSpec:
    if raw is None:
        return GraphSpec()
    if not isinstance(raw, dict):
        errs.add(path, "expected an object with groups/edges")
        return GraphSpec()
    groups: list[GroupSpec] = []
    for i, g in enumerate(raw.get("groups", [])):
        gpath = f"{path}.groups[{i}]"
        if not isinstance(g, dict) or "id" not in g:
            errs.add(gpath, "expected an object with id and members")
            continue
        members_raw = g.get("members", [])
        members: dict[str, Fraction | None] = {}
        if isinstance(members_raw, list):
            for m in members_raw:
                members[str(m)] = None
        elif isinstance(members_raw, dict):
            for m, w in members_raw.items():
                if w is None:
                    members[str(m)] = None
                else:
                    try:
                        members[str(m)] = to_fraction(w)
                    except (ValueError, ZeroDivisionError):
                        errs.add(f"{gpath}.members.{m}", f"not a valid weight: {w!r}")
        else:
            errs.add(gpath, "members must be a list or an object of id -> weight")
        groups.append(GroupSpec(group_id=str(g["id"]), members=members))
    edges: list[EdgeSpec] = []
    for i, e in enumerate(raw.get("edges", [])):
        epath = f"{path}.edges[{i}]"
        if not isinstance(e, dict) or "from" not in e or "to" not in e:
            errs.add(epath, "expected an object with from/to")
            continue
        weight = None
        if e.get("reward_weight") is not None:
            try:
                weight = to_fraction(e["reward_weight"])
            except (ValueError, ZeroDivisionError):
                errs.add(f"{epath}.reward_weight", f"not a valid weight: {e['reward_weight']!r}")
        edges.append(
            EdgeSpec(
                src=str(e["from"]),
                dst=str(e["to"]),
                share_observation=bool(e.get("share_observation", True)),
                reward_weight=weight,
            )
        )
    return GraphSpec(groups=tuple(groups), edges=tuple(edges))


def _parse_scenario_config(
    raw: Any, n_agents: int, episode_length: int, errs: _Collector
) -> ScenarioConfig | None:
    if not isinstance(raw, dict) or "kind" not in raw:
        errs.add("scenario", "expected an object with a kind")
        return None
    kind = raw["kind"]
    if kind not in SCENARIO_KINDS:
        errs.add("scenario.kind", f"unknown kind {kind!r}; expected one of {SCENARIO_KINDS}")
        return None

    def req_int(key: str, minimum: int, default: int | None = None) -> int | None:
        value = raw.get(key, default)
        if isinstance(value, int) and not isinstance(value, bool) and value >= minimum:
            return value
        errs.add(f"scenario.{key}", f"expected an integer >= {minimum}, got {value!r}")
        return None

    if kind == "contract":
        rounds = req_int("rounds", 1)
        physical = req_int("physical_steps", 0)
        if rounds is None or physical is None:
            return None
        if episode_length != rounds * n_agents + physical:
            errs.add(
                "episode_length",
                f"contract episodes run rounds*agents + physical_steps = "
                f"{rounds * n_agents + physical} steps, got {episode_length}",
            )
        return ContractConfig(kind=kind, rounds=rounds, physical_steps=physical)
    if kind == "negotiation":
        stage = req_int("negotiation_steps", 1)
        physical = req_int("physical_steps", 0)
        max_props = req_int("max_proposals", 1, default=6)
        if stage is None or physical is None or max_props is None:
            return None
        if episode_length != stage + physical:
            errs.add(
                "episode_length",
                f"negotiation episodes run negotiation_steps + physical_steps = "
                f"{stage + physical} steps, got {episode_length}",
            )
        return NegotiationConfig(
            kind=kind, negotiation_steps=stage, physical_steps=physical, max_proposals=max_props
        )
    if kind == "exploration":
        groups = req_int("groups", 0, default=0)
        if groups is None:
            return None
        return ExplorationConfig(kind=kind, groups=groups)

    initial = _parse_graph_spec(raw.get("initial"), "scenario.initial", errs)
    schedule: list[tuple[int, GraphSpec]] = []
    sched_raw = raw.get("schedule", [])
    if not isinstance(sched_raw, list):
        errs.add("scenario.schedule", "expected a list of {step, graph} objects")
        sched_raw = []
    last_step = 0
    for i, entry in enumerate(sched_raw):
        path = f"scenario.schedule[{i}]"
        if not isinstance(entry, dict) or "step" not in entry:
            errs.add(path, "expected an object with step and graph")
            continue
        step = entry["step"]
        if not isinstance(step, int) or isinstance(step, bool) or step <= 0:
            errs.add(f"{path}.step", f"expected a positive integer, got {step!r}")
            continue
        if step <= last_step:
            errs.add(f"{path}.step", "schedule steps must be strictly increasing")
        if step >= episode_length:
            errs.add(f"{path}.step", f"switch step {step} not before episode end {episode_length}")
        last_step = step
        schedule.append((step, _parse_graph_spec(entry.get("graph"), f"{path}.graph", errs)))
    return SocialStructureConfig(kind=kind, initial=initial, schedule=tuple(schedule))


def _validate_graph_spec(
    graph: GraphSpec, path: str, agent_ids: set[str], errs: _Collector
) -> None:
    seen_groups: set[str] = set()
    for i, group in enumerate(graph.groups):
        gpath = f"{path}.groups[{i}]"
        if group.group_id in seen_groups:
            errs.add(gpath, f"duplicate group id {group.group_id!r}")
        seen_groups.add(group.group_id)
        if not group.members:
            errs.add(gpath, "group has no members")
        weights = [w for w in group.members.values() if w is not None]
        if weights and len(weights) != len(group.members):
            errs.add(gpath, "mix of explicit and equal-split member weights")
        if weights:
            total = sum(weights)
            if abs(total - 1) > Fraction(1, 10**9):
                errs.add(gpath, f"member weights sum to {float(total):.9f}, expected 1")
            if any(w < 0 or w > 1 for w in weights):
                errs.add(gpath, "member weights must lie in [0, 1]")
        for member in group.members:
            if member not in agent_ids:
                errs.add(f"{gpath}.members.{member}", "unknown agent id")
    for i, edge in enumerate(graph.edges):
        epath = f"{path}.edges[{i}]"
        for endpoint in (edge.src, edge.dst):
            if endpoint not in agent_ids and endpoint not in seen_groups:
                errs.add(epath, f"unknown node {endpoint!r}")
        if edge.reward_weight is not None and not (0 <= edge.reward_weight <= 1):
            errs.add(f"{epath}.reward_weight", "must lie in [0, 1]")


def parse_document(doc: dict) -> tuple[ScenarioSpec | None, list[Violation]]:
    """Parse and fully validate a scenario document.

    Returns (spec, []) on success or (None, violations) on failure; never
    raises for content problems.
    """
    errs = _Collector()
    if not isinstance(doc, dict):
        return None, [Violation("$", "scenario document must be a JSON object")]

    map_raw = doc.get("map", {})
    height = map_raw.get("height") if isinstance(map_raw, dict) else None
    width = map_raw.get("width") if isinstance(map_raw, dict) else None
    if not isinstance(height, int) or isinstance(height, bool) or height < 1:
        errs.add("map.height", f"expected a positive integer, got {height!r}")
        height = 1
    if not isinstance(width, int) or isinstance(width, bool) or width < 1:
        errs.add("map.width", f"expected a positive integer, got {width!r}")
        width = 1

    terrain_raw = doc.get("terrain", {"blocks": 0})
    blocks = None
    if isinstance(terrain_raw, dict):
        if "positions" in terrain_raw:
            positions = _parse_positions(terrain_raw["positions"], "terrain.positions", errs)
            if positions is not None:
                blocks = Placement(count=len(positions), positions=positions)
        else:
            blocks = _parse_placement(terrain_raw.get("blocks", 0), "terrain.blocks", errs)
    else:
        errs.add("terrain", "expected an object")
    if blocks is None:
        blocks = Placement(count=0)

    registry = _parse_registry(doc, errs)

    piles: dict[str, Placement] = {}
    for name, raw in (doc.get("piles") or {}).items():
        placement = _parse_placement(raw, f"piles.{name}", errs)
        if placement is not None:
            piles[name] = placement
    sites: dict[str, Placement] = {}
    for name, raw in (doc.get("events") or {}).items():
        placement = _parse_placement(raw, f"events.{name}", errs)
        if placement is not None:
            sites[name] = placement

    agent_groups: list[AgentGroupSpec] = []
    agents_raw = doc.get("agents")
    if not isinstance(agents_raw, list) or not agents_raw:
        errs.add("agents", "expected a nonempty list of roster entries")
        agents_raw = []
    for i, raw in enumerate(agents_raw):
        path = f"agents[{i}]"
        if not isinstance(raw, dict) or "role" not in raw:
            errs.add(path, "expected an object with a role")
            continue
        role = str(raw["role"])
        if not role or not role.replace("_", "").isalnum():
            errs.add(f"{path}.role", f"role must be alphanumeric/underscore, got {role!r}")
        count = raw.get("count", 1)
        if not isinstance(count, int) or isinstance(count, bool) or count < 1:
            errs.add(f"{path}.count", f"expected a positive integer, got {count!r}")
            count = 1
        positions = None
        if raw.get("positions") is not None:
            positions = _parse_positions(raw["positions"], f"{path}.positions", errs)
            if positions is not None and len(positions) != count:
                errs.add(f"{path}.positions", f"expected {count} positions, got {len(positions)}")
        agent_groups.append(
            AgentGroupSpec(
                role=role,
                count=count,
                capacity=_parse_capacity_map(raw.get("capacity"), f"{path}.capacity", errs),
                preference=_parse_fraction_map(raw.get("preference"), f"{path}.preference", errs),
                inventory=_parse_int_map(raw.get("inventory"), f"{path}.inventory", errs),
                positions=positions,
            )
        )

    radius = doc.get("observation_radius", 3)
    if not isinstance(radius, int) or isinstance(radius, bool) or radius < 0:
        errs.add("observation_radius", f"expected an integer >= 0, got {radius!r}")
        radius = 0
    episode_length = doc.get("episode_length")
    if not isinstance(episode_length, int) or isinstance(episode_length, bool) or episode_length < 1:
        errs.add("episode_length", f"expected a positive integer, got {episode_length!r}")
        episode_length = 1

    n_agents = sum(g.count for g in agent_groups)
    scenario = _parse_scenario_config(doc.get("scenario"), n_agents, episode_length, errs)

    spec = None
    if registry is not None and scenario is not None and not errs:
        spec = ScenarioSpec(
            name=str(doc.get("name", "custom")),
            height=height,
            width=width,
            terrain_blocks=blocks,
            registry=registry,
            piles=piles,
            sites=sites,
            agent_groups=tuple(agent_groups),
            observation_radius=radius,
            episode_length=episode_length,
            scenario=scenario,
        )
        _validate_semantics(spec, errs)
        if errs:
            spec = None
    return spec, errs.violations


def _validate_semantics(spec: ScenarioSpec, errs: _Collector) -> None:
    """Cross-field checks on a structurally sound document."""
    cells = spec.height * spec.width
    in_bounds = lambda p: 0 <= p[0] < spec.height and 0 <= p[1] < spec.width

    if spec.terrain_blocks.positions is not None:
        for pos in spec.terrain_blocks.positions:
            if not in_bounds(pos):
                errs.add("terrain.positions", f"{list(pos)} outside the {spec.height}x{spec.width} map")
        if len(set(spec.terrain_blocks.positions)) != len(spec.terrain_blocks.positions):
            errs.add("terrain.positions", "duplicate block positions")
    if spec.terrain_blocks.count > cells:
        errs.add("terrain.blocks", f"{spec.terrain_blocks.count} blocks exceed {cells} cells")
    open_cells = cells - spec.terrain_blocks.count
    blocked = set(spec.terrain_blocks.positions or ())

    total_sites = sum(p.count for p in spec.sites.values())
    if total_sites > open_cells:
        errs.add("events", f"{total_sites} sites exceed {open_cells} open cells")
    site_positions: set[tuple[int, int]] = set()
    for name, placement in spec.sites.items():
        if placement.positions is not None:
            for pos in placement.positions:
                if not in_bounds(pos):
                    errs.add(f"events.{name}.positions", f"{list(pos)} outside the map")
                elif pos in blocked:
                    errs.add(f"events.{name}.positions", f"{list(pos)} is a terrain block")
                elif pos in site_positions:
                    errs.add(f"events.{name}.positions", f"{list(pos)} already holds a site")
                site_positions.add(pos)

    for name, placement in spec.piles.items():
        if name not in spec.registry.resources:
            errs.add(f"piles.{name}", "unknown resource")
            continue
        if spec.registry.resource(name).synthesized:
            errs.add(f"piles.{name}", "synthesized resources cannot be placed at generation")
        if placement.count > open_cells:
            errs.add(f"piles.{name}", f"{placement.count} piles exceed {open_cells} open cells")
        if placement.positions is not None:
            for pos in placement.positions:
                if not in_bounds(pos):
                    errs.add(f"piles.{name}.positions", f"{list(pos)} outside the map")
                elif pos in blocked:
                    errs.add(f"piles.{name}.positions", f"{list(pos)} is a terrain block")
            if len(set(placement.positions)) != len(placement.positions):
                errs.add(f"piles.{name}.positions", "duplicate pile positions")

    instances = spec.agent_instances()
    ids = [a.agent_id for a in instances]
    if len(set(ids)) != len(ids):
        errs.add("agents", "agent ids collide; check role/count combinations")
    if len(instances) > max(0, open_cells - total_sites):
        errs.add("agents", f"{len(instances)} agents exceed {max(0, open_cells - total_sites)} open site-free cells")

    for i, group in enumerate(spec.agent_groups):
        path = f"agents[{i}]"
        for res_map, label in (
            (group.capacity, "capacity"),
            (group.preference, "preference"),
            (group.inventory, "inventory"),
        ):
            for name in res_map:
                if name not in spec.registry.resources:
                    errs.add(f"{path}.{label}.{name}", "unknown resource")
        for name, count in group.inventory.items():
            cap = group.capacity.get(name)
            if cap is not None and count > cap:
                errs.add(f"{path}.inventory.{name}", f"initial {count} exceeds capacity {cap}")
        if group.positions is not None:
            for pos in group.positions:
                if not in_bounds(pos):
                    errs.add(f"{path}.positions", f"{list(pos)} outside the map")
                elif pos in blocked:
                    errs.add(f"{path}.positions", f"{list(pos)} is a terrain block")
                elif pos in site_positions:
                    errs.add(f"{path}.positions", f"{list(pos)} holds an event site")

    agent_id_set = set(ids)
    sc = spec.scenario
    if isinstance(sc, SocialStructureConfig):
        _validate_graph_spec(sc.initial, "scenario.initial", agent_id_set, errs)
        for i, (_, graph) in enumerate(sc.schedule):
            _validate_graph_spec(graph, f"scenario.schedule[{i}].graph", agent_id_set, errs)


def validate_document(doc: dict) -> list[Violation]:
    """Non-raising validation entry point; empty list means valid."""
    _, violations = parse_document(doc)
    return violations


def load_scenario(doc: dict) -> ScenarioSpec:
    spec, violations = parse_document(doc)
    if spec is None:
        raise ScenarioValidationError(violations)
    return spec


def load_scenario_file(path: str | Path) -> ScenarioSpec:
    with open(path, "r", encoding="utf-8") as fh:
        return load_scenario(json.load(fh))


# ---------------------------------------------------------------------------
# serialization (round trip)
# ---------------------------------------------------------------------------


def _placement_to_doc(placement: Placement) -> Any:
    if placement.positions is not None:
        return {"positions": [list(p) for p in placement.positions]}
    return placement.count


def _graph_spec_to_doc(graph: GraphSpec) -> dict:
    return {
        "groups": [
            {
                "id": g.group_id,
                "members": {
                    m: (None if w is None else fraction_to_jsonable(w))
                    for m, w in g.members.items()
                },
            }
            for g in graph.groups
        ],
        "edges": [
            {
                "from": e.src,
                "to": e.dst,
                "share_observation": e.share_observation,
                **({"reward_weight": fraction_to_jsonable(e.reward_weight)} if e.reward_weight is not None else {}),
            }
            for e in graph.edges
        ],
    }


def scenario_to_document(spec: ScenarioSpec) -> dict:
    """Inverse of load_scenario: parsing the result yields an equal spec."""
    sc = spec.scenario
    if isinstance(sc, ContractConfig):
        scenario_doc: dict = {"kind": sc.kind, "rounds": sc.rounds, "physical_steps": sc.physical_steps}
    elif isinstance(sc, NegotiationConfig):
        scenario_doc = {
            "kind": sc.kind,
            "negotiation_steps": sc.negotiation_steps,
            "physical_steps": sc.physical_steps,
            "max_proposals": sc.max_proposals,
        }
    elif isinstance(sc, ExplorationConfig):
        scenario_doc = {"kind": sc.kind, "groups": sc.groups}
    else:
        scenario_doc = {
            "kind": sc.kind,
            "initial": _graph_spec_to_doc(sc.initial),
            "schedule": [{"step": step, "graph": _graph_spec_to_doc(g)} for step, g in sc.schedule],
        }

    doc: dict = {
        "name": spec.name,
        "map": {"height": spec.height, "width": spec.width},
        "terrain": (
            {"positions": [list(p) for p in spec.terrain_blocks.positions]}
            if spec.terrain_blocks.positions is not None
            else {"blocks": spec.terrain_blocks.count}
        ),
        "resources": list(spec.registry.resources.keys()),
        "events": {name: _placement_to_doc(p) for name, p in spec.sites.items()},
        "piles": {name: _placement_to_doc(p) for name, p in spec.piles.items()},
        "agents": [
            {
                "role": g.role,
                "count": g.count,
                "capacity": dict(g.capacity),
                "preference": {k: fraction_to_jsonable(v) for k, v in g.preference.items()},
                "inventory": dict(g.inventory),
                **({"positions": [list(p) for p in g.positions]} if g.positions is not None else {}),
            }
            for g in spec.agent_groups
        ],
        "observation_radius": spec.observation_radius,
        "episode_length": spec.episode_length,
        "scenario": scenario_doc,
    }
    custom_res = [
        {
            "name": r.name,
            "reward": fraction_to_jsonable(r.objective_reward),
            "requirement": sorted(r.requirement),
            "synthesized": r.synthesized,
        }
        for r in spec.registry.resources.values()
        if r.name not in BUILTIN.resources
    ]
    custom_ev = [
        {
            "name": e.name,
            "inputs": e.input_map(),
            "outputs": e.output_map(),
            "requirement": sorted(e.requirement),
        }
        for e in spec.registry.events.values()
        if e.name not in BUILTIN.events
    ]
    if custom_res:
        doc["custom_resources"] = custom_res
    if custom_ev:
        doc["custom_events"] = custom_ev
    return doc


# ---------------------------------------------------------------------------
# presets
# ---------------------------------------------------------------------------

PRESET_NAMES = ("easy", "hard", "exploration")


def _inequality_weights(n: int) -> list[Fraction]:
    """Linearly declining weights: (n, n-1, ..., 1) / (n(n+1)/2).
    For four agents this is 0.4/0.3/0.2/0.1."""
    total = n * (n + 1) // 2
    return [Fraction(n - i, total) for i in range(n)]


def _dynamic_schedule_doc(agent_ids: list[str], roles: dict[str, str]) -> dict:
    """Inequality at start, independent pairs at 30, overlapping at 60."""
    weights = _inequality_weights(len(agent_ids))
    carpenters = [a for a in agent_ids if roles[a] == "carpenter"]
    miners = [a for a in agent_ids if roles[a] == "miner"]
    if carpenters and len(carpenters) == len(miners):
        pairs = list(zip(carpenters, miners))
    else:
        pairs = list(zip(agent_ids[0::2], agent_ids[1::2]))
    independent = {
        "groups": [{"id": f"g{i}", "members": [c, m]} for i, (c, m) in enumerate(pairs)],
        "edges": [],
    }
    anchor = carpenters[0] if carpenters else agent_ids[0]
    overlapping = {
        "groups": [
            {"id": f"g{i}", "members": sorted(set([c, m] + ([anchor] if i == 1 else [])))}
            for i, (c, m) in enumerate(pairs)
        ],
        "edges": [],
    }
    return {
        "kind": "social_structure",
        "initial": {
            "groups": [
                {
                    "id": "g_all",
                    "members": {a: fraction_to_jsonable(w) for a, w in zip(agent_ids, weights)},
                }
            ],
            "edges": [],
        },
        "schedule": [
            {"step": 30, "graph": independent},
            {"step": 60, "graph": overlapping},
        ],
    }


def _scenario_doc_for(kind: str, n_agents: int, agent_ids: list[str], roles: dict[str, str]) -> tuple[dict, int]:
    """Scenario sub-document and matching episode length for a preset base."""
    if kind == "contract":
        rounds, physical = 2, 100
        return {"kind": "contract", "rounds": rounds, "physical_steps": physical}, rounds * n_agents + physical
    if kind == "negotiation":
        stage, physical = 20, 100
        return {
            "kind": "negotiation",
            "negotiation_steps": stage,
            "physical_steps": physical,
            "max_proposals": 6,
        }, stage + physical
    if kind == "exploration":
        return {"kind": "exploration", "groups": n_agents}, 120
    if kind == "social_structure":
        return _dynamic_schedule_doc(agent_ids, roles), 90
    raise ValueError(f"unknown scenario kind {kind!r}")


def preset_document(name: str, kind: str | None = None) -> dict:
    """Built-in scenario documents.

    `name` picks the physical setting (easy, hard, exploration); `kind`
    overrides the scenario mini-game (defaults: easy/hard -> contract,
    exploration -> exploration). Pile counts default to one full supply run
    per event site; iron on hard (consumed by no in-scenario event) gets a
    fixed stock of 30.
    """
    if name == "easy":
        agents = [
            {"role": "carpenter", "count": 2, "capacity": {"hammer": 1}},
            {"role": "miner", "count": 2, "capacity": {"wood": 0, "stone": 0}, "preference": {"hammer": 2}},
        ]
        doc = {
            "name": "easy",
            "map": {"height": 7, "width": 7},
            "terrain": {"blocks": 0},
            "resources": ["wood", "stone", "hammer"],
            "events": {"hammer_craft": 41},
            "piles": {"wood": 41, "stone": 41},
            "agents": agents,
            "observation_radius": 3,
        }
        kind = kind or "contract"
    elif name == "hard":
        shared_pref = {"coal": 5, "torch": 1.5, "iron": "20/3"}
        agents = [
            {"role": "carpenter", "count": 4, "capacity": {"hammer": 1, "coal": 0}, "preference": dict(shared_pref)},
            {"role": "miner", "count": 4, "capacity": {"stone": 0, "torch": 1, "iron": 0}, "preference": dict(shared_pref)},
        ]
        doc = {
            "name": "hard",
            "map": {"height": 15, "width": 15},
            "terrain": {"blocks": 0},
            "resources": ["wood", "stone", "hammer", "coal", "torch", "iron"],
            "events": {"hammer_craft": 98, "torch_craft": 98},
            "piles": {"wood": 196, "stone": 98, "coal": 98, "iron": 30},
            "agents": agents,
            "observation_radius": 3,
        }
        kind = kind or "contract"
    elif name == "exploration":
        agents = [{"role": "explorer", "count": 4}]
        doc = {
            "name": "exploration",
            "map": {"height": 20, "width": 20},
            "terrain": {"blocks": 25},
            "resources": [
                "wood", "stone", "hammer", "coal", "torch", "iron", "steel",
                "shovel", "pickaxe", "gem_mine", "clay", "pottery", "cutter", "gem", "totem",
            ],
            "events": {
                "hammer_craft": 40,
                "torch_craft": 40,
                "steel_making": 30,
                "potting": 30,
                "shovel_craft": 20,
                "pickaxe_craft": 20,
                "cutter_craft": 20,
                "gem_cutting": 10,
                "totem_making": 10,
            },
            "piles": {"wood": 160, "stone": 100, "coal": 100, "iron": 30, "gem_mine": 10, "clay": 60},
            "agents": agents,
            "observation_radius": 3,
        }
        kind = kind or "exploration"
    else:
        raise KeyError(f"unknown preset {name!r}; expected one of {PRESET_NAMES}")

    n_agents = sum(a.get("count", 1) for a in agents)
    ids: list[str] = []
    roles: dict[str, str] = {}
    counters: dict[str, int] = {}
    for entry in agents:
        for _ in range(entry.get("count", 1)):
            idx = counters.get(entry["role"], 0)
            counters[entry["role"]] = idx + 1
            aid = f"{entry['role']}_{idx}"
            ids.append(aid)
            roles[aid] = entry["role"]
    scenario_doc, episode_length = _scenario_doc_for(kind, n_agents, ids, roles)
    doc["scenario"] = scenario_doc
    doc["episode_length"] = episode_length
    doc["name"] = f"{name}_{kind}" if kind != doc["name"] else name
    return doc


def preset(name: str, kind: str | None = None) -> ScenarioSpec:
    return load_scenario(preset_document(name, kind))
