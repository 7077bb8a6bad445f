"""Multi-layer directed social graph: sharing, grouping, redistribution.

Layer 1 holds agent nodes, layer 2 holds group nodes. Directed edges carry
two attributes: `share_observation` (the source's map window is merged into
the target's observation) and `reward_weight`. An agent->group edge is a
membership; its weight is the member's share of the group's pooled reward,
or None for an equal split among current members.

Reward redistribution: each grouped agent contributes its raw step reward to
its groups (split equally across them when it belongs to several); each group
then pays member i `w_i * pool`. Ungrouped agents keep their raw reward. All
arithmetic is exact rationals, so the total is conserved exactly.

Structure taxonomy (two layers or fewer):
- ISOLATION      no groups, no edges
- CONNECTION     no groups, some agent-agent edges
- INDEPENDENT    every agent in exactly one group, uniform shares
- OVERLAPPING    some agent in more than one group
- INEQUALITY     grouped with non-uniform shares inside a group
Graphs outside the taxonomy (more than two layers, partial grouping) report
UNCLASSIFIED. Inequality is checked before the membership-count categories,
otherwise a single unequal group would masquerade as INDEPENDENT.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

from .config import GraphSpec
from .encoding import fraction_to_jsonable, to_fraction

AGENT_LAYER = 1
GROUP_LAYER = 2

# classification categories
ISOLATION = "isolation"
CONNECTION = "connection"
INDEPENDENT = "independent_group"
OVERLAPPING = "overlapping_group"
INEQUALITY = "inequality"
UNCLASSIFIED = "unclassified"


class SocialGraphError(ValueError):
    pass


@dataclass(frozen=True)
class EdgeAttrs:
    share_observation: bool = False
    reward_weight: Fraction | None = None


@dataclass
class SocialGraph:
    """Nodes keyed by globally unique ids; edges keyed by (src, dst)."""

    layers: dict[str, int] = field(default_factory=dict)
    edges: dict[tuple[str, str], EdgeAttrs] = field(default_factory=dict)

    # -- nodes ------------------------------------------------------------

    def add_node(self, node_id: str, layer: int) -> None:
        existing = self.layers.get(node_id)
        if existing is not None and existing != layer:
            raise SocialGraphError(f"node {node_id!r} already exists in layer {existing}")
        self.layers[node_id] = layer

    def remove_node(self, node_id: str) -> None:
        self.layers.pop(node_id, None)
        for key in [k for k in self.edges if node_id in k]:
            del self.edges[key]

    def nodes_in_layer(self, layer: int) -> list[str]:
        return sorted(n for n, l in self.layers.items() if l == layer)

    def agents(self) -> list[str]:
        return self.nodes_in_layer(AGENT_LAYER)

    def groups(self) -> list[str]:
        return self.nodes_in_layer(GROUP_LAYER)

    def layer_count(self) -> int:
        return len(set(self.layers.values()))

    # -- edges ------------------------------------------------------------

    def add_edge(
        self,
        src: str,
        dst: str,
        share_observation: bool = False,
        reward_weight: Fraction | None = None,
    ) -> None:
        if src not in self.layers or dst not in self.layers:
            raise SocialGraphError(f"both endpoints must exist: {src!r} -> {dst!r}")
        if src == dst:
            raise SocialGraphError("self edges are not allowed")
        if reward_weight is not None and not (0 <= reward_weight <= 1):
            raise SocialGraphError(f"reward_weight {reward_weight} outside [0, 1]")
        self.edges[(src, dst)] = EdgeAttrs(share_observation, reward_weight)

    def remove_edge(self, src: str, dst: str) -> None:
        self.edges.pop((src, dst), None)

    def has_edge(self, src: str, dst: str) -> bool:
        return (src, dst) in self.edges

    def out_edges(self, src: str) -> list[tuple[str, EdgeAttrs]]:
        return sorted(
            ((dst, attrs) for (s, dst), attrs in self.edges.items() if s == src),
            key=lambda item: item[0],
        )

    def in_edges(self, dst: str) -> list[tuple[str, EdgeAttrs]]:
        return sorted(
            ((src, attrs) for (src, d), attrs in self.edges.items() if d == dst),
            key=lambda item: item[0],
        )

    # -- groups -----------------------------------------------------------

    def members_of(self, group_id: str) -> list[str]:
        return sorted(
            src
            for (src, dst) in self.edges
            if dst == group_id and self.layers.get(src) == AGENT_LAYER
        )

    def groups_of(self, agent_id: str) -> list[str]:
        return sorted(
            dst
            for (src, dst) in self.edges
            if src == agent_id and self.layers.get(dst) == GROUP_LAYER
        )

    def member_weights(self, group_id: str) -> dict[str, Fraction]:
        """Resolved member shares: explicit weights, or an equal split when
        every membership edge leaves the weight unset."""
        members = self.members_of(group_id)
        if not members:
            return {}
        raw = {m: self.edges[(m, group_id)].reward_weight for m in members}
        if all(w is None for w in raw.values()):
            share = Fraction(1, len(members))
            return {m: share for m in members}
        resolved = {m: (w if w is not None else Fraction(0)) for m, w in raw.items()}
        total = sum(resolved.values())
        if abs(total - 1) > Fraction(1, 10**9):
            raise SocialGraphError(
                f"group {group_id!r} member weights sum to {float(total)}, expected 1"
            )
        return resolved

    def join_group(self, agent_id: str, group_id: str, weight: Fraction | None = None) -> None:
        self.add_edge(agent_id, group_id, share_observation=False, reward_weight=weight)

    def leave_group(self, agent_id: str, group_id: str) -> None:
        self.remove_edge(agent_id, group_id)

    # -- snapshots --------------------------------------------------------

    def snapshot(self) -> dict:
        return {
            "nodes": [
                {"id": node_id, "layer": layer}
                for node_id, layer in sorted(self.layers.items())
            ],
            "edges": [
                {
                    "from": src,
                    "to": dst,
                    "share_observation": attrs.share_observation,
                    "reward_weight": (
                        None
                        if attrs.reward_weight is None
                        else fraction_to_jsonable(attrs.reward_weight)
                    ),
                }
                for (src, dst), attrs in sorted(self.edges.items())
            ],
        }

    @staticmethod
    def from_snapshot(snap: dict) -> "SocialGraph":
        graph = SocialGraph()
        for node in snap.get("nodes", []):
            graph.add_node(node["id"], int(node["layer"]))
        for edge in snap.get("edges", []):
            weight = edge.get("reward_weight")
            graph.add_edge(
                edge["from"],
                edge["to"],
                share_observation=bool(edge.get("share_observation", False)),
                reward_weight=None if weight is None else to_fraction(weight),
            )
        return graph

    def copy(self) -> "SocialGraph":
        return SocialGraph(layers=dict(self.layers), edges=dict(self.edges))


def build_graph(spec: GraphSpec, agent_ids: list[str]) -> SocialGraph:
    """Materialize a declarative GraphSpec over the given roster."""
    graph = SocialGraph()
    for agent_id in agent_ids:
        graph.add_node(agent_id, AGENT_LAYER)
    for group in spec.groups:
        graph.add_node(group.group_id, GROUP_LAYER)
        for member, weight in group.members.items():
            graph.join_group(member, group.group_id, weight)
    for edge in spec.edges:
        graph.add_edge(
            edge.src,
            edge.dst,
            share_observation=edge.share_observation,
            reward_weight=edge.reward_weight,
        )
    return graph


# ---------------------------------------------------------------------------
# classification
# ---------------------------------------------------------------------------


def classify_structure(graph: SocialGraph) -> str:
    """Name the structure category of a (<= 2 layer) social graph."""
    if graph.layer_count() > 2 or any(
        layer not in (AGENT_LAYER, GROUP_LAYER) for layer in graph.layers.values()
    ):
        return UNCLASSIFIED
    agents = graph.agents()
    groups = graph.groups()
    if not groups:
        return ISOLATION if not graph.edges else CONNECTION
    memberships = {a: len(graph.groups_of(a)) for a in agents}
    populated = [g for g in groups if graph.members_of(g)]
    for group_id in populated:
        weights = graph.member_weights(group_id)
        if len(set(weights.values())) > 1:
            return INEQUALITY
    if any(count > 1 for count in memberships.values()):
        return OVERLAPPING
    if agents and all(count == 1 for count in memberships.values()):
        return INDEPENDENT
    return UNCLASSIFIED


# ---------------------------------------------------------------------------
# reward redistribution
# ---------------------------------------------------------------------------


def redistribute(raw_rewards: dict[str, Fraction], graph: SocialGraph) -> dict[str, Fraction]:
    """Map raw step rewards to shared rewards through the group layer.

    Exact-rational throughout; sum(shared) == sum(raw) identically.
    """
    shared: dict[str, Fraction] = {}
    pools: dict[str, Fraction] = {}
    for agent_id, raw in raw_rewards.items():
        groups = graph.groups_of(agent_id) if agent_id in graph.layers else []
        if not groups:
            shared[agent_id] = raw
        else:
            shared[agent_id] = Fraction(0)
            contribution = Fraction(raw, len(groups)) if raw else Fraction(0)
            for group_id in groups:
                pools[group_id] = pools.get(group_id, Fraction(0)) + contribution
    for group_id, pool in pools.items():
        for member, weight in graph.member_weights(group_id).items():
            if member in shared:
                shared[member] += weight * pool
    return shared


# ---------------------------------------------------------------------------
# bargaining weight algebra
# ---------------------------------------------------------------------------


def merge_weights(
    group_weights: dict[str, Fraction],
    newcomer: str,
    representative_share: Fraction,
    newcomer_share: Fraction,
) -> dict[str, Fraction]:
    """Fold a newcomer into a weighted group.

    The group's representative negotiated (representative_share,
    newcomer_share), summing to 1. Every existing member keeps its old weight
    scaled by representative_share; the newcomer enters at newcomer_share.
    The result sums to exactly 1 whenever the inputs did.
    """
    if newcomer in group_weights:
        raise SocialGraphError(f"{newcomer!r} is already a member")
    if abs(representative_share + newcomer_share - 1) > Fraction(1, 10**9):
        raise SocialGraphError("negotiated shares must sum to 1")
    merged = {member: weight * representative_share for member, weight in group_weights.items()}
    merged[newcomer] = newcomer_share
    return merged


# ---------------------------------------------------------------------------
# observation sharing
# ---------------------------------------------------------------------------


def observation_sources(graph: SocialGraph, agent_id: str) -> list[str]:
    """Agents whose map windows flow to `agent_id` (edge source -> target
    with share_observation set)."""
    return sorted(
        src
        for src, attrs in graph.in_edges(agent_id)
        if attrs.share_observation and graph.layers.get(src) == AGENT_LAYER
    )


# ---------------------------------------------------------------------------
# degree statistics
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DegreeStats:
    """Degrees over all edges incident to one node layer.

    When every incident edge is reciprocated the graph is symmetric and
    `average`/`maximum` describe the undirected degree; otherwise they mirror
    the in-direction and the explicit in/out fields should be read."""

    average_in: float
    maximum_in: int
    average_out: float
    maximum_out: int
    symmetric: bool

    @property
    def average(self) -> float:
        return self.average_in

    @property
    def maximum(self) -> int:
        return self.maximum_in

    def to_jsonable(self) -> dict:
        return {
            "average_in": self.average_in,
            "maximum_in": self.maximum_in,
            "average_out": self.average_out,
            "maximum_out": self.maximum_out,
            "symmetric": self.symmetric,
        }


def degree_stats(graph: SocialGraph, layer: int) -> DegreeStats:
    nodes = graph.nodes_in_layer(layer)
    if not nodes:
        return DegreeStats(0.0, 0, 0.0, 0, True)
    indeg = {n: 0 for n in nodes}
    outdeg = {n: 0 for n in nodes}
    touching: list[tuple[str, str]] = []
    for (src, dst) in graph.edges:
        if src in outdeg:
            outdeg[src] += 1
            touching.append((src, dst))
        if dst in indeg:
            indeg[dst] += 1
            if src not in outdeg:
                touching.append((src, dst))
    symmetric = all((dst, src) in graph.edges for (src, dst) in touching)
    n = len(nodes)
    return DegreeStats(
        average_in=sum(indeg.values()) / n,
        maximum_in=max(indeg.values()),
        average_out=sum(outdeg.values()) / n,
        maximum_out=max(outdeg.values()),
        symmetric=symmetric,
    )
