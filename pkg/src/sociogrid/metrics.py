"""Episode metrics: fairness, completion, normalized reward, structure stats.

All reward arithmetic stays in exact rationals until the final float
conversion, so metric values are reproducible bit-for-bit across platforms.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping

from .encoding import fraction_to_jsonable, to_fraction
from .social import (
    AGENT_LAYER,
    GROUP_LAYER,
    SocialGraph,
    classify_structure,
    degree_stats,
)
from .trace import Trace, TraceError


def fairness(values: Iterable | Mapping) -> float | None:
    """1 - (sum of pairwise absolute differences) / (2 * n * total).

    1.0 means perfectly even (including the all-zero case, where nobody is
    ahead of anybody). None means undefined: the differences are nonzero but
    the total is zero or negative, so the normalizer has no meaning.
    """
    if isinstance(values, Mapping):
        values = values.values()
    vals = [to_fraction(v) for v in values]
    n = len(vals)
    if n == 0:
        return None
    diff = Fraction(0)
    for i in range(n):
        for j in range(n):
            diff += abs(vals[i] - vals[j])
    if diff == 0:
        return 1.0
    total = sum(vals)
    if total <= 0:
        return None
    return float(1 - Fraction(diff, 2 * n * total))


def completion_rate(
    actual: Mapping[str, int], optimal: Mapping[str, int]
) -> dict[str, float | None]:
    """Per-event executions relative to the planner's optimal counts.

    Events the optimal plan never runs get None (no meaningful denominator).
    """
    out: dict[str, float | None] = {}
    for event in sorted(set(actual) | set(optimal)):
        best = optimal.get(event, 0)
        if best <= 0:
            out[event] = None
        else:
            out[event] = actual.get(event, 0) / best
    return out


def normalized_reward(value, objective) -> float | None:
    """Reward as a fraction of the planning upper bound; None if the bound
    is not positive."""
    obj = to_fraction(objective)
    if obj <= 0:
        return None
    return float(to_fraction(value) / obj)


def split_ratio(
    weights: Mapping[str, Fraction],
    roles: Mapping[str, str],
    numerator_role: str,
    denominator_role: str,
) -> float | None:
    """Mean negotiated share of one role over another, averaged over the
    agents of each role that hold a share. None when either side is empty
    or the denominator mean is zero."""
    num = [weights[a] for a in weights if roles.get(a) == numerator_role]
    den = [weights[a] for a in weights if roles.get(a) == denominator_role]
    if not num or not den:
        return None
    num_mean = sum(num, Fraction(0)) / len(num)
    den_mean = sum(den, Fraction(0)) / len(den)
    if den_mean == 0:
        return None
    return float(num_mean / den_mean)


def membership_weights(graph: SocialGraph) -> dict[str, Fraction]:
    """Each agent's total share across the groups it belongs to."""
    out: dict[str, Fraction] = {}
    for group in graph.groups():
        for agent, weight in graph.member_weights(group).items():
            out[agent] = out.get(agent, Fraction(0)) + weight
    return out


@dataclass(frozen=True)
class EpisodeSummary:
    steps: int
    agents: dict[str, str]                      # id -> role
    cumulative_raw: dict[str, Fraction]
    cumulative_shared: dict[str, Fraction]
    total_raw: Fraction
    total_shared: Fraction
    fairness_raw: float | None
    fairness_shared: float | None
    executions: dict[str, int]
    structure: str
    degrees: dict
    weights: dict[str, Fraction]
    carpenter_miner_ratio: float | None
    oracle: dict | None

    def to_jsonable(self) -> dict:
        return {
            "steps": self.steps,
            "agents": dict(self.agents),
            "cumulative_raw": {
                a: fraction_to_jsonable(v) for a, v in self.cumulative_raw.items()
            },
            "cumulative_shared": {
                a: fraction_to_jsonable(v) for a, v in self.cumulative_shared.items()
            },
            "total_raw": fraction_to_jsonable(self.total_raw),
            "total_shared": fraction_to_jsonable(self.total_shared),
            "fairness_raw": self.fairness_raw,
            "fairness_shared": self.fairness_shared,
            "executions": dict(sorted(self.executions.items())),
            "structure": self.structure,
            "degrees": self.degrees,
            "weights": {a: fraction_to_jsonable(v) for a, v in sorted(self.weights.items())},
            "carpenter_miner_ratio": self.carpenter_miner_ratio,
            "oracle": self.oracle,
        }


def summarize(
    trace: Trace,
    with_oracle: bool = True,
    oracle_budget: int = 200_000,
) -> EpisodeSummary:
    """Digest one trace into episode-level metrics.

    When the planner bound is requested, completion rates and normalized
    rewards are included; an unproven bound (budget ran out) is reported
    as-is with proven=false.
    """
    from .config import parse_document

    spec, violations = parse_document(trace.header["scenario"])
    if spec is None:
        raise TraceError(
            "header scenario invalid: " + "; ".join(v.message for v in violations)
        )
    roles = {entry["id"]: entry["role"] for entry in trace.header["agents"]}
    agent_ids = list(roles)

    if trace.end is not None:
        raw = {a: to_fraction(v) for a, v in trace.end["cumulative_raw"].items()}
        shared = {a: to_fraction(v) for a, v in trace.end["cumulative_shared"].items()}
        executions = dict(trace.end["executions"])
        steps = trace.end["steps"]
    else:
        raw = {a: Fraction(0) for a in agent_ids}
        shared = {a: Fraction(0) for a in agent_ids}
        executions = {}
        for record in trace.steps:
            for a, v in record["raw"].items():
                raw[a] += to_fraction(v)
            for a, v in record["shared"].items():
                shared[a] += to_fraction(v)
            for event, n in record["info"].get("events", {}).items():
                executions[event] = executions.get(event, 0) + n
        steps = len(trace.steps)

    graph = SocialGraph.from_snapshot(trace.final_graph())
    weights = membership_weights(graph)
    degrees = {
        "agents": degree_stats(graph, AGENT_LAYER).to_jsonable(),
        "groups": degree_stats(graph, GROUP_LAYER).to_jsonable(),
    }

    oracle_block: dict | None = None
    if with_oracle:
        from .oracle import build_instance, solve

        solution = solve(build_instance(spec), node_budget=oracle_budget)
        completion = completion_rate(executions, solution.executions)
        normalized = {
            a: normalized_reward(shared[a], solution.objective) for a in agent_ids
        }
        values = [v for v in normalized.values() if v is not None]
        oracle_block = {
            "objective": fraction_to_jsonable(solution.objective),
            "objective_float": float(solution.objective),
            "proven": solution.proven,
            "optimal_executions": dict(sorted(solution.executions.items())),
            "completion": completion,
            "normalized_shared": normalized,
            "normalized_mean": sum(values) / len(values) if values else None,
        }

    return EpisodeSummary(
        steps=steps,
        agents=roles,
        cumulative_raw=raw,
        cumulative_shared=shared,
        total_raw=sum(raw.values(), Fraction(0)),
        total_shared=sum(shared.values(), Fraction(0)),
        fairness_raw=fairness(raw),
        fairness_shared=fairness(shared),
        executions=executions,
        structure=classify_structure(graph),
        degrees=degrees,
        weights=weights,
        carpenter_miner_ratio=split_ratio(weights, roles, "carpenter", "miner"),
        oracle=oracle_block,
    )
