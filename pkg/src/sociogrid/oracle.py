"""Upper-bound planner: what credits could a fully-informed collective earn?

The episode is abstracted to a single virtual actor with the union of all
skills and the element-wise maximum of all preferences, no spatial or
capacity constraints. The plan is an integer vector x (executions per event)
plus binaries alpha_i (natural kind i gets collected) and beta_e (event e has
run, unlocking whatever depends on it):

    maximize   sum over natural i of    alpha_i * h_i * r_i
             + sum over synthesized i of beta_{producer(i)} * h_i * r_i
    where      r_i = m_i - sum_e x_e * cons[e][i]                (natural)
               r_i = m_i + prod[e(i)][i] * x_{e(i)}
                      - sum_e x_e * cons[e][i]                   (synthesized)
    subject to r_i >= 0 for every i
               alpha_i = 0 unless every event in Q(i) has x >= 1
               beta_e  = 0 unless x_e >= 1
               x_e     = 0 unless every event in D(e) has beta 1

h_i is credits per unit (max preference times objective reward), Q(i) lists
the events producing kind i's collection tools, D(e) the events producing
kind requirements of event e (through the tool chain for natural
requirements). Forced beta terms count even when negative.

`solve` runs depth-first branch and bound over x in dependency order:
producer counts are committed before consumer bounds are computed, so
execution bounds are exact at every node; the value bound is an admissible
per-resource optimum ignoring future consumption. The first leaf (the
execute-everything plan) seeds the incumbent. A node budget caps the search;
exceeding it returns the best plan found flagged unproven. `brute_force`
enumerates the whole x box and checks the constraints directly, as an
independent check for small instances.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction

from .config import ScenarioSpec

NEVER = "__never__"  # pseudo-event marking an unsatisfiable requirement chain


class OracleError(ValueError):
    pass


@dataclass(frozen=True)
class OracleInstance:
    natural: tuple[str, ...]
    synthesized: tuple[str, ...]
    events: tuple[str, ...]
    m: dict[str, int]
    h: dict[str, Fraction]
    consumption: dict[str, dict[str, int]]   # event -> kind -> units per run
    production: dict[str, dict[str, int]]    # event -> kind -> units per run
    Q: dict[str, frozenset[str]]             # natural kind -> unlocking events
    D: dict[str, frozenset[str]]             # event -> prerequisite events

    def producer(self, kind: str) -> str | None:
        for event, outputs in self.production.items():
            if outputs.get(kind, 0) > 0:
                return event
        return None


@dataclass(frozen=True)
class OracleSolution:
    objective: Fraction
    executions: dict[str, int]
    collected: dict[str, bool]   # alpha for natural kinds
    unlocked: dict[str, bool]    # beta per event
    proven: bool
    nodes: int
    bounds: dict[str, int]

    def to_jsonable(self) -> dict:
        from .encoding import fraction_to_jsonable

        return {
            "objective": fraction_to_jsonable(self.objective),
            "objective_float": float(self.objective),
            "executions": dict(sorted(self.executions.items())),
            "collected": dict(sorted(self.collected.items())),
            "unlocked": dict(sorted(self.unlocked.items())),
            "proven": self.proven,
            "nodes": self.nodes,
            "bounds": dict(sorted(self.bounds.items())),
        }


# ---------------------------------------------------------------------------
# instance construction
# ---------------------------------------------------------------------------


def build_instance(spec: ScenarioSpec) -> OracleInstance:
    """Reduce a scenario to one planning instance.

    m sums map placements and initial inventories; h takes the roster-wide
    maximum preference per kind. Raises OracleError if the dependency graph
    (input flows plus prerequisite edges) has a cycle.
    """
    registry = spec.registry
    natural = tuple(r.name for r in registry.natural_resources())
    synthesized = tuple(r.name for r in registry.synthesized_resources())
    # only events with at least one physical site can ever run; sorted so the
    # instance is identical for a document and its canonical-JSON round trip
    events = tuple(sorted(name for name, p in spec.sites.items() if p.count >= 1))

    m: dict[str, int] = {name: 0 for name in registry.resources}
    for name, placement in spec.piles.items():
        m[name] += placement.count
    instances = spec.agent_instances()
    for inst in instances:
        for kind, count in inst.inventory.items():
            m[kind] = m.get(kind, 0) + count

    h: dict[str, Fraction] = {}
    for name, res in registry.resources.items():
        prefs = [inst.preference.get(name, Fraction(1)) for inst in instances]
        h[name] = max(prefs) * res.objective_reward

    consumption = {e: registry.event(e).input_map() for e in events}
    production = {e: registry.event(e).output_map() for e in events}

    producer_of: dict[str, str] = {}
    for event, outputs in production.items():
        for kind in outputs:
            producer_of[kind] = event

    # Q: the events whose outputs unlock collecting a natural kind, chasing
    # requirement chains through natural intermediaries.
    q_cache: dict[str, frozenset[str] | None] = {}

    def q_of(kind: str, trail: tuple[str, ...] = ()) -> frozenset[str] | None:
        """None encodes 'never collectable' (cyclic or unproducible chain)."""
        if kind in q_cache:
            return q_cache[kind]
        if kind in trail:
            return None
        needed: set[str] = set()
        for req in sorted(registry.resource(kind).requirement):
            if registry.resource(req).synthesized:
                producer = producer_of.get(req)
                if producer is None:
                    q_cache[kind] = None
                    return None
                needed.add(producer)
            else:
                sub = q_of(req, trail + (kind,))
                if sub is None:
                    q_cache[kind] = None
                    return None
                needed |= sub
        result = frozenset(needed)
        q_cache[kind] = result
        return result

    available = set(events)

    Q: dict[str, frozenset[str]] = {}
    for name in natural:
        chain = q_of(name)
        if chain is None or not chain <= available:
            # cyclic chain, or an unlocking event has no site in this world
            Q[name] = frozenset({NEVER})
        else:
            Q[name] = chain

    D: dict[str, frozenset[str]] = {}
    for event in events:
        needed: set[str] = set()
        impossible = False
        for req in sorted(registry.event(event).requirement):
            if registry.resource(req).synthesized:
                producer = producer_of.get(req)
                if producer is None or producer not in available:
                    impossible = True
                    break
                needed.add(producer)
            else:
                chain = q_of(req)
                if chain is None or not chain <= available:
                    impossible = True
                    break
                needed |= chain
        D[event] = frozenset({NEVER}) if impossible else frozenset(needed)

    instance = OracleInstance(
        natural=natural,
        synthesized=synthesized,
        events=events,
        m=m,
        h=h,
        consumption=consumption,
        production=production,
        Q=Q,
        D=D,
    )
    topo_order(instance)  # raises on cycles
    return instance


def topo_order(instance: OracleInstance) -> list[str]:
    """Events ordered so producers and prerequisites come before dependents."""
    succ: dict[str, set[str]] = {e: set() for e in instance.events}
    indeg = {e: 0 for e in instance.events}

    def add_edge(a: str, b: str) -> None:
        if a in succ and b in indeg and a != b and b not in succ[a]:
            succ[a].add(b)
            indeg[b] += 1

    producer_of: dict[str, str] = {}
    for event in instance.events:
        for kind in instance.production[event]:
            producer_of[kind] = event
    for event in instance.events:
        for kind in instance.consumption[event]:
            if kind in producer_of:
                add_edge(producer_of[kind], event)
        for dep in instance.D[event]:
            if dep != NEVER:
                add_edge(dep, event)

    ready = sorted(e for e, d in indeg.items() if d == 0)
    order: list[str] = []
    while ready:
        node = ready.pop(0)
        order.append(node)
        for nxt in sorted(succ[node]):
            indeg[nxt] -= 1
            if indeg[nxt] == 0:
                ready.append(nxt)
        ready.sort()
    if len(order) != len(instance.events):
        cyclic = sorted(e for e, d in indeg.items() if d > 0)
        raise OracleError(f"cyclic event dependencies: {cyclic}")
    return order


def execution_bounds(instance: OracleInstance) -> dict[str, int]:
    """Optimistic per-event execution caps from total input availability,
    propagated through the synthesis chain in dependency order."""
    order = topo_order(instance)
    supply: dict[str, int] = dict(instance.m)
    bounds: dict[str, int] = {}
    for event in order:
        if NEVER in instance.D[event]:
            bounds[event] = 0
        else:
            cap: int | None = None
            for kind, need in instance.consumption[event].items():
                avail = supply.get(kind, 0) // need
                cap = avail if cap is None else min(cap, avail)
            bounds[event] = 0 if cap is None else cap
        for kind, out in instance.production[event].items():
            supply[kind] = supply.get(kind, 0) + out * bounds[event]
    return bounds


# ---------------------------------------------------------------------------
# shared evaluation pieces
# ---------------------------------------------------------------------------


def _residuals(instance: OracleInstance, x: dict[str, int]) -> dict[str, Fraction | int]:
    r: dict[str, int] = dict(instance.m)
    for event, count in x.items():
        if not count:
            continue
        for kind, need in instance.consumption[event].items():
            r[kind] = r.get(kind, 0) - need * count
        for kind, out in instance.production[event].items():
            r[kind] = r.get(kind, 0) + out * count
    return r


def _forced_beta(instance: OracleInstance, x: dict[str, int]) -> set[str] | None:
    """Events whose beta must be 1 because an executed event depends on them;
    None if some dependency is impossible to satisfy."""
    forced: set[str] = set()
    for event, count in x.items():
        if count < 1:
            continue
        for dep in instance.D[event]:
            if dep == NEVER or x.get(dep, 0) < 1:
                return None
            forced.add(dep)
    return forced


def _evaluate(instance: OracleInstance, x: dict[str, int]):
    """Objective for a complete x with optimal alpha/beta, or None when x is
    infeasible. Returns (value, alpha, beta)."""
    r = _residuals(instance, x)
    if any(v < 0 for v in r.values()):
        return None
    forced = _forced_beta(instance, x)
    if forced is None:
        return None

    value = Fraction(0)
    alpha: dict[str, bool] = {}
    for kind in instance.natural:
        term = instance.h[kind] * r.get(kind, 0)
        allowed = NEVER not in instance.Q[kind] and all(
            x.get(j, 0) >= 1 for j in instance.Q[kind]
        )
        take = allowed and term > 0
        alpha[kind] = take
        if take:
            value += term

    beta: dict[str, bool] = {}
    for event in instance.events:
        executed = x.get(event, 0) >= 1
        term = Fraction(0)
        for kind, _ in instance.production[event].items():
            term += instance.h[kind] * r.get(kind, 0)
        if event in forced:
            beta[event] = True
            value += term
        elif executed and term > 0:
            beta[event] = True
            value += term
        else:
            beta[event] = False
    return value, alpha, beta


# ---------------------------------------------------------------------------
# brute force
# ---------------------------------------------------------------------------

BRUTE_FORCE_LIMIT = 10_000_000


def brute_force(instance: OracleInstance, bound_cap: int | None = None) -> OracleSolution:
    """Exhaustive search over the whole execution box. Verification-grade:
    no pruning, direct constraint evaluation per point."""
    bounds = execution_bounds(instance)
    if bound_cap is not None:
        bounds = {e: min(b, bound_cap) for e, b in bounds.items()}
    points = 1
    for b in bounds.values():
        points *= b + 1
    if points > BRUTE_FORCE_LIMIT:
        raise OracleError(f"{points} candidate plans exceed the brute-force limit")

    events = list(instance.events)
    best_value = Fraction(0)
    best: tuple[dict[str, int], dict[str, bool], dict[str, bool]] | None = None
    nodes = 0
    for combo in itertools.product(*[range(bounds[e] + 1) for e in events]):
        nodes += 1
        x = dict(zip(events, combo))
        outcome = _evaluate(instance, x)
        if outcome is None:
            continue
        value, alpha, beta = outcome
        if best is None or value > best_value:
            best_value = value
            best = (x, alpha, beta)
    if best is None:
        # x == 0 is always feasible, so this cannot happen; defensive only
        raise OracleError("no feasible plan found")
    x, alpha, beta = best
    return OracleSolution(
        objective=best_value,
        executions=x,
        collected=alpha,
        unlocked=beta,
        proven=True,
        nodes=nodes,
        bounds=bounds,
    )


# ---------------------------------------------------------------------------
# branch and bound
# ---------------------------------------------------------------------------


@dataclass
class _Search:
    instance: OracleInstance
    order: list[str]
    budget: int
    nodes: int = 0
    best_value: Fraction = field(default_factory=lambda: Fraction(-1))
    best_x: dict[str, int] | None = None
    exhausted: bool = False


def solve(instance: OracleInstance, node_budget: int = 200_000) -> OracleSolution:
    """Branch-and-bound optimum; proven unless the node budget runs out."""
    order = topo_order(instance)
    bounds = execution_bounds(instance)
    search = _Search(instance=instance, order=order, budget=node_budget)

    x: dict[str, int] = {}
    supply: dict[str, int] = dict(instance.m)
    _descend(search, 0, x, supply)

    if search.best_x is None:
        search.best_x = {e: 0 for e in instance.events}
        search.best_value = _evaluate(instance, search.best_x)[0]  # type: ignore[index]
    outcome = _evaluate(instance, search.best_x)
    assert outcome is not None
    value, alpha, beta = outcome
    return OracleSolution(
        objective=value,
        executions={e: search.best_x.get(e, 0) for e in instance.events},
        collected=alpha,
        unlocked=beta,
        proven=not search.exhausted,
        nodes=search.nodes,
        bounds=bounds,
    )


def _max_executions(instance: OracleInstance, event: str, supply: dict[str, int]) -> int:
    cap: int | None = None
    for kind, need in instance.consumption[event].items():
        cap_k = supply.get(kind, 0) // need
        cap = cap_k if cap is None else min(cap, cap_k)
    return 0 if cap is None else cap


def _value_bound(
    instance: OracleInstance,
    depth: int,
    search: _Search,
    x: dict[str, int],
    supply: dict[str, int],
) -> Fraction:
    """Admissible optimistic value: every resource counted at its best
    possible leftover, ignoring future consumption."""
    remaining = search.order[depth:]
    opt_supply = dict(supply)
    opt_ub: dict[str, int] = {}
    for event in remaining:
        blocked = False
        for dep in instance.D[event]:
            if dep == NEVER:
                blocked = True
            elif dep in opt_ub:
                # unassigned prerequisite: possible only if it could run
                if opt_ub[dep] == 0:
                    blocked = True
            elif x.get(dep, 0) < 1:
                # committed prerequisite that did not run
                blocked = True
        ub = 0 if blocked else _max_executions(instance, event, opt_supply)
        opt_ub[event] = ub
        for kind, out in instance.production[event].items():
            opt_supply[kind] = opt_supply.get(kind, 0) + out * ub

    bound = Fraction(0)
    executed_or_possible = {
        e for e in instance.events if x.get(e, 0) >= 1 or opt_ub.get(e, 0) >= 1
    }
    for kind in instance.natural:
        h = instance.h[kind]
        if h <= 0:
            continue
        q = instance.Q[kind]
        if NEVER in q or not q <= executed_or_possible:
            continue
        amount = opt_supply.get(kind, 0)
        if amount > 0:
            bound += h * amount
    for kind in instance.synthesized:
        h = instance.h[kind]
        if h <= 0:
            continue
        producer = instance.producer(kind)
        if producer is None or producer not in executed_or_possible:
            continue
        amount = opt_supply.get(kind, 0)
        if amount > 0:
            bound += h * amount
    return bound


def _descend(search: _Search, depth: int, x: dict[str, int], supply: dict[str, int]) -> None:
    instance = search.instance
    if depth == len(search.order):
        outcome = _evaluate(instance, x)
        if outcome is not None and outcome[0] > search.best_value:
            search.best_value = outcome[0]
            search.best_x = dict(x)
        return
    if search.exhausted:
        return
    bound = _value_bound(instance, depth, search, x, supply)
    if bound <= search.best_value:
        return

    event = search.order[depth]
    blocked = any(
        dep == NEVER or x.get(dep, 0) < 1 for dep in instance.D[event]
    )
    max_x = 0 if blocked else _max_executions(instance, event, supply)

    for count in range(max_x, -1, -1):
        search.nodes += 1
        if search.nodes > search.budget:
            search.exhausted = True
            return
        x[event] = count
        child_supply = dict(supply)
        for kind, need in instance.consumption[event].items():
            child_supply[kind] -= need * count
        for kind, out in instance.production[event].items():
            child_supply[kind] = child_supply.get(kind, 0) + out * count
        _descend(search, depth + 1, x, child_supply)
        if search.exhausted:
            return
    del x[event]
