"""Reference policies. A policy consumes the JSON form of an observation —
exactly the payload a remote client receives — and returns one Action, so the
same policy code drives identical action streams in-process and over a
socket.

Per-agent random streams are derived from (episode seed, agent id) with a
hash, making each agent's draws independent of roster order and of which
transport carries its observations.
"""

from __future__ import annotations

import hashlib
import random
from fractions import Fraction

from .actions import Action


def derive_agent_seed(seed: int, agent_id: str) -> int:
    digest = hashlib.sha256(f"{seed}:{agent_id}".encode("ascii")).hexdigest()
    return int(digest[:16], 16)


def template_to_action(template: str, rng: random.Random | None = None) -> Action:
    """Instantiate a legal-action template. Templates carrying no payload in
    their name get a deterministic default: empty message text, and a propose
    share drawn from rng (or 1/2 without one)."""
    verb, _, target = template.partition(":")
    if verb == "move":
        return Action.move(target)
    if verb == "pick":
        return Action.pick(target)
    if verb == "dump":
        return Action.dump(target)
    if verb == "connect":
        return Action.connect(target)
    if verb == "disconnect":
        return Action.disconnect(target)
    if verb == "select_group":
        return Action.select_group(target)
    if verb == "request":
        return Action.request(target)
    if verb == "message":
        return Action.message(target, "")
    if verb == "propose":
        share = Fraction(rng.randrange(1, 100), 100) if rng else Fraction(1, 2)
        return Action.propose(share)
    if verb == "accept":
        return Action.accept()
    if verb == "decline":
        return Action.decline()
    if verb == "synthesize":
        return Action.synthesize()
    if verb == "noop":
        return Action.noop()
    raise ValueError(f"unknown template {template!r}")


class Policy:
    """Base: stateful callable from observation JSON to Action."""

    def act(self, obs: dict) -> Action:  # pragma: no cover - interface
        raise NotImplementedError


class NoopPolicy(Policy):
    def act(self, obs: dict) -> Action:
        return Action.noop()


class RandomPolicy(Policy):
    """Uniform over the legal templates in the observation."""

    def __init__(self, agent_id: str, seed: int):
        self.agent_id = agent_id
        self.rng = random.Random(derive_agent_seed(seed, agent_id))

    def act(self, obs: dict) -> Action:
        legal = obs.get("legal") or ["noop"]
        template = self.rng.choice(legal)
        return template_to_action(template, self.rng)


class GreedyPolicy(Policy):
    """Collect-and-craft heuristic: pick whatever is underfoot, synthesize on
    sites, otherwise walk toward the nearest visible pile; wander when the
    window is empty. No social behaviour."""

    def __init__(self, agent_id: str, seed: int):
        self.agent_id = agent_id
        self.rng = random.Random(derive_agent_seed(seed, agent_id))

    def act(self, obs: dict) -> Action:
        legal = set(obs.get("legal") or ())
        here = tuple(obs["position"])
        cells = obs.get("window") or []

        for cell in cells:
            if tuple(cell["position"]) != here:
                continue
            for kind in sorted(cell.get("piles", {})):
                if f"pick:{kind}" in legal:
                    return Action.pick(kind)
            if cell.get("site") and "synthesize" in legal:
                return Action.synthesize()
            break

        targets = [
            tuple(cell["position"])
            for cell in cells
            if cell.get("piles") and not cell.get("blocked")
        ]
        if targets:
            goal = min(
                targets,
                key=lambda p: (abs(p[0] - here[0]) + abs(p[1] - here[1]), p),
            )
            moves: list[str] = []
            if goal[0] < here[0]:
                moves.append("N")
            elif goal[0] > here[0]:
                moves.append("S")
            if goal[1] < here[1]:
                moves.append("W")
            elif goal[1] > here[1]:
                moves.append("E")
            moves = [m for m in moves if f"move:{m}" in legal]
            if moves:
                return Action.move(self.rng.choice(moves))

        options = [m for m in ("N", "S", "E", "W") if f"move:{m}" in legal]
        if options:
            return Action.move(self.rng.choice(options))
        return Action.noop()


POLICY_KINDS = ("random", "greedy", "noop")


def make_policy(kind: str, agent_id: str, seed: int) -> Policy:
    if kind == "random":
        return RandomPolicy(agent_id, seed)
    if kind == "greedy":
        return GreedyPolicy(agent_id, seed)
    if kind == "noop":
        return NoopPolicy()
    raise ValueError(f"unknown policy kind {kind!r} (choose from {POLICY_KINDS})")


def make_policies(kind: str, agent_ids: list[str], seed: int) -> dict[str, Policy]:
    return {aid: make_policy(kind, aid, seed) for aid in agent_ids}
