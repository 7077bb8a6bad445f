"""Action vocabulary shared by the engine, the harness, and the wire format.

An action is a verb plus at most one target, one numeric value, and one text
payload. The same canonical JSON encoding is used in traces and on the wire,
so an action decoded from a client is indistinguishable from one built
in-process.

Template strings name points of the action space ("move:N", "pick:wood",
"propose"); `to_template` maps an action to the template that legalizes it.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .encoding import fraction_to_jsonable, to_fraction

PHYSICAL_VERBS = frozenset({"move", "pick", "dump", "synthesize"})
SOCIAL_VERBS = frozenset(
    {"connect", "disconnect", "select_group", "request", "propose", "accept", "decline"}
)
NEUTRAL_VERBS = frozenset({"noop", "message"})
ALL_VERBS = PHYSICAL_VERBS | SOCIAL_VERBS | NEUTRAL_VERBS

# verbs whose template string carries the target
_TARGETED = frozenset({"move", "pick", "dump", "connect", "disconnect", "select_group", "request", "message"})

MAX_MESSAGE_CHARS = 4096


@dataclass(frozen=True)
class Action:
    verb: str
    target: str | None = None
    value: Fraction | None = None
    text: str | None = None

    # -- constructors -----------------------------------------------------

    @staticmethod
    def noop() -> "Action":
        return Action("noop")

    @staticmethod
    def move(direction: str) -> "Action":
        return Action("move", target=direction)

    @staticmethod
    def pick(kind: str) -> "Action":
        return Action("pick", target=kind)

    @staticmethod
    def dump(kind: str) -> "Action":
        return Action("dump", target=kind)

    @staticmethod
    def synthesize() -> "Action":
        return Action("synthesize")

    @staticmethod
    def connect(node_id: str) -> "Action":
        return Action("connect", target=node_id)

    @staticmethod
    def disconnect(node_id: str) -> "Action":
        return Action("disconnect", target=node_id)

    @staticmethod
    def select_group(group_id: str) -> "Action":
        return Action("select_group", target=group_id)

    @staticmethod
    def request(agent_id: str) -> "Action":
        return Action("request", target=agent_id)

    @staticmethod
    def propose(own_share: Fraction | float | str) -> "Action":
        return Action("propose", value=to_fraction(own_share))

    @staticmethod
    def accept() -> "Action":
        return Action("accept")

    @staticmethod
    def decline() -> "Action":
        return Action("decline")

    @staticmethod
    def message(to_agent: str, text: str) -> "Action":
        return Action("message", target=to_agent, text=text)

    # -- encoding ---------------------------------------------------------

    def to_template(self) -> str:
        if self.verb in _TARGETED and self.target is not None:
            return f"{self.verb}:{self.target}"
        return self.verb

    def to_jsonable(self) -> dict:
        out: dict = {"verb": self.verb}
        if self.target is not None:
            out["target"] = self.target
        if self.value is not None:
            out["value"] = fraction_to_jsonable(self.value)
        if self.text is not None:
            out["text"] = self.text
        return out

    @staticmethod
    def from_jsonable(raw: object) -> "Action":
        """Decode; raises ValueError on anything malformed."""
        if not isinstance(raw, dict):
            raise ValueError("action must be an object")
        verb = raw.get("verb")
        if verb not in ALL_VERBS:
            raise ValueError(f"unknown verb {verb!r}")
        target = raw.get("target")
        if target is not None and not isinstance(target, str):
            raise ValueError("target must be a string")
        value = raw.get("value")
        parsed_value = None
        if value is not None:
            parsed_value = to_fraction(value)
        text = raw.get("text")
        if text is not None:
            if not isinstance(text, str):
                raise ValueError("text must be a string")
            if len(text) > MAX_MESSAGE_CHARS:
                raise ValueError(f"text exceeds {MAX_MESSAGE_CHARS} characters")
        return Action(verb=verb, target=target, value=parsed_value, text=text)


NOOP = Action.noop()
