"""Blocking client SDK for the sociogrid episode server.

Speaks the server's newline-delimited JSON wire protocol and nothing else:
no simulator imports, no client-side simulation. One `Session` wraps one
connection and one agent seat; `reset()` blocks until the opening
observation of the next episode, `step(action)` sends one action and blocks
until the following observation arrives. Observations, rewards, and episode
results are handed back exactly as received from the wire.

The protocol, for one agent seat:

    client -> {"type":"join","protocol":1,"agent_id":null|"...","spectator":false}
    server -> {"type":"hello","protocol":1,"agent_id":"...","episodes":N}
    then per step:
    server -> {"type":"observe","episode":e,"t":t,"agent_id":"...",
               "observation":{...},"reward":null|{"raw":..,"shared":..},
               "done":false}
    client -> {"type":"act","episode":e,"t":t,"action":{...}}
    after the final observation of an episode (done=true, no act expected):
    server -> {"type":"end","episode":e,...,"trace_hash":"..."}
    and after the last episode:
    server -> {"type":"bye"}

Actions are JSON objects `{"verb": ..., "target"?, "value"?, "text"?}`. Each
observation carries the list of currently legal action templates
("move:N", "pick:wood", "propose", ...); the session refuses to send an
action whose template is not on that list, so illegal actions are caught
before they reach the wire.
"""

from __future__ import annotations

import json
import socket
from dataclasses import dataclass, field
from fractions import Fraction
from typing import NamedTuple

PROTOCOL_VERSION = 1

# verbs whose template string carries the target, mirroring the wire's
# template naming ("move:N" legalizes {"verb":"move","target":"N"})
_TARGETED = frozenset(
    {
        "move",
        "pick",
        "dump",
        "connect",
        "disconnect",
        "select_group",
        "request",
        "message",
    }
)
_BARE = frozenset({"noop", "synthesize", "accept", "decline", "propose"})


class ClientError(Exception):
    """Base for everything this package raises on purpose."""


class HandshakeError(ClientError):
    """Connection or join handshake failed."""


class VersionMismatchError(HandshakeError):
    """Client and server disagree on the protocol version."""


class SeatRefusedError(HandshakeError):
    """The requested seat is taken or the roster is already full."""


class IllegalActionError(ClientError):
    """The action's template is not on the last observation's legal list."""


class SessionOver(ClientError):
    """The server said goodbye; no further episodes will be served."""


class WireError(ClientError):
    """The stream closed unexpectedly or carried an undecodable message."""


def _encode(message: dict) -> bytes:
    return (
        json.dumps(message, sort_keys=True, separators=(",", ":")) + "\n"
    ).encode("ascii")


def _fraction_jsonable(value: Fraction | int | float | str) -> int | str:
    """Encode a number the way the wire does: int when integral, else the
    reduced "p/q" string."""
    frac = Fraction(value)
    if frac.denominator == 1:
        return int(frac)
    return f"{frac.numerator}/{frac.denominator}"


def template_of(action: dict) -> str:
    """The template string an action falls under."""
    verb = action.get("verb")
    if not isinstance(verb, str):
        raise IllegalActionError("action must carry a string verb")
    target = action.get("target")
    if verb in _TARGETED and isinstance(target, str):
        return f"{verb}:{target}"
    return verb


def default_action(
    template: str,
    *,
    share: Fraction | int | float | str = Fraction(1, 2),
    text: str = "",
) -> dict:
    """Expand a legal-action template into a wire action object, using the
    documented defaults: empty message text and a 1/2 propose share unless
    overridden."""
    verb, _, target = template.partition(":")
    if verb in _TARGETED:
        if not target:
            raise ValueError(f"template {template!r} needs a target")
        action = {"verb": verb, "target": target}
        if verb == "message":
            action["text"] = text
        return action
    if target:
        raise ValueError(f"template {template!r} does not take a target")
    if verb == "propose":
        return {"verb": "propose", "value": _fraction_jsonable(share)}
    if verb in _BARE:
        return {"verb": verb}
    raise ValueError(f"unknown template {template!r}")


@dataclass(frozen=True)
class ClientObservation:
    """One observation exactly as served: `payload` is the observation
    object from the wire, untouched. Typed accessors read straight from the
    payload and raise KeyError when the server did not send the field —
    nothing is fabricated client-side."""

    episode: int
    t: int
    agent_id: str
    done: bool
    payload: dict = field(repr=False)

    def __getitem__(self, key: str):
        return self.payload[key]

    def __contains__(self, key: str) -> bool:
        return key in self.payload

    @property
    def legal(self) -> list[str]:
        return list(self.payload["legal"])

    @property
    def inventory(self) -> dict:
        return self.payload["inventory"]

    @property
    def window(self) -> list:
        return self.payload["window"]

    @property
    def social(self) -> dict:
        return self.payload["social"]

    @property
    def inbox(self) -> list:
        return self.payload["inbox"]

    @property
    def position(self) -> list:
        return self.payload["position"]

    @property
    def phase(self) -> dict:
        return self.payload["phase"]


class StepResult(NamedTuple):
    observation: ClientObservation
    reward: dict | None
    done: bool
    info: dict


class Session:
    """One agent seat over one connection. Synchronous: exactly one
    outstanding step, matching the server's lockstep barrier."""

    def __init__(self, sock: socket.socket, hello: dict):
        self._sock = sock
        self._buffer = b""
        self._closed = False
        self._current: dict | None = None
        self._results: list[dict] = []
        self.errors: list[dict] = []
        self.agent_id: str | None = hello["agent_id"]
        self.episodes: int = hello["episodes"]

    # -- wire plumbing -----------------------------------------------------

    def _send(self, message: dict) -> None:
        try:
            self._sock.sendall(_encode(message))
        except OSError as exc:
            raise WireError(f"send failed: {exc}") from exc

    def _read(self) -> dict:
        while b"\n" not in self._buffer:
            try:
                chunk = self._sock.recv(65536)
            except OSError as exc:
                raise WireError(f"receive failed: {exc}") from exc
            if not chunk:
                raise WireError("server closed the stream")
            self._buffer += chunk
        line, self._buffer = self._buffer.split(b"\n", 1)
        try:
            message = json.loads(line.decode("ascii"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise WireError(f"undecodable server message: {exc}") from exc
        if not isinstance(message, dict) or not isinstance(
            message.get("type"), str
        ):
            raise WireError("server message must be an object with a type")
        return message

    # -- episode loop ------------------------------------------------------

    def reset(self) -> ClientObservation:
        """Block until the opening observation of the next episode. Raises
        SessionOver once the server has said goodbye."""
        if self._closed:
            raise SessionOver("session already over")
        if self._current is not None and not self._current["done"]:
            raise ClientError("episode in progress; step it to done first")
        while True:
            message = self._read()
            kind = message["type"]
            if kind == "observe":
                self._current = message
                return self._wrap(message)
            if kind == "end":
                self._results.append(message)
            elif kind == "error":
                self.errors.append(message)
            elif kind == "bye":
                self._finish()
                raise SessionOver("no more episodes")
            else:
                raise WireError(f"unexpected message type {kind!r}")

    def step(self, action: str | dict) -> StepResult:
        """Send one action for the pending observation and block until the
        next observation arrives. `action` is either a template string
        (expanded with `default_action`) or a wire action object; either
        way its template must be on the pending observation's legal list."""
        if self._closed:
            raise SessionOver("session already over")
        if self._current is None:
            raise ClientError("call reset() before step()")
        if self._current["done"]:
            raise ClientError("episode finished; call reset()")

        legal = self._current["observation"].get("legal") or []
        if isinstance(action, str):
            if action not in legal:
                raise IllegalActionError(
                    f"template {action!r} not among legal templates"
                )
            action_obj = default_action(action)
        elif isinstance(action, dict):
            template = template_of(action)
            if template not in legal:
                raise IllegalActionError(
                    f"template {template!r} not among legal templates"
                )
            action_obj = action
        else:
            raise IllegalActionError("action must be a template or an object")

        self._send(
            {
                "type": "act",
                "episode": self._current["episode"],
                "t": self._current["t"],
                "action": action_obj,
            }
        )
        while True:
            message = self._read()
            kind = message["type"]
            if kind == "observe":
                self._current = message
                return StepResult(
                    observation=self._wrap(message),
                    reward=message["reward"],
                    done=message["done"],
                    info={"episode": message["episode"], "t": message["t"]},
                )
            if kind == "error":
                self.errors.append(message)
            elif kind == "end":
                self._results.append(message)
            elif kind == "bye":
                self._finish()
                raise SessionOver("server ended the session mid-step")
            else:
                raise WireError(f"unexpected message type {kind!r}")

    def results(self) -> list[dict]:
        """Episode end records received so far, exactly as served."""
        return list(self._results)

    def drain(self) -> None:
        """Consume trailing end/bye records after the last episode, so
        `results()` is complete. Returns once the server says goodbye."""
        try:
            while True:
                self.reset()
        except SessionOver:
            pass

    # -- lifecycle ---------------------------------------------------------

    def _wrap(self, message: dict) -> ClientObservation:
        return ClientObservation(
            episode=message["episode"],
            t=message["t"],
            agent_id=message["agent_id"],
            done=message["done"],
            payload=message["observation"],
        )

    def _finish(self) -> None:
        self._closed = True
        try:
            self._sock.close()
        except OSError:
            pass

    def close(self) -> None:
        self._finish()

    def __enter__(self) -> "Session":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def _parse_endpoint(endpoint: str | tuple[str, int]) -> tuple[str, int]:
    if isinstance(endpoint, tuple):
        host, port = endpoint
        return host, int(port)
    host, sep, port = endpoint.rpartition(":")
    if not sep or not port.isdigit():
        raise ValueError(f"endpoint must be 'host:port', got {endpoint!r}")
    return host, int(port)


def connect(
    endpoint: str | tuple[str, int],
    agent_id: str | None = None,
    *,
    timeout: float = 30.0,
) -> Session:
    """Dial the server and claim a seat. `agent_id` None takes the first
    free seat; naming a taken seat raises SeatRefusedError. The timeout
    bounds dialing and the handshake; established sessions block without
    limit, matching the server's lockstep barrier."""
    host, port = _parse_endpoint(endpoint)
    try:
        sock = socket.create_connection((host, port), timeout=timeout)
    except OSError as exc:
        raise HandshakeError(f"cannot connect to {host}:{port}: {exc}") from exc
    try:
        sock.settimeout(timeout)
        sock.sendall(
            _encode(
                {
                    "type": "join",
                    "protocol": PROTOCOL_VERSION,
                    "agent_id": agent_id,
                    "spectator": False,
                }
            )
        )
        session = Session(sock, {"agent_id": None, "episodes": 0})
        reply = session._read()
    except ClientError:
        sock.close()
        raise
    except OSError as exc:
        sock.close()
        raise HandshakeError(f"handshake failed: {exc}") from exc

    kind = reply["type"]
    if kind == "error":
        sock.close()
        reason = reply.get("reason")
        if reason == "protocol_version":
            raise VersionMismatchError(f"server rejected protocol: {reply}")
        if reason in ("seat_unavailable", "roster_full"):
            raise SeatRefusedError(f"seat refused: {reply}")
        raise HandshakeError(f"server refused the join: {reply}")
    if kind != "hello":
        sock.close()
        raise HandshakeError(f"expected hello, got {kind!r}")
    if reply.get("protocol") != PROTOCOL_VERSION:
        sock.close()
        raise VersionMismatchError(
            f"server speaks protocol {reply.get('protocol')!r}, "
            f"client speaks {PROTOCOL_VERSION}"
        )
    sock.settimeout(None)
    session.agent_id = reply["agent_id"]
    session.episodes = reply["episodes"]
    return session
