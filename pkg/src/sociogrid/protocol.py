"""Wire protocol: newline-delimited canonical JSON over a byte stream.

Every message is one JSON object on one line, encoded exactly like trace
records (sorted keys, compact, ASCII), so the bytes a client sees are
reproducible. The conversation for one agent seat:

    client -> {"type":"join","protocol":1,"agent_id":null|"...","spectator":false}
    server -> {"type":"hello","protocol":1,"agent_id":"...","episodes":N}
    then per episode, per step:
    server -> {"type":"observe","episode":e,"t":t,"agent_id":"...",
               "observation":{...},"reward":null|{"raw":..,"shared":..},
               "done":false}
    client -> {"type":"act","episode":e,"t":t,"action":{...}}
    until the observe with done=true (no act expected), then
    server -> {"type":"end","episode":e,"steps":n,"cumulative_raw":{..},
               "cumulative_shared":{..},"executions":{..},"trace_hash":"..."}
    after the last episode:
    server -> {"type":"bye"}

Spectator seats receive every observe and end record and never send acts.
Protocol problems are answered with {"type":"error","reason":...}; the
server substitutes a no-op for the step rather than dropping the episode.
"""

from __future__ import annotations

from .encoding import canonical_json

PROTOCOL_VERSION = 1
MAX_LINE_BYTES = 1_048_576


class ProtocolError(ValueError):
    pass


def encode(message: dict) -> bytes:
    return (canonical_json(message) + "\n").encode("ascii")


def decode_line(line: str) -> dict:
    import json

    if len(line) > MAX_LINE_BYTES:
        raise ProtocolError("line exceeds maximum length")
    try:
        message = json.loads(line)
    except json.JSONDecodeError as exc:
        raise ProtocolError(f"not valid JSON: {exc.msg}")
    if not isinstance(message, dict) or not isinstance(message.get("type"), str):
        raise ProtocolError("message must be an object with a string type")
    return message


# -- client -> server ------------------------------------------------------


def join(agent_id: str | None = None, spectator: bool = False) -> dict:
    return {
        "type": "join",
        "protocol": PROTOCOL_VERSION,
        "agent_id": agent_id,
        "spectator": spectator,
    }


def act(episode: int, t: int, action_jsonable: dict) -> dict:
    return {"type": "act", "episode": episode, "t": t, "action": action_jsonable}


# -- server -> client ------------------------------------------------------


def hello(agent_id: str | None, episodes: int) -> dict:
    return {
        "type": "hello",
        "protocol": PROTOCOL_VERSION,
        "agent_id": agent_id,
        "episodes": episodes,
    }


def observe(
    episode: int,
    t: int,
    agent_id: str,
    observation: dict,
    reward: dict | None,
    done: bool,
) -> dict:
    return {
        "type": "observe",
        "episode": episode,
        "t": t,
        "agent_id": agent_id,
        "observation": observation,
        "reward": reward,
        "done": done,
    }


def end(episode: int, result_jsonable: dict) -> dict:
    return {"type": "end", "episode": episode, **result_jsonable}


def error(reason: str, detail: str | None = None) -> dict:
    message: dict = {"type": "error", "reason": reason}
    if detail is not None:
        message["detail"] = detail
    return message


def bye() -> dict:
    return {"type": "bye"}
