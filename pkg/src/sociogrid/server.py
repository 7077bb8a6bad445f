"""Lockstep TCP episode server.

One server process owns one engine at a time and runs a fixed number of
episodes over it (seeds base, base+1, ...). Remote clients claim agent seats;
each simulation step is a barrier: every seated agent gets its observation,
the server waits for one action per live seat (bounded by the step timeout,
0 meaning wait forever), then advances the engine. Late, malformed, or
missing submissions degrade to no-ops with the reason recorded in the trace
info channel — a slow or broken client never corrupts the simulation, it
only wastes its own turn.

The engine, not the transport, is the source of truth: traces are recorded
by the embedded engine recorder exactly as in-process runs record them, so
for the same seed and the same action stream the trace bytes are identical
whichever transport carried the actions.
"""

from __future__ import annotations

import queue
import socket
import threading
from pathlib import Path

from . import protocol
from .actions import Action
from .config import ScenarioSpec
from .encoding import fraction_to_jsonable
from .engine import Engine
from .trace import TraceRecorder


class _Seat:
    """One connected client: socket, reader thread, inbox of parsed messages."""

    def __init__(self, conn: socket.socket, addr):
        self.conn = conn
        self.addr = addr
        self.agent_id: str | None = None
        self.spectator = False
        self.alive = True
        self.inbox: "queue.Queue[dict]" = queue.Queue()
        self.errors = 0
        self._send_lock = threading.Lock()
        self._reader = threading.Thread(target=self._read_loop, daemon=True)

    def start_reader(self) -> None:
        self._reader.start()

    def _read_loop(self) -> None:
        buffer = b""
        try:
            while True:
                chunk = self.conn.recv(65536)
                if not chunk:
                    break
                buffer += chunk
                while b"\n" in buffer:
                    line, buffer = buffer.split(b"\n", 1)
                    try:
                        message = protocol.decode_line(line.decode("utf-8"))
                    except (protocol.ProtocolError, UnicodeDecodeError) as exc:
                        self.errors += 1
                        self.send(protocol.error("bad_message", str(exc)))
                        continue
                    self.inbox.put(message)
        except OSError:
            pass
        finally:
            self.alive = False
            self.inbox.put({"type": "_disconnect"})

    def send(self, message: dict) -> None:
        if not self.alive:
            return
        try:
            with self._send_lock:
                self.conn.sendall(protocol.encode(message))
        except OSError:
            self.alive = False

    def close(self) -> None:
        self.alive = False
        try:
            self.conn.shutdown(socket.SHUT_RDWR)
        except OSError:
            pass
        try:
            self.conn.close()
        except OSError:
            pass


class SimulationServer:
    """Seats remote clients on a scenario roster and runs episodes in
    lockstep. start() binds and begins seating; run() blocks until every
    agent seat is claimed, plays the episodes, and returns per-episode
    results; close() tears everything down."""

    def __init__(
        self,
        spec: ScenarioSpec,
        seed: int,
        episodes: int = 1,
        host: str = "127.0.0.1",
        port: int = 0,
        step_timeout: float = 30.0,
        trace_dir: str | Path | None = None,
    ):
        if episodes < 1:
            raise ValueError("episodes must be >= 1")
        if step_timeout < 0:
            raise ValueError("step timeout must be >= 0 (0 waits forever)")
        self.spec = spec
        self.seed = seed
        self.episodes = episodes
        self.host = host
        self.port = port
        self.step_timeout = step_timeout
        self.trace_dir = Path(trace_dir) if trace_dir is not None else None
        self.agent_ids = spec.agent_ids()
        self.seats: dict[str, _Seat] = {}
        self.spectators: list[_Seat] = []
        self.results: list[dict] = []
        self.protocol_errors = 0
        self._lock = threading.Lock()
        self._roster_full = threading.Event()
        self._closing = False
        self._listener: socket.socket | None = None
        self._accept_thread: threading.Thread | None = None

    # -- lifecycle ---------------------------------------------------------

    def start(self) -> tuple[str, int]:
        listener = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        listener.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        listener.bind((self.host, self.port))
        listener.listen()
        self._listener = listener
        self.host, self.port = listener.getsockname()[:2]
        self._accept_thread = threading.Thread(target=self._accept_loop, daemon=True)
        self._accept_thread.start()
        return self.host, self.port

    def _accept_loop(self) -> None:
        assert self._listener is not None
        while not self._closing:
            try:
                conn, addr = self._listener.accept()
            except OSError:
                break
            seat = _Seat(conn, addr)
            seat.start_reader()
            threading.Thread(target=self._handshake, args=(seat,), daemon=True).start()

    def _handshake(self, seat: _Seat) -> None:
        try:
            message = seat.inbox.get(timeout=30.0)
        except queue.Empty:
            seat.send(protocol.error("join_timeout"))
            seat.close()
            return
        if message.get("type") != "join":
            seat.send(protocol.error("expected_join"))
            seat.close()
            return
        if message.get("protocol") != protocol.PROTOCOL_VERSION:
            seat.send(protocol.error("protocol_version"))
            seat.close()
            return
        if message.get("spectator"):
            seat.spectator = True
            with self._lock:
                self.spectators.append(seat)
            seat.send(protocol.hello(None, self.episodes))
            return
        requested = message.get("agent_id")
        with self._lock:
            free = [a for a in self.agent_ids if a not in self.seats]
            if not free:
                seat.send(protocol.error("roster_full"))
                seat.close()
                return
            if requested is None:
                agent_id = free[0]
            elif requested in free:
                agent_id = requested
            else:
                seat.send(protocol.error("seat_unavailable", str(requested)))
                seat.close()
                return
            seat.agent_id = agent_id
            self.seats[agent_id] = seat
            roster_done = len(self.seats) == len(self.agent_ids)
        seat.send(protocol.hello(agent_id, self.episodes))
        if roster_done:
            self._roster_full.set()

    # -- episode loop ------------------------------------------------------

    def run(self) -> list[dict]:
        """Block until the roster is seated, then play all episodes."""
        self._roster_full.wait()
        for index in range(self.episodes):
            self.results.append(self._run_episode(index))
        self._broadcast(protocol.bye())
        return self.results

    def _run_episode(self, index: int) -> dict:
        seed = self.seed + index
        trace_path = None
        if self.trace_dir is not None:
            self.trace_dir.mkdir(parents=True, exist_ok=True)
            trace_path = self.trace_dir / f"episode_{index:04d}.jsonl"
        recorder = TraceRecorder(trace_path)
        eng = Engine(self.spec, seed, recorder=recorder)
        observations = eng.reset()
        rewards: dict[str, dict] | None = None

        while True:
            for agent_id in self.agent_ids:
                obs_msg = protocol.observe(
                    episode=index,
                    t=eng.t,
                    agent_id=agent_id,
                    observation=observations[agent_id].to_jsonable(),
                    reward=None if rewards is None else rewards[agent_id],
                    done=eng.done,
                )
                self.seats[agent_id].send(obs_msg)
                for spectator in list(self.spectators):
                    spectator.send(obs_msg)
            if eng.done:
                break
            actions = self._collect_actions(index, eng.t)
            result = eng.step(actions)
            observations = result.observations
            rewards = {
                a: {
                    "raw": fraction_to_jsonable(result.raw_rewards[a]),
                    "shared": fraction_to_jsonable(result.shared_rewards[a]),
                }
                for a in self.agent_ids
            }

        recorder.close()
        summary = {
            "seed": seed,
            "steps": eng.t,
            "cumulative_raw": {
                a: fraction_to_jsonable(v) for a, v in eng.cumulative_raw.items()
            },
            "cumulative_shared": {
                a: fraction_to_jsonable(v) for a, v in eng.cumulative_shared.items()
            },
            "executions": dict(sorted(eng.execution_counts.items())),
            "trace_hash": recorder.trace_hash(),
            "trace_path": str(trace_path) if trace_path else None,
        }
        end_msg = protocol.end(index, summary)
        self._broadcast(end_msg)
        return summary

    def _collect_actions(self, episode: int, t: int) -> dict[str, object]:
        """Barrier: one action per live seat, or a timeout/disconnect no-op."""
        import time

        deadline = None if self.step_timeout == 0 else time.monotonic() + self.step_timeout
        actions: dict[str, object] = {}
        for agent_id in self.agent_ids:
            seat = self.seats[agent_id]
            while agent_id not in actions:
                if not seat.alive:
                    break  # missing action; engine records the no-op reason
                remaining = None
                if deadline is not None:
                    remaining = deadline - time.monotonic()
                    if remaining <= 0:
                        self.protocol_errors += 1
                        seat.send(protocol.error("step_timeout", f"t={t}"))
                        break
                try:
                    message = seat.inbox.get(timeout=remaining)
                except queue.Empty:
                    self.protocol_errors += 1
                    seat.send(protocol.error("step_timeout", f"t={t}"))
                    break
                if message.get("type") == "_disconnect":
                    break
                if message.get("type") != "act":
                    self.protocol_errors += 1
                    seat.send(protocol.error("expected_act"))
                    continue
                if message.get("episode") != episode or message.get("t") != t:
                    self.protocol_errors += 1
                    seat.send(
                        protocol.error("stale_act", f"expected episode {episode} t {t}")
                    )
                    continue
                try:
                    actions[agent_id] = Action.from_jsonable(message.get("action"))
                except ValueError as exc:
                    # hand the raw object to the engine so the step records
                    # a malformed-action no-op instead of dropping the agent
                    self.protocol_errors += 1
                    seat.send(protocol.error("bad_action", str(exc)))
                    actions[agent_id] = message.get("action")
        return actions

    def _broadcast(self, message: dict) -> None:
        for seat in list(self.seats.values()) + list(self.spectators):
            seat.send(message)

    def close(self) -> None:
        self._closing = True
        if self._listener is not None:
            try:
                self._listener.close()
            except OSError:
                pass
        for seat in list(self.seats.values()) + list(self.spectators):
            seat.close()
