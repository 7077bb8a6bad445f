"""Episode traces: append-only record streams that replay byte-for-byte.

A trace is line-delimited canonical JSON (sorted keys, compact separators,
ASCII) so two runs of the same episode produce identical bytes regardless of
transport or platform. No timestamps, no floats where rationals matter.

Record types, one per line:
- header: format tag and version, seed, the full scenario document, the
  roster, the initial social graph, and hashes of the freshly reset state;
- step: the effective action per agent (after sanitization — rejected
  submissions show up as noops with the reason in info), raw and shared
  rewards as exact rationals, the info channel, state and rng hashes, and
  the social graph snapshot whenever it changed this step;
- end: cumulative totals, execution counts, and the final hashes.

`replay` rebuilds the scenario from the header, re-simulates the recorded
actions, and compares state and rng hashes at every step, so any divergence
in engine behaviour is caught at the step where it first appears.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

from .actions import Action
from .config import parse_document, scenario_to_document
from .encoding import canonical_json, fraction_to_jsonable, sha256_hex

TRACE_FORMAT = "gridsim-trace"
TRACE_VERSION = 1


class TraceError(ValueError):
    pass


def jsonable(value):
    """Recursively convert runtime values (Fractions, tuples, sets) into
    canonical-JSON-safe structures."""
    if isinstance(value, Fraction):
        return fraction_to_jsonable(value)
    if isinstance(value, dict):
        return {str(k): jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [jsonable(v) for v in value]
    if isinstance(value, (set, frozenset)):
        return sorted(str(v) for v in value)
    if isinstance(value, float) and value.is_integer():
        return int(value)
    return value


class TraceRecorder:
    """Engine hook that accumulates trace lines (and optionally streams them
    to a file as they are produced)."""

    def __init__(self, path: str | Path | None = None):
        self.lines: list[str] = []
        self._fh: io.TextIOBase | None = None
        if path is not None:
            self._fh = open(path, "w", encoding="ascii", newline="\n")
        self._graph_version = -1

    # -- engine hooks ------------------------------------------------------

    def on_reset(self, eng) -> None:
        graph = eng.graph_snapshot()
        self._graph_version = eng.graph_version
        self._emit(
            {
                "type": "header",
                "format": TRACE_FORMAT,
                "version": TRACE_VERSION,
                "seed": eng.seed,
                "scenario": scenario_to_document(eng.spec),
                "agents": [
                    {"id": aid, "role": eng.roles[aid]} for aid in eng.agent_ids
                ],
                "episode_length": eng.spec.episode_length,
                "graph": graph,
                "state_hash": eng.state_hash(),
                "rng_hash": eng.rng_hash(),
            }
        )

    def on_step(self, eng, resolved: dict[str, Action], result) -> None:
        record = {
            "type": "step",
            "t": result.info.get("t", eng.t - 1),
            "actions": {aid: act.to_jsonable() for aid, act in resolved.items()},
            "raw": {aid: fraction_to_jsonable(v) for aid, v in result.raw_rewards.items()},
            "shared": {
                aid: fraction_to_jsonable(v) for aid, v in result.shared_rewards.items()
            },
            "info": jsonable(result.info),
            "done": result.done,
            "state_hash": eng.state_hash(),
            "rng_hash": eng.rng_hash(),
        }
        # state_hash() refreshed the snapshot cache, so the version is current
        if eng.graph_version != self._graph_version:
            record["graph"] = eng.graph_snapshot()
            self._graph_version = eng.graph_version
        self._emit(record)

    def on_end(self, eng) -> None:
        self._emit(
            {
                "type": "end",
                "steps": eng.t,
                "cumulative_raw": {
                    a: fraction_to_jsonable(v) for a, v in eng.cumulative_raw.items()
                },
                "cumulative_shared": {
                    a: fraction_to_jsonable(v) for a, v in eng.cumulative_shared.items()
                },
                "executions": dict(sorted(eng.execution_counts.items())),
                "state_hash": eng.state_hash(),
                "rng_hash": eng.rng_hash(),
            }
        )
        if self._fh is not None:
            self._fh.flush()

    # -- output ------------------------------------------------------------

    def _emit(self, record: dict) -> None:
        line = canonical_json(record)
        self.lines.append(line)
        if self._fh is not None:
            self._fh.write(line + "\n")

    def text(self) -> str:
        return "".join(line + "\n" for line in self.lines)

    def trace_hash(self) -> str:
        """Hash of the full trace byte stream."""
        return sha256_hex(self.text())

    def close(self) -> None:
        if self._fh is not None:
            self._fh.close()
            self._fh = None

    def __enter__(self) -> "TraceRecorder":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


@dataclass
class Trace:
    header: dict
    steps: list[dict]
    end: dict | None
    lines: list[str] = field(default_factory=list)

    @property
    def seed(self) -> int:
        return self.header["seed"]

    def trace_hash(self) -> str:
        return sha256_hex("".join(line + "\n" for line in self.lines))

    def final_graph(self) -> dict:
        """The last social graph snapshot embedded in the record stream."""
        graph = self.header["graph"]
        for step in self.steps:
            if "graph" in step:
                graph = step["graph"]
        return graph


def read_trace(source: str | Path | io.TextIOBase) -> Trace:
    """Parse and structurally validate a trace; raises TraceError with the
    offending line number on any problem."""
    if isinstance(source, (str, Path)):
        with open(source, "r", encoding="ascii") as fh:
            raw_lines = fh.read().splitlines()
    else:
        raw_lines = source.read().splitlines()

    import json

    header: dict | None = None
    steps: list[dict] = []
    end: dict | None = None
    kept: list[str] = []
    for lineno, line in enumerate(raw_lines, start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            raise TraceError(f"line {lineno}: not valid JSON ({exc.msg})")
        if not isinstance(record, dict) or "type" not in record:
            raise TraceError(f"line {lineno}: record must be an object with a type")
        kind = record["type"]
        if kind == "header":
            if header is not None:
                raise TraceError(f"line {lineno}: duplicate header")
            if record.get("format") != TRACE_FORMAT:
                raise TraceError(f"line {lineno}: unknown trace format {record.get('format')!r}")
            if record.get("version") != TRACE_VERSION:
                raise TraceError(f"line {lineno}: unsupported trace version {record.get('version')!r}")
            header = record
        elif kind == "step":
            if header is None:
                raise TraceError(f"line {lineno}: step before header")
            if end is not None:
                raise TraceError(f"line {lineno}: step after end record")
            expected_t = len(steps)
            if record.get("t") != expected_t:
                raise TraceError(
                    f"line {lineno}: step t={record.get('t')!r}, expected {expected_t}"
                )
            steps.append(record)
        elif kind == "end":
            if header is None:
                raise TraceError(f"line {lineno}: end before header")
            if end is not None:
                raise TraceError(f"line {lineno}: duplicate end record")
            if record.get("steps") != len(steps):
                raise TraceError(
                    f"line {lineno}: end claims {record.get('steps')!r} steps, trace has {len(steps)}"
                )
            end = record
        else:
            raise TraceError(f"line {lineno}: unknown record type {kind!r}")
        kept.append(line)
    if header is None:
        raise TraceError("trace has no header record")
    return Trace(header=header, steps=steps, end=end, lines=kept)


@dataclass(frozen=True)
class ReplayReport:
    ok: bool
    steps_checked: int
    mismatches: tuple[dict, ...]

    def to_jsonable(self) -> dict:
        return {
            "ok": self.ok,
            "steps_checked": self.steps_checked,
            "mismatches": list(self.mismatches),
        }


def replay(trace: Trace, stop_at_first: bool = False) -> ReplayReport:
    """Re-simulate a trace and compare state and rng hashes at reset, after
    every step, and at the end."""
    from .engine import Engine

    spec, violations = parse_document(trace.header["scenario"])
    if spec is None:
        raise TraceError(
            "header scenario invalid: " + "; ".join(v.message for v in violations)
        )
    eng = Engine(spec, seed=trace.header["seed"])
    eng.reset()

    mismatches: list[dict] = []

    def check(where: str, expected: dict) -> None:
        for key, actual in (
            ("state_hash", eng.state_hash()),
            ("rng_hash", eng.rng_hash()),
        ):
            if key in expected and expected[key] != actual:
                mismatches.append(
                    {"where": where, "field": key, "recorded": expected[key], "replayed": actual}
                )

    check("header", trace.header)
    steps_checked = 0
    for record in trace.steps:
        if mismatches and stop_at_first:
            break
        try:
            actions = {
                aid: Action.from_jsonable(raw)
                for aid, raw in record.get("actions", {}).items()
            }
        except ValueError as exc:
            raise TraceError(f"step {record.get('t')}: bad action ({exc})")
        eng.step(actions)
        steps_checked += 1
        check(f"step {record['t']}", record)
    if trace.end is not None and not (mismatches and stop_at_first):
        check("end", trace.end)
    return ReplayReport(
        ok=not mismatches, steps_checked=steps_checked, mismatches=tuple(mismatches)
    )
