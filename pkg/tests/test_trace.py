"""Trace recording, structural validation, and hash-checked replay."""

import io
import json
from fractions import Fraction

import pytest

from conftest import scripted_document, tiny_document
from sociogrid.actions import Action
from sociogrid.config import load_scenario
from sociogrid.encoding import canonical_json, sha256_hex
from sociogrid.engine import Engine
from sociogrid.runner import run_episode
from sociogrid.trace import (
    TRACE_FORMAT,
    TRACE_VERSION,
    Trace,
    TraceError,
    TraceRecorder,
    jsonable,
    read_trace,
    replay,
)


def record_episode(doc, seed=0, policies="random"):
    recorder = TraceRecorder()
    run_episode(load_scenario(doc), seed=seed, policies=policies, recorder=recorder)
    return recorder


def reparse(recorder):
    return read_trace(io.StringIO(recorder.text()))


class TestJsonable:
    def test_conversions(self):
        assert jsonable(Fraction(3, 4)) == "3/4"
        assert jsonable(Fraction(2)) == 2
        assert jsonable((1, 2)) == [1, 2]
        assert jsonable({"k": {3, 1, 2}}) == {"k": ["1", "2", "3"]}
        assert jsonable(2.0) == 2
        assert jsonable(2.5) == 2.5
        assert jsonable({1: "x"}) == {"1": "x"}


class TestRecorder:
    def test_header_shape(self):
        recorder = record_episode(tiny_document(), seed=3)
        header = json.loads(recorder.lines[0])
        assert header["type"] == "header"
        assert header["format"] == TRACE_FORMAT
        assert header["version"] == TRACE_VERSION
        assert header["seed"] == 3
        assert header["episode_length"] == 20
        assert [a["id"] for a in header["agents"]] == [
            "walker_0",
            "walker_1",
            "walker_2",
        ]

    def test_line_counts(self):
        recorder = record_episode(tiny_document())
        assert len(recorder.lines) == 1 + 20 + 1  # header + steps + end

    def test_lines_are_canonical_json(self):
        recorder = record_episode(tiny_document())
        for line in recorder.lines:
            assert canonical_json(json.loads(line)) == line

    def test_trace_hash_is_sha256_of_text(self):
        recorder = record_episode(tiny_document())
        assert recorder.trace_hash() == sha256_hex(recorder.text())

    def test_file_stream_matches_memory(self, tmp_path):
        path = tmp_path / "episode.jsonl"
        recorder = TraceRecorder(path)
        run_episode(load_scenario(tiny_document()), seed=1, recorder=recorder)
        recorder.close()
        assert path.read_text(encoding="ascii") == recorder.text()
        assert read_trace(path).trace_hash() == recorder.trace_hash()

    def test_graph_recorded_only_on_change(self):
        spec = load_scenario(tiny_document())
        recorder = TraceRecorder()
        eng = Engine(spec, seed=0, recorder=recorder)
        eng.reset()
        eng.step({})  # nothing social: no graph on this record
        eng.step({eng.agent_ids[0]: Action.connect(eng.agent_ids[1])})
        eng.step({})
        records = [json.loads(line) for line in recorder.lines]
        assert "graph" in records[0]            # header always carries it
        assert "graph" not in records[1]
        assert "graph" in records[2]
        assert "graph" not in records[3]


class TestReadTrace:
    def test_round_trip(self):
        recorder = record_episode(tiny_document(), seed=9)
        trace = reparse(recorder)
        assert trace.seed == 9
        assert len(trace.steps) == 20
        assert trace.end is not None
        assert trace.trace_hash() == recorder.trace_hash()

    def test_blank_lines_ignored(self):
        recorder = record_episode(tiny_document())
        padded = "\n\n".join(recorder.lines) + "\n"
        trace = read_trace(io.StringIO(padded))
        assert len(trace.steps) == 20

    @pytest.mark.parametrize(
        "mutate,message",
        [
            (lambda lines: ["not json"] + lines[1:], "not valid JSON"),
            (lambda lines: lines[1:], "step before header"),
            (lambda lines: [lines[0], lines[0]] + lines[1:], "duplicate header"),
            (lambda lines: lines[:1] + lines[2:], "expected 0"),
            (lambda lines: lines + [lines[-1]], "duplicate end"),
            (lambda lines: lines[:-1] + [lines[5]] + lines[-1:], "expected"),
            (lambda lines: lines + [lines[5]], "step after end"),
            (
                lambda lines: [lines[0].replace("gridsim-trace", "other-format")]
                + lines[1:],
                "unknown trace format",
            ),
            (
                lambda lines: [lines[0].replace('"version":1', '"version":99')]
                + lines[1:],
                "unsupported trace version",
            ),
            (
                lambda lines: ['{"type":"mystery"}'] + lines,
                "unknown record type",
            ),
        ],
    )
    def test_structural_errors(self, mutate, message):
        recorder = record_episode(tiny_document())
        mutated = mutate(list(recorder.lines))
        with pytest.raises(TraceError, match=message):
            read_trace(io.StringIO("\n".join(mutated) + "\n"))

    def test_unknown_record_type(self):
        recorder = record_episode(tiny_document())
        lines = list(recorder.lines)
        lines.insert(1, '{"type":"mystery"}')
        with pytest.raises(TraceError, match="unknown record type"):
            read_trace(io.StringIO("\n".join(lines) + "\n"))

    def test_end_steps_mismatch(self):
        recorder = record_episode(tiny_document())
        lines = list(recorder.lines)
        end = json.loads(lines[-1])
        end["steps"] = 99
        lines[-1] = canonical_json(end)
        with pytest.raises(TraceError, match="end claims 99"):
            read_trace(io.StringIO("\n".join(lines) + "\n"))

    def test_empty_stream(self):
        with pytest.raises(TraceError, match="no header"):
            read_trace(io.StringIO(""))


class TestFinalGraph:
    def test_last_graph_wins(self):
        spec = load_scenario(tiny_document())
        recorder = TraceRecorder()
        eng = Engine(spec, seed=0, recorder=recorder)
        eng.reset()
        eng.step({eng.agent_ids[0]: Action.connect("group_0")})
        while not eng.done:
            eng.step({})
        trace = reparse(recorder)
        final = trace.final_graph()
        edges = {(e["from"], e["to"]) for e in final["edges"]}
        assert (eng.agent_ids[0], "group_0") in edges

    def test_header_graph_when_static(self):
        recorder = record_episode(tiny_document(), policies="noop")
        trace = reparse(recorder)
        assert trace.final_graph() == trace.header["graph"]


class TestReplay:
    def test_honest_trace_replays_clean(self):
        recorder = record_episode(tiny_document(), seed=21)
        report = replay(reparse(recorder))
        assert report.ok
        assert report.steps_checked == 20
        assert report.mismatches == ()

    def test_scripted_trace_replays_clean(self):
        spec = load_scenario(scripted_document())
        recorder = TraceRecorder()
        eng = Engine(spec, seed=0, recorder=recorder)
        eng.reset()
        (agent,) = eng.agent_ids
        for action in (
            Action.move("E"),
            Action.pick("wood"),
            Action.move("S"),
            Action.pick("stone"),
            Action.move("S"),
            Action.synthesize(),
        ):
            eng.step({agent: action})
        while not eng.done:
            eng.step({agent: Action.move("stay")})
        report = replay(reparse(recorder))
        assert report.ok

    def test_tampered_hash_detected_at_step(self):
        recorder = record_episode(tiny_document())
        lines = list(recorder.lines)
        record = json.loads(lines[4])  # step t=3
        record["state_hash"] = "0" * 64
        lines[4] = canonical_json(record)
        report = replay(read_trace(io.StringIO("\n".join(lines) + "\n")))
        assert not report.ok
        assert report.mismatches[0]["where"] == "step 3"
        assert report.mismatches[0]["field"] == "state_hash"

    def test_tampered_action_diverges_from_there(self):
        spec = load_scenario(scripted_document())
        recorder = TraceRecorder()
        eng = Engine(spec, seed=0, recorder=recorder)
        eng.reset()
        (agent,) = eng.agent_ids
        eng.step({agent: Action.move("E")})
        eng.step({agent: Action.pick("wood")})
        while not eng.done:
            eng.step({agent: Action.move("stay")})
        lines = list(recorder.lines)
        record = json.loads(lines[2])  # the pick step
        record["actions"][agent] = {"verb": "noop"}
        lines[2] = canonical_json(record)
        report = replay(read_trace(io.StringIO("\n".join(lines) + "\n")))
        assert not report.ok
        wheres = {m["where"] for m in report.mismatches}
        assert "step 1" in wheres
        assert "header" not in wheres

    def test_stop_at_first(self):
        recorder = record_episode(tiny_document())
        lines = list(recorder.lines)
        record = json.loads(lines[2])
        record["state_hash"] = "f" * 64
        lines[2] = canonical_json(record)
        report = replay(
            read_trace(io.StringIO("\n".join(lines) + "\n")), stop_at_first=True
        )
        assert not report.ok
        assert report.steps_checked < 20

    def test_bad_recorded_action_raises(self):
        recorder = record_episode(tiny_document())
        lines = list(recorder.lines)
        record = json.loads(lines[1])
        agent = next(iter(record["actions"]))
        record["actions"][agent] = {"verb": "teleport"}
        lines[1] = canonical_json(record)
        with pytest.raises(TraceError, match="bad action"):
            replay(read_trace(io.StringIO("\n".join(lines) + "\n")))

    def test_invalid_header_scenario_raises(self):
        recorder = record_episode(tiny_document())
        lines = list(recorder.lines)
        header = json.loads(lines[0])
        header["scenario"]["episode_length"] = -5
        lines[0] = canonical_json(header)
        with pytest.raises(TraceError, match="header scenario invalid"):
            replay(read_trace(io.StringIO("\n".join(lines) + "\n")))
