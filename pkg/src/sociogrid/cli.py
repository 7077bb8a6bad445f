"""Command-line front end.

Subcommands: run, oracle, validate, serve, replay, summarize, bench.
Exit codes: 0 success; 2 usage or configuration problems (bad flags,
unreadable files, invalid scenario documents); 3 semantic failures found in
otherwise well-formed input (validation violations, replay mismatches,
planner cross-check disagreement).

All structured output is one canonical JSON object per line, so results can
be piped into other tools; validation problems go to stderr as plain lines.
"""

from __future__ import annotations

import argparse
import json
import sys
import time

from .config import (
    PRESET_NAMES,
    SCENARIO_KINDS,
    ScenarioSpec,
    parse_document,
    preset_document,
)
from .encoding import canonical_json

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_MISMATCH = 3


class CliError(Exception):
    def __init__(self, message: str, code: int = EXIT_CONFIG):
        super().__init__(message)
        self.code = code


def _emit(payload: dict) -> None:
    sys.stdout.write(canonical_json(payload) + "\n")
    sys.stdout.flush()


def _read_json(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc.strerror}")
    except json.JSONDecodeError as exc:
        raise CliError(f"{path} is not valid JSON: {exc.msg} (line {exc.lineno})")


def _load_spec(args: argparse.Namespace) -> ScenarioSpec:
    if getattr(args, "spec", None):
        doc = _read_json(args.spec)
        source = args.spec
    else:
        try:
            doc = preset_document(args.preset, getattr(args, "scenario", None))
        except (KeyError, ValueError) as exc:
            raise CliError(str(exc))
        source = f"preset {args.preset}"
    spec, violations = parse_document(doc)
    if spec is None:
        for violation in violations:
            sys.stderr.write(f"{source}: {violation.path}: {violation.message}\n")
        raise CliError(f"invalid scenario ({len(violations)} problems)")
    return spec


def _add_spec_options(sub: argparse.ArgumentParser) -> None:
    group = sub.add_mutually_exclusive_group(required=True)
    group.add_argument("--preset", choices=PRESET_NAMES, help="built-in scenario")
    group.add_argument("--spec", metavar="FILE", help="scenario document (JSON)")
    sub.add_argument(
        "--scenario",
        choices=SCENARIO_KINDS,
        default=None,
        help="override the preset's mini-game (presets only)",
    )


# -- subcommands -----------------------------------------------------------


def cmd_run(args: argparse.Namespace) -> int:
    from .runner import run_episode

    spec = _load_spec(args)
    result = run_episode(spec, args.seed, policies=args.policy, trace_path=args.trace)
    _emit(result.to_jsonable())
    return EXIT_OK


def cmd_oracle(args: argparse.Namespace) -> int:
    from .oracle import OracleError, brute_force, build_instance, solve

    spec = _load_spec(args)
    try:
        instance = build_instance(spec)
    except OracleError as exc:
        raise CliError(f"cannot build planning instance: {exc}")
    solution = solve(instance, node_budget=args.budget)
    payload = solution.to_jsonable()
    if args.verify:
        try:
            check = brute_force(instance)
        except OracleError as exc:
            raise CliError(f"brute-force verification not feasible: {exc}")
        payload["verified"] = check.objective == solution.objective
        payload["brute_force_objective"] = float(check.objective)
        if not payload["verified"]:
            _emit(payload)
            sys.stderr.write(
                f"planner/brute-force disagreement: {solution.objective} vs {check.objective}\n"
            )
            return EXIT_MISMATCH
    _emit(payload)
    return EXIT_OK


def cmd_validate(args: argparse.Namespace) -> int:
    from .trace import TraceError, read_trace

    if args.trace:
        try:
            trace = read_trace(args.trace)
        except OSError as exc:
            raise CliError(f"cannot read {args.trace}: {exc.strerror}")
        except TraceError as exc:
            sys.stderr.write(f"{args.trace}: {exc}\n")
            _emit({"ok": False, "target": args.trace, "problem": str(exc)})
            return EXIT_MISMATCH
        _emit(
            {
                "ok": True,
                "target": args.trace,
                "steps": len(trace.steps),
                "complete": trace.end is not None,
                "trace_hash": trace.trace_hash(),
            }
        )
        return EXIT_OK

    doc = _read_json(args.spec)
    spec, violations = parse_document(doc)
    if violations:
        for violation in violations:
            sys.stderr.write(f"{args.spec}: {violation.path}: {violation.message}\n")
        _emit(
            {
                "ok": False,
                "target": args.spec,
                "problems": [
                    {"path": v.path, "message": v.message} for v in violations
                ],
            }
        )
        return EXIT_MISMATCH
    assert spec is not None
    _emit(
        {
            "ok": True,
            "target": args.spec,
            "name": spec.name,
            "agents": spec.agent_ids(),
            "episode_length": spec.episode_length,
        }
    )
    return EXIT_OK


def cmd_serve(args: argparse.Namespace) -> int:
    from .server import SimulationServer

    spec = _load_spec(args)
    server = SimulationServer(
        spec,
        seed=args.seed,
        episodes=args.episodes,
        host=args.host,
        port=args.port,
        step_timeout=args.timeout,
        trace_dir=args.trace_dir,
    )
    host, port = server.start()
    _emit(
        {
            "event": "listening",
            "host": host,
            "port": port,
            "agents": spec.agent_ids(),
            "episodes": args.episodes,
        }
    )
    try:
        results = server.run()
    finally:
        server.close()
    for index, result in enumerate(results):
        _emit({"event": "episode", "index": index, **result})
    _emit({"event": "done", "protocol_errors": server.protocol_errors})
    return EXIT_OK


def cmd_replay(args: argparse.Namespace) -> int:
    from .trace import TraceError, read_trace, replay

    try:
        trace = read_trace(args.trace)
    except OSError as exc:
        raise CliError(f"cannot read {args.trace}: {exc.strerror}")
    except TraceError as exc:
        sys.stderr.write(f"{args.trace}: {exc}\n")
        return EXIT_MISMATCH
    try:
        report = replay(trace, stop_at_first=args.stop_at_first)
    except TraceError as exc:
        sys.stderr.write(f"{args.trace}: {exc}\n")
        return EXIT_MISMATCH
    _emit({"target": args.trace, **report.to_jsonable()})
    return EXIT_OK if report.ok else EXIT_MISMATCH


def cmd_summarize(args: argparse.Namespace) -> int:
    from .metrics import summarize
    from .trace import TraceError, read_trace

    try:
        trace = read_trace(args.trace)
    except OSError as exc:
        raise CliError(f"cannot read {args.trace}: {exc.strerror}")
    except TraceError as exc:
        sys.stderr.write(f"{args.trace}: {exc}\n")
        return EXIT_MISMATCH
    summary = summarize(
        trace, with_oracle=not args.no_oracle, oracle_budget=args.oracle_budget
    )
    _emit(summary.to_jsonable())
    return EXIT_OK


def cmd_bench(args: argparse.Namespace) -> int:
    from .agents import make_policies
    from .engine import Engine

    spec = _load_spec(args)
    total_steps = 0
    elapsed = 0.0
    seed = args.seed
    while total_steps < args.steps:
        policies = make_policies(args.policy, spec.agent_ids(), seed)
        eng = Engine(spec, seed)
        observations = eng.reset()
        while not eng.done and total_steps < args.steps:
            actions = {
                aid: policies[aid].act(observations[aid].to_jsonable())
                for aid in eng.agent_ids
            }
            start = time.perf_counter()
            result = eng.step(actions)
            elapsed += time.perf_counter() - start
            observations = result.observations
            total_steps += 1
        seed += 1
    rate = total_steps / elapsed if elapsed > 0 else float("inf")
    _emit(
        {
            "steps": total_steps,
            "seconds": round(elapsed, 6),
            "steps_per_second": round(rate, 2),
            "agents": len(spec.agent_ids()),
        }
    )
    return EXIT_OK


# -- parser ----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sociogrid",
        description="Deterministic multi-agent grid-world simulator",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one episode in-process")
    _add_spec_options(p_run)
    p_run.add_argument("--seed", type=int, default=0)
    p_run.add_argument("--policy", default="random", help="random, greedy, or noop")
    p_run.add_argument("--trace", metavar="FILE", default=None, help="write the trace here")
    p_run.set_defaults(func=cmd_run)

    p_oracle = sub.add_parser("oracle", help="compute the reward upper bound")
    _add_spec_options(p_oracle)
    p_oracle.add_argument("--budget", type=int, default=200_000, help="search node budget")
    p_oracle.add_argument(
        "--verify", action="store_true", help="cross-check with brute force (small instances)"
    )
    p_oracle.set_defaults(func=cmd_oracle)

    p_validate = sub.add_parser("validate", help="check a scenario document or trace file")
    group = p_validate.add_mutually_exclusive_group(required=True)
    group.add_argument("--spec", metavar="FILE")
    group.add_argument("--trace", metavar="FILE")
    p_validate.set_defaults(func=cmd_validate)

    p_serve = sub.add_parser("serve", help="serve episodes to remote agents over TCP")
    _add_spec_options(p_serve)
    p_serve.add_argument("--seed", type=int, default=0)
    p_serve.add_argument("--episodes", type=int, default=1)
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--port", type=int, default=0, help="0 picks a free port")
    p_serve.add_argument(
        "--timeout", type=float, default=30.0, help="per-step action timeout in seconds; 0 waits forever"
    )
    p_serve.add_argument("--trace-dir", metavar="DIR", default=None)
    p_serve.set_defaults(func=cmd_serve)

    p_replay = sub.add_parser("replay", help="re-simulate a trace and compare hashes")
    p_replay.add_argument("--trace", metavar="FILE", required=True)
    p_replay.add_argument("--stop-at-first", action="store_true")
    p_replay.set_defaults(func=cmd_replay)

    p_summarize = sub.add_parser("summarize", help="episode metrics from a trace")
    p_summarize.add_argument("--trace", metavar="FILE", required=True)
    p_summarize.add_argument("--no-oracle", action="store_true")
    p_summarize.add_argument("--oracle-budget", type=int, default=200_000)
    p_summarize.set_defaults(func=cmd_summarize)

    p_bench = sub.add_parser("bench", help="measure engine step throughput")
    _add_spec_options(p_bench)
    p_bench.add_argument("--seed", type=int, default=0)
    p_bench.add_argument("--steps", type=int, default=500)
    p_bench.add_argument("--policy", default="random")
    p_bench.set_defaults(func=cmd_bench)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code else EXIT_OK
    try:
        return args.func(args)
    except CliError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return exc.code
    except KeyboardInterrupt:
        return 130


if __name__ == "__main__":
    sys.exit(main())
