"""In-process episode driver: the reference transport.

Policies receive the JSON form of each observation — byte-identical content
to what the socket transport delivers — so an episode run here and an episode
run through the server produce the same action stream and hence the same
trace bytes for the same seed and policies.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

from .agents import Policy, make_policies
from .config import ScenarioSpec
from .engine import Engine
from .trace import TraceRecorder


@dataclass(frozen=True)
class EpisodeResult:
    seed: int
    steps: int
    cumulative_raw: dict[str, Fraction]
    cumulative_shared: dict[str, Fraction]
    executions: dict[str, int]
    trace_hash: str | None

    def to_jsonable(self) -> dict:
        from .encoding import fraction_to_jsonable

        return {
            "seed": self.seed,
            "steps": self.steps,
            "cumulative_raw": {
                a: fraction_to_jsonable(v) for a, v in self.cumulative_raw.items()
            },
            "cumulative_shared": {
                a: fraction_to_jsonable(v) for a, v in self.cumulative_shared.items()
            },
            "executions": dict(sorted(self.executions.items())),
            "trace_hash": self.trace_hash,
        }


def run_episode(
    spec: ScenarioSpec,
    seed: int,
    policies: dict[str, Policy] | str = "random",
    trace_path: str | Path | None = None,
    recorder: TraceRecorder | None = None,
) -> EpisodeResult:
    """Run one full episode. `policies` is either a ready map or a policy
    kind name expanded over the roster. Pass a recorder (or a path) to keep
    the trace."""
    if isinstance(policies, str):
        policies = make_policies(policies, spec.agent_ids(), seed)
    own_recorder = False
    if recorder is None and trace_path is not None:
        recorder = TraceRecorder(trace_path)
        own_recorder = True

    eng = Engine(spec, seed, recorder=recorder)
    observations = eng.reset()
    while not eng.done:
        actions = {
            aid: policies[aid].act(observations[aid].to_jsonable())
            for aid in eng.agent_ids
        }
        result = eng.step(actions)
        observations = result.observations

    if own_recorder:
        recorder.close()
    return EpisodeResult(
        seed=seed,
        steps=eng.t,
        cumulative_raw=dict(eng.cumulative_raw),
        cumulative_shared=dict(eng.cumulative_shared),
        executions=dict(eng.execution_counts),
        trace_hash=recorder.trace_hash() if recorder is not None else None,
    )
