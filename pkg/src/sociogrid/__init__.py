"""Deterministic multi-agent grid-world simulator.

Agents explore a tile map, collect resources whose very visibility depends
on the tools they hold, craft along a recipe chain, and share rewards
through an explicit two-layer social graph (agents and groups) that four
mini-game scenarios reshape in different ways. Episodes are exactly
reproducible: one seed fixes the world, every tie-break, and the trace
bytes, whether agents act in-process or over the line protocol.

Public surface:
- config: scenario documents, validation, presets
- registry: resource/event catalog
- engine: the step loop (Engine, Observation, StepResult)
- actions: the action vocabulary
- social: the social graph, redistribution, structure classification
- oracle: reward upper-bound planning (build_instance, solve, brute_force)
- metrics: fairness, completion, normalized reward, episode summaries
- trace: recording, reading, replay
- runner/server: in-process and TCP transports
"""

from .actions import Action, NOOP
from .config import (
    PRESET_NAMES,
    SCENARIO_KINDS,
    ScenarioSpec,
    ScenarioValidationError,
    Violation,
    load_scenario,
    load_scenario_file,
    parse_document,
    preset,
    preset_document,
    scenario_to_document,
    validate_document,
)
from .engine import Engine, Observation, StepResult
from .metrics import EpisodeSummary, fairness, normalized_reward, summarize
from .oracle import (
    OracleError,
    OracleInstance,
    OracleSolution,
    brute_force,
    build_instance,
    solve,
)
from .registry import BUILTIN, ContentRegistry, EventKind, ResourceKind, builtin_registry
from .runner import EpisodeResult, run_episode
from .server import SimulationServer
from .social import SocialGraph, classify_structure, merge_weights, redistribute
from .trace import Trace, TraceError, TraceRecorder, read_trace, replay

__version__ = "0.1.0"

__all__ = [
    "Action",
    "NOOP",
    "PRESET_NAMES",
    "SCENARIO_KINDS",
    "ScenarioSpec",
    "ScenarioValidationError",
    "Violation",
    "load_scenario",
    "load_scenario_file",
    "parse_document",
    "preset",
    "preset_document",
    "scenario_to_document",
    "validate_document",
    "Engine",
    "Observation",
    "StepResult",
    "EpisodeSummary",
    "fairness",
    "normalized_reward",
    "summarize",
    "OracleError",
    "OracleInstance",
    "OracleSolution",
    "brute_force",
    "build_instance",
    "solve",
    "BUILTIN",
    "ContentRegistry",
    "EventKind",
    "ResourceKind",
    "builtin_registry",
    "EpisodeResult",
    "run_episode",
    "SimulationServer",
    "SocialGraph",
    "classify_structure",
    "merge_weights",
    "redistribute",
    "Trace",
    "TraceError",
    "TraceRecorder",
    "read_trace",
    "replay",
    "__version__",
]
