"""Shared fixtures: small fast scenario documents used across test modules."""

from __future__ import annotations

import copy

import pytest

from sociogrid.config import load_scenario


def tiny_document(**overrides) -> dict:
    """A 5x5 exploration world with the wood/stone/hammer chain: fast to run,
    has crafting, piles, groups, and every social verb live."""
    doc = {
        "name": "tiny",
        "map": {"height": 5, "width": 5},
        "terrain": {"blocks": 0},
        "resources": ["wood", "stone", "hammer"],
        "events": {"hammer_craft": 2},
        "piles": {"wood": 4, "stone": 3},
        "agents": [{"role": "walker", "count": 3}],
        "observation_radius": 2,
        "episode_length": 20,
        "scenario": {"kind": "exploration", "groups": 2},
    }
    doc.update(copy.deepcopy(overrides))
    return doc


def scripted_document(**overrides) -> dict:
    """Fully pinned 4x4 world (no sampled placement) for action-level tests:
    one agent at (0,0), wood at (0,1), stone at (1,1), a crafting site at
    (2,1)."""
    doc = {
        "name": "scripted",
        "map": {"height": 4, "width": 4},
        "terrain": {"blocks": 0},
        "resources": ["wood", "stone", "hammer"],
        "events": {"hammer_craft": {"positions": [[2, 1]]}},
        "piles": {
            "wood": {"positions": [[0, 1]]},
            "stone": {"positions": [[1, 1]]},
        },
        "agents": [{"role": "crafter", "count": 1, "positions": [[0, 0]]}],
        "observation_radius": 3,
        "episode_length": 12,
        "scenario": {"kind": "exploration", "groups": 0},
    }
    doc.update(copy.deepcopy(overrides))
    return doc


@pytest.fixture
def tiny_spec():
    return load_scenario(tiny_document())


@pytest.fixture
def scripted_spec():
    return load_scenario(scripted_document())
