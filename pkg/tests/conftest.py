from __future__ import annotations

import pytest

from affordgate.instruction import Vocabulary
from affordgate.kb import AffordanceKB
from affordgate.scene import Entity, Kind, SceneDescription

# filled by tests/test_acceptance.py, reported at the end of the run
ACCEPTANCE_RESULTS: list[tuple[str, str, str]] = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for status, name, detail in ACCEPTANCE_RESULTS:
        terminalreporter.write_line(f"{status:4}  {name}  ({detail})")


def tool(eid, label, **states):
    return Entity(eid, label, Kind.TOOL, states)


def anatomy(eid, label, **states):
    return Entity(eid, label, Kind.ANATOMY, states)


def make_scene(*labels, scene_id="s"):
    """Scene from labels; tool/anatomy is looked up in the small test vocabulary."""
    ents = []
    for i, label in enumerate(labels, start=1):
        kind = Kind.TOOL if label in SMALL_TOOLS else Kind.ANATOMY
        ents.append(Entity(f"e{i}", label, kind, {}))
    return SceneDescription(scene_id, tuple(ents))


SMALL_TOOLS = {"grasper", "cutter", "clipper", "hook"}


@pytest.fixture
def canonical_scene():
    return SceneDescription(
        "canonical",
        (
            tool("e1", "grasper", holding="e3"),
            tool("e2", "cutter"),
            anatomy("e3", "tissue", held_by="e1"),
        ),
    )


@pytest.fixture
def two_fact_kb():
    return AffordanceKB([("cutter", "cut", "tissue"), ("grasper", "grasp", "tissue")])


@pytest.fixture
def small_vocab():
    return Vocabulary(
        verbs=frozenset({"cut", "grasp", "clip", "retract"}),
        tool_labels=frozenset(SMALL_TOOLS),
        object_labels=frozenset({"tissue", "gallbladder", "duct", "liver"}),
        aliases={"scissors": "cutter", "snip": "cut"},
    )
