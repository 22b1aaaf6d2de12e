# Default vocabulary and affordance KB for laparoscopic cholecystectomy.
#
# RECONSTRUCTION, NOT CLINICAL DATA. These facts are a plausible hand-written
# approximation of which instrument can do what to which structure. They
# exist so the tools run out of the box and must not be used to drive a
# real instrument. Supply a curated KB with --kb for anything else.
"""Built-in vocabulary and affordance facts (reconstructed, see file header)."""

from __future__ import annotations

from .instruction import Vocabulary
from .kb import AffordanceKB

VERBS = ("grasp", "retract", "dissect", "coagulate", "cut", "clip", "irrigate", "aspirate")
TOOLS = ("grasper", "hook", "cutter", "clipper", "bipolar", "irrigator")
OBJECTS = (
    "tissue",
    "gallbladder",
    "cystic_duct",
    "cystic_artery",
    "cystic_plate",
    "blood_vessel",
    "liver",
    "omentum",
    "fluid",
)

ALIASES = {
    "scissors": "cutter",
    "forceps": "grasper",
    "clip_applier": "clipper",
    "suction": "irrigator",
    "duct": "cystic_duct",
    "artery": "cystic_artery",
    "vessel": "blood_vessel",
    "grab": "grasp",
    "hold": "grasp",
    "snip": "cut",
    "cauterize": "coagulate",
}

FACTS = (
    ("cutter", "cut", "tissue"),
    ("grasper", "grasp", "tissue"),
    ("grasper", "grasp", "gallbladder"),
    ("grasper", "grasp", "omentum"),
    ("grasper", "retract", "gallbladder"),
    ("grasper", "retract", "liver"),
    ("grasper", "retract", "omentum"),
    ("hook", "dissect", "gallbladder"),
    ("hook", "dissect", "cystic_plate"),
    ("hook", "dissect", "omentum"),
    ("hook", "dissect", "tissue"),
    ("hook", "coagulate", "tissue"),
    ("hook", "coagulate", "blood_vessel"),
    ("hook", "coagulate", "liver"),
    ("cutter", "cut", "cystic_duct"),
    ("cutter", "cut", "cystic_artery"),
    ("cutter", "cut", "blood_vessel"),
    ("clipper", "clip", "cystic_duct"),
    ("clipper", "clip", "cystic_artery"),
    ("clipper", "clip", "blood_vessel"),
    ("bipolar", "coagulate", "tissue"),
    ("bipolar", "coagulate", "liver"),
    ("bipolar", "coagulate", "blood_vessel"),
    ("bipolar", "grasp", "tissue"),
    ("irrigator", "irrigate", "liver"),
    ("irrigator", "irrigate", "tissue"),
    ("irrigator", "aspirate", "fluid"),
)


def default_vocabulary() -> Vocabulary:
    return Vocabulary(frozenset(VERBS), frozenset(TOOLS), frozenset(OBJECTS), dict(ALIASES))


def default_kb() -> AffordanceKB:
    return AffordanceKB(FACTS)
