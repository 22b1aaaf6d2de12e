"""Affordance-grounded disambiguation of surgical requests with a conformal safety gate."""

from .conformal import (
    CalibrationSet,
    ConformalClass,
    Decision,
    FlagWeights,
    PValuePair,
    ReasonCode,
    Verdict,
    ambiguity_evidence,
    calibrate,
    decide,
    nonconformity,
    p_values,
)
from .dataset import GeneratorConfig, LabeledSample, generate_synthetic, load_dataset, split_by_label
from .defaults import default_kb, default_vocabulary
from .instruction import AmbiguityLabel, InstructionTriple, Vocabulary, parse_instruction
from .kb import AffordanceFact, AffordanceKB, load_kb
from .pipeline import (
    OutcomeTally,
    PipelineVerdict,
    calibrate_from_samples,
    evaluate,
    run_pipeline,
)
from .reasoning import AmbiguityFlags, Command, DisambiguationResult, RuleBasedExpert, reason
from .scene import Entity, Kind, SceneDescription, parse_scene, present_objects, present_tools

__version__ = "0.1.0"
