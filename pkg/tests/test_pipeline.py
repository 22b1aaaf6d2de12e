import csv
import io
import random

import pytest
from conftest import make_scene
from hypothesis import given, settings
from hypothesis import strategies as st

from affordgate.conformal import CalibrationSet, ReasonCode, Verdict
from affordgate.dataset import GeneratorConfig, corrupt_tool_removal, generate_synthetic, split_by_label
from affordgate.defaults import default_kb, default_vocabulary
from affordgate.instruction import AmbiguityLabel, InstructionParseError, InstructionTriple, phrase
from affordgate.reasoning import AmbiguityFlags, Command, DisambiguationResult, ReasoningStep
from affordgate.scene import Entity, Kind, SceneDescription
from affordgate.pipeline import (
    Outcome,
    OutcomeTally,
    calibrate_from_samples,
    evaluate,
    export_pvalue_distributions,
    format_tally,
    run_pipeline,
)

THIRD, TWO_THIRDS = 1 / 3, 2 / 3
# C_NonAmb all zero, C_Amb all <= 2/3, n = 12 per class
SEPARATED = CalibrationSet(
    amb_scores=(TWO_THIRDS,) * 6 + (THIRD,) * 4 + (0.0,) * 2, nonamb_scores=(0.0,) * 12
)


def test_executable_with_resolution(small_vocab, two_fact_kb):
    v = run_pipeline(make_scene("cutter", "tissue"), "cut", two_fact_kb, small_vocab, SEPARATED)
    assert v.decision.verdict is Verdict.EXECUTABLE
    assert v.resolved == Command("cutter", "cut", "tissue")
    assert v.p.p_nonamb == 1 and v.p.p_amb == pytest.approx(1 / 13)


def test_missing_tool_not_executable(small_vocab, two_fact_kb):
    v = run_pipeline(make_scene("grasper", "tissue"), "cut", two_fact_kb, small_vocab, SEPARATED)
    assert v.decision.verdict is not Verdict.EXECUTABLE
    assert v.flags.tool_missing == 1
    assert v.p.p_nonamb == pytest.approx(1 / 13)


def test_parse_error_propagates(small_vocab, two_fact_kb):
    with pytest.raises(InstructionParseError) as exc:
        run_pipeline(make_scene("cutter"), "transmogrify", two_fact_kb, small_vocab, SEPARATED)
    assert exc.value.text == "transmogrify"


class NoCommandExpert:
    """Claims no ambiguity but never names a command."""

    def reason(self, scene, triple, kb):
        return DisambiguationResult(
            AmbiguityFlags(0, 0, 0), (ReasoningStep("affordance-check", "stub", "valid"),)
        )


def test_gate_never_authorizes_unresolved_command(small_vocab, two_fact_kb):
    v = run_pipeline(
        make_scene("cutter", "tissue"), "cut", two_fact_kb, small_vocab, SEPARATED, expert=NoCommandExpert()
    )
    assert v.decision.verdict is Verdict.UNCERTAIN
    assert v.decision.reason is ReasonCode.NEITHER_CREDIBLE
    assert v.trace[-1].name == "safety-gate"


@pytest.fixture(scope="module")
def generated():
    cfg = GeneratorConfig(default_vocabulary(), default_kb())
    samples = generate_synthetic(cfg, 42)
    split = split_by_label(samples)
    calib = calibrate_from_samples(split.calibration, cfg.kb, cfg.vocab)
    return cfg, split, calib


def test_noiseless_evaluation(generated):
    cfg, split, calib = generated
    tally, records = evaluate(split.test, cfg.kb, cfg.vocab, calib)
    assert tally.as_tuple() == (60, 0, 0, 60)
    assert all(r.outcome is Outcome.DISAMBIGUATED for r in records)


def test_tool_removal_leaves_disambiguated_bucket(generated):
    cfg, split, calib = generated
    corrupted = corrupt_tool_removal(split.test, range(10, 20))
    tally, records = evaluate(corrupted, cfg.kb, cfg.vocab, calib)
    assert tally.disambiguated == 50
    assert {r.index for r in records if r.outcome is not Outcome.DISAMBIGUATED} == set(range(10, 20))


def test_empty_evaluation(small_vocab, two_fact_kb):
    tally, records = evaluate([], two_fact_kb, small_vocab, SEPARATED)
    assert tally.as_tuple() == (0, 0, 0, 0) and records == []


def test_missing_gold_rejected(generated):
    cfg, split, calib = generated
    truly = [s for s in split.calibration if s.label is AmbiguityLabel.TRULY_AMBIGUOUS][:1]
    with pytest.raises(ValueError):
        evaluate(truly, cfg.kb, cfg.vocab, calib)


def test_evaluate_permutation_equivariant(generated):
    cfg, split, calib = generated
    test = corrupt_tool_removal(split.test, range(0, 60, 7))
    order = list(range(len(test)))
    random.Random(3).shuffle(order)
    tally, records = evaluate(test, cfg.kb, cfg.vocab, calib)
    tally2, records2 = evaluate([test[i] for i in order], cfg.kb, cfg.vocab, calib)
    assert tally == tally2
    for new_pos, old_pos in enumerate(order):
        assert records2[new_pos].verdict == records[old_pos].verdict
        assert records2[new_pos].outcome == records[old_pos].outcome


def test_tally_table_rows():
    text = format_tally(OutcomeTally(35, 9, 16))
    lines = text.splitlines()
    assert lines[1].startswith("Successfully Disambiguated") and lines[1].endswith("58.3%")
    assert lines[2].startswith("Failed Disambiguation (Still Ambiguous)") and lines[2].endswith("15.0%")
    assert lines[3].startswith("Flagged as Uncertain") and lines[3].endswith("26.7%")
    assert sum(OutcomeTally(35, 9, 16).percentages().values()) == pytest.approx(100.0)


def test_export_pvalues(generated, tmp_path):
    cfg, split, calib = generated
    path = tmp_path / "p.csv"
    text = export_pvalue_distributions(calib, split.calibration, cfg.kb, cfg.vocab, path)
    rows = list(csv.reader(io.StringIO(path.read_text())))
    assert text == path.read_text()
    assert rows[0] == ["label", "p_amb", "p_nonamb"]
    assert len(rows) == 121
    unamb = [r for r in rows[1:] if r[0] == "unambiguous"]
    assert all(float(r[2]) == 1.0 for r in unamb)  # all ties with the all-zero C_NonAmb


def test_export_empty(generated):
    cfg, _, calib = generated
    assert export_pvalue_distributions(calib, [], cfg.kb, cfg.vocab) == "label,p_amb,p_nonamb\n"


V = default_vocabulary()
KB = default_kb()


@st.composite
def random_requests(draw):
    tools = draw(st.lists(st.sampled_from(sorted(V.tool_labels)), max_size=3))
    objs = draw(st.lists(st.sampled_from(sorted(V.object_labels)), max_size=3))
    parts = [(t, Kind.TOOL) for t in tools] + [(o, Kind.ANATOMY) for o in objs]
    parts = draw(st.permutations(parts))
    scene = SceneDescription("h", tuple(Entity(f"e{i}", lab, k) for i, (lab, k) in enumerate(parts)))
    verb = draw(st.sampled_from(sorted(V.verbs)))
    tool = draw(st.none() | st.sampled_from(sorted(V.tool_labels)))
    target = draw(st.none() | st.sampled_from(sorted(V.object_labels)))
    return scene, phrase(InstructionTriple(tool, verb, target))


@settings(max_examples=300)
@given(random_requests(), st.sampled_from([0.05, 0.1, 0.2]))
def test_executable_always_carries_valid_command(req, alpha):
    scene, text = req
    v = run_pipeline(scene, text, KB, V, SEPARATED, alpha)
    if v.decision.verdict is Verdict.EXECUTABLE:
        assert v.resolved is not None
        assert KB.can_perform(*v.resolved)
        assert v.resolved.tool in scene.labels() and v.resolved.target in scene.labels()
