from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st
from oracles import evidence_exact, p_value_by_formula

from affordgate.conformal import (
    CalibrationArtifact,
    CalibrationSet,
    ConformalClass,
    FlagWeights,
    MissingClassError,
    PValuePair,
    ReasonCode,
    Verdict,
    ambiguity_evidence,
    calibrate,
    conformal_p_value,
    decide,
    load_calibration,
    nonconformity,
    p_values,
    serialize_calibration,
)
from affordgate.reasoning import AmbiguityFlags

AMB, NON = ConformalClass.AMBIGUOUS, ConformalClass.NON_AMBIGUOUS


def test_evidence_examples():
    assert ambiguity_evidence(AmbiguityFlags(0, 0, 0)) == 0.0
    assert ambiguity_evidence(AmbiguityFlags(1, 1, 1), FlagWeights(5, 0.5, 2)) == 1.0
    assert ambiguity_evidence(AmbiguityFlags(1, 0, 0)) == pytest.approx(1 / 3, abs=1e-15)


def test_nonconformity_examples():
    assert nonconformity(AmbiguityFlags(0, 0, 0), NON) == 0.0
    assert nonconformity(AmbiguityFlags(0, 0, 0), AMB) == 1.0
    assert nonconformity(AmbiguityFlags(1, 0, 0), AMB) == pytest.approx(2 / 3, abs=1e-15)


def test_weights_validated():
    with pytest.raises(ValueError):
        FlagWeights(0, 0, 0)
    with pytest.raises(ValueError):
        FlagWeights(-1, 1, 1)
    assert FlagWeights.parse("1, 2,3") == FlagWeights(1, 2, 3)


def test_calibrate_routes_by_class():
    calib = calibrate([(AmbiguityFlags(0, 0, 0), NON), (AmbiguityFlags(1, 1, 1), AMB)])
    assert calib.nonamb_scores == (0.0,)
    assert calib.amb_scores == (0.0,)


def test_calibrate_sizes():
    samples = [(AmbiguityFlags(0, 0, 0), NON)] * 60 + [(AmbiguityFlags(1, 0, 0), AMB)] * 60
    calib = calibrate(samples)
    assert len(calib.amb_scores) == 60 and len(calib.nonamb_scores) == 60


def test_calibrate_missing_class():
    with pytest.raises(MissingClassError):
        calibrate([(AmbiguityFlags(0, 0, 0), NON)])


def test_p_nonamb_hand_count():
    # scores >= 1/3 among [0, 0, 1/3, 2/3] are {1/3, 2/3}: (2 + 1) / (4 + 1)
    third, two_thirds = nonconformity(AmbiguityFlags(1, 0, 0), NON), nonconformity(
        AmbiguityFlags(1, 1, 0), NON
    )
    calib = CalibrationSet(amb_scores=(0.5,), nonamb_scores=(0.0, 0.0, third, two_thirds))
    p = p_values(calib, AmbiguityFlags(1, 0, 0))
    assert p.p_nonamb == Fraction(3, 5)


def test_p_amb_hand_count():
    # alpha_test(Amb) = 2/3; no score in [0, 0, 1/3] reaches it: (0 + 1) / (3 + 1)
    third = nonconformity(AmbiguityFlags(1, 0, 0), NON)
    calib = CalibrationSet(amb_scores=(0.0, 0.0, third), nonamb_scores=(0.0,))
    assert p_values(calib, AmbiguityFlags(1, 0, 0)).p_amb == Fraction(1, 4)


def test_p_value_floor():
    assert conformal_p_value([0.1, 0.2, 0.3], 0.9) == Fraction(1, 4)
    with pytest.raises(MissingClassError):
        conformal_p_value([], 0.5)


@pytest.mark.parametrize(
    "p_amb, p_nonamb, verdict, reason",
    [
        (0.05, 0.6, Verdict.EXECUTABLE, ReasonCode.RULE_EXECUTABLE),
        (0.6, 0.05, Verdict.AMBIGUOUS, ReasonCode.RULE_AMBIGUOUS),
        (0.5, 0.5, Verdict.UNCERTAIN, ReasonCode.BOTH_CREDIBLE),
        (0.05, 0.05, Verdict.UNCERTAIN, ReasonCode.NEITHER_CREDIBLE),
    ],
)
def test_decision_quadrants(p_amb, p_nonamb, verdict, reason):
    d = decide(PValuePair(Fraction(str(p_amb)), Fraction(str(p_nonamb))), 0.1)
    assert (d.verdict, d.reason) == (verdict, reason)


def test_decide_rejects_bad_alpha():
    with pytest.raises(ValueError):
        decide(PValuePair(Fraction(1), Fraction(1)), 1.0)


def test_boundary_p_equal_alpha_is_not_credible():
    d = decide(PValuePair(Fraction(1, 10), Fraction(1, 2)), Fraction(1, 10))
    assert d.verdict is Verdict.EXECUTABLE


flags_st = st.builds(AmbiguityFlags, st.integers(0, 1), st.integers(0, 1), st.integers(0, 1))
int_weights = st.tuples(st.integers(0, 4), st.integers(0, 4), st.integers(0, 4)).filter(
    lambda w: sum(w) > 0
)
labeled = st.tuples(flags_st, st.sampled_from([AMB, NON]))


@given(st.lists(flags_st, min_size=1, max_size=30), st.lists(flags_st, min_size=1, max_size=30), flags_st, int_weights)
def test_p_values_match_formula(amb_flags, non_flags, test_flags, w):
    weights = FlagWeights(*w)
    calib = calibrate([(f, AMB) for f in amb_flags] + [(f, NON) for f in non_flags], weights)
    p = p_values(calib, test_flags, weights)
    assert p.p_amb == p_value_by_formula(amb_flags, test_flags, w, "ambiguous")
    assert p.p_nonamb == p_value_by_formula(non_flags, test_flags, w, "non_ambiguous")
    assert Fraction(1, len(amb_flags) + 1) <= p.p_amb <= 1
    assert Fraction(1, len(non_flags) + 1) <= p.p_nonamb <= 1


@given(st.lists(st.floats(0, 1), min_size=1, max_size=30), st.floats(0, 1), st.floats(0, 1))
def test_p_value_monotone_in_test_score(scores, a, b):
    lo, hi = sorted((a, b))
    assert conformal_p_value(scores, hi) <= conformal_p_value(scores, lo)


@given(st.lists(labeled, min_size=2, max_size=30), flags_st, int_weights, st.sampled_from([0.5, 2, 3, 10, 0.25]))
def test_weight_scaling_invariance(samples, test_flags, w, c):
    samples = samples + [(AmbiguityFlags(0, 0, 0), AMB), (AmbiguityFlags(1, 1, 1), NON)]
    base, scaled = FlagWeights(*w), FlagWeights(*(c * x for x in w))
    assert ambiguity_evidence(test_flags, base) == ambiguity_evidence(test_flags, scaled)
    p1 = p_values(calibrate(samples, base), test_flags, base)
    p2 = p_values(calibrate(samples, scaled), test_flags, scaled)
    assert p1 == p2
    assert decide(p1) == decide(p2)


@given(flags_st, int_weights)
def test_evidence_matches_exact_formula(flags, w):
    assert ambiguity_evidence(flags, FlagWeights(*w)) == float(evidence_exact(flags, w))


def test_artifact_roundtrip_bytes():
    calib = calibrate(
        [(AmbiguityFlags(0, 0, 0), NON), (AmbiguityFlags(1, 0, 0), AMB), (AmbiguityFlags(0, 1, 1), AMB)],
        FlagWeights(1, 2, 3),
    )
    art = CalibrationArtifact(FlagWeights(1, 2, 3), 0.1, calib, "sha256:abc")
    data = serialize_calibration(art)
    loaded = load_calibration(data)
    assert loaded == art
    assert serialize_calibration(loaded) == data
    assert b"0.83333333333333337" in data  # 5/6 at 17 significant digits
