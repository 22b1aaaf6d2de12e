"""Dual-set conformal prediction over ambiguity flags.

Each sample's ambiguity evidence is the weighted share of raised flags,
``e(x) in [0, 1]``. Hypothesising the non-ambiguous class, ``e(x)`` itself
is the nonconformity; hypothesising the ambiguous class, ``1 - e(x)`` is.

Calibration keeps one score list per class. A test sample gets one p-value
per class,

    p_y = (#{i in C_y : score_i >= score_test} + 1) / (|C_y| + 1)

and the pair is mapped to a verdict at significance level ``alpha``.

Scores are computed in exact rational arithmetic and then rounded once to
float, so identical flag patterns always produce bit-identical scores and
ties are counted exactly. P-values are returned as :class:`fractions.Fraction`.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from numbers import Real
from typing import Iterable, Sequence

from .reasoning import AmbiguityFlags

DEFAULT_ALPHA = 0.1


class ConformalClass(str, enum.Enum):
    AMBIGUOUS = "ambiguous"
    NON_AMBIGUOUS = "non_ambiguous"


class Verdict(str, enum.Enum):
    EXECUTABLE = "Executable"
    AMBIGUOUS = "Ambiguous"
    UNCERTAIN = "Uncertain"


class ReasonCode(str, enum.Enum):
    RULE_EXECUTABLE = "rule-executable"
    RULE_AMBIGUOUS = "rule-ambiguous"
    BOTH_CREDIBLE = "both-credible"
    NEITHER_CREDIBLE = "neither-credible"


class CalibrationError(ValueError):
    pass


class MissingClassError(CalibrationError):
    """Calibration data has no samples for one of the two classes."""


@dataclass(frozen=True)
class FlagWeights:
    tool: float = 1.0
    action: float = 1.0
    target: float = 1.0

    def __post_init__(self) -> None:
        values = (self.tool, self.action, self.target)
        if any(not math.isfinite(w) or w < 0 for w in values):
            raise ValueError(f"flag weights must be finite and non-negative, got {values}")
        if sum(values) <= 0:
            raise ValueError("flag weights must not all be zero")

    @classmethod
    def parse(cls, text: str) -> FlagWeights:
        """Parse ``"w_tool,w_action,w_target"``."""
        parts = [p.strip() for p in text.split(",")]
        if len(parts) != 3:
            raise ValueError(f"expected three comma-separated weights, got {text!r}")
        return cls(*(float(p) for p in parts))

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.tool, self.action, self.target)

    def to_dict(self) -> dict:
        return {"tool": self.tool, "action": self.action, "target": self.target}


def check_alpha(alpha: Real) -> Real:
    if not 0 < alpha < 1:
        raise ValueError(f"significance level must lie in (0, 1), got {alpha}")
    return alpha


@lru_cache(maxsize=1024)
def _evidence_exact(flags: AmbiguityFlags, weights: FlagWeights) -> Fraction:
    ws = [Fraction(w) for w in weights.as_tuple()]
    num = sum((w * int(s) for w, s in zip(ws, flags)), Fraction(0))
    return num / sum(ws)


def ambiguity_evidence(flags: AmbiguityFlags, weights: FlagWeights = FlagWeights()) -> float:
    return float(_evidence_exact(flags, weights))


def nonconformity(
    flags: AmbiguityFlags, hypothesis: ConformalClass, weights: FlagWeights = FlagWeights()
) -> float:
    e = _evidence_exact(flags, weights)
    if hypothesis is ConformalClass.NON_AMBIGUOUS:
        return float(e)
    return float(1 - e)


@dataclass(frozen=True)
class CalibrationSet:
    amb_scores: tuple[float, ...]
    nonamb_scores: tuple[float, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "amb_scores", tuple(float(s) for s in self.amb_scores))
        object.__setattr__(self, "nonamb_scores", tuple(float(s) for s in self.nonamb_scores))
        for s in self.amb_scores + self.nonamb_scores:
            if not 0.0 <= s <= 1.0:
                raise CalibrationError(f"nonconformity score {s} outside [0, 1]")

    def scores_for(self, cls: ConformalClass) -> tuple[float, ...]:
        return self.amb_scores if cls is ConformalClass.AMBIGUOUS else self.nonamb_scores

    def require_both(self) -> None:
        for cls in ConformalClass:
            if not self.scores_for(cls):
                raise MissingClassError(f"calibration has no {cls.value} samples")


def calibrate(
    samples: Iterable[tuple[AmbiguityFlags, ConformalClass]],
    weights: FlagWeights = FlagWeights(),
) -> CalibrationSet:
    amb: list[float] = []
    nonamb: list[float] = []
    for flags, cls in samples:
        score = nonconformity(flags, cls, weights)
        (amb if cls is ConformalClass.AMBIGUOUS else nonamb).append(score)
    calib = CalibrationSet(tuple(amb), tuple(nonamb))
    calib.require_both()
    return calib


@dataclass(frozen=True)
class PValuePair:
    p_amb: Fraction
    p_nonamb: Fraction

    def as_floats(self) -> dict[str, float]:
        return {"p_amb": float(self.p_amb), "p_nonamb": float(self.p_nonamb)}


def conformal_p_value(scores: Sequence[float], test_score: float) -> Fraction:
    """Smoothed rank of ``test_score``; ties count as at-least-as-extreme."""
    if not scores:
        raise MissingClassError("cannot compute a p-value against an empty calibration class")
    at_least = sum(1 for s in scores if s >= test_score)
    return Fraction(at_least + 1, len(scores) + 1)


def p_values(
    calib: CalibrationSet, flags: AmbiguityFlags, weights: FlagWeights = FlagWeights()
) -> PValuePair:
    calib.require_both()
    return PValuePair(
        conformal_p_value(calib.amb_scores, nonconformity(flags, ConformalClass.AMBIGUOUS, weights)),
        conformal_p_value(
            calib.nonamb_scores, nonconformity(flags, ConformalClass.NON_AMBIGUOUS, weights)
        ),
    )


@dataclass(frozen=True)
class Decision:
    verdict: Verdict
    reason: ReasonCode


def decide(p: PValuePair, alpha: Real = DEFAULT_ALPHA) -> Decision:
    check_alpha(alpha)
    amb_credible = p.p_amb > alpha
    nonamb_credible = p.p_nonamb > alpha
    if nonamb_credible and not amb_credible:
        return Decision(Verdict.EXECUTABLE, ReasonCode.RULE_EXECUTABLE)
    if amb_credible and not nonamb_credible:
        return Decision(Verdict.AMBIGUOUS, ReasonCode.RULE_AMBIGUOUS)
    if amb_credible:
        return Decision(Verdict.UNCERTAIN, ReasonCode.BOTH_CREDIBLE)
    return Decision(Verdict.UNCERTAIN, ReasonCode.NEITHER_CREDIBLE)


# --- calibration artifact -------------------------------------------------


@dataclass(frozen=True)
class CalibrationArtifact:
    weights: FlagWeights
    alpha: float
    calibration: CalibrationSet
    created_from: str
    flag_source: str = "pipeline"


def _num(x: float) -> str:
    return format(float(x), ".17g")


def _scores(xs: Sequence[float]) -> str:
    return "[" + ", ".join(_num(x) for x in xs) + "]"


def serialize_calibration(art: CalibrationArtifact) -> bytes:
    w = art.weights
    lines = [
        "{",
        f'  "weights": {{"tool": {_num(w.tool)}, "action": {_num(w.action)}, '
        f'"target": {_num(w.target)}}},',
        f'  "alpha": {_num(art.alpha)},',
        f'  "amb_scores": {_scores(art.calibration.amb_scores)},',
        f'  "nonamb_scores": {_scores(art.calibration.nonamb_scores)},',
        f'  "created_from": {json.dumps(art.created_from)},',
        f'  "flag_source": {json.dumps(art.flag_source)}',
        "}",
    ]
    return ("\n".join(lines) + "\n").encode("utf-8")


def load_calibration(document: bytes | str) -> CalibrationArtifact:
    try:
        obj = json.loads(document)
        w = obj["weights"]
        art = CalibrationArtifact(
            weights=FlagWeights(float(w["tool"]), float(w["action"]), float(w["target"])),
            alpha=float(check_alpha(float(obj["alpha"]))),
            calibration=CalibrationSet(
                tuple(float(s) for s in obj["amb_scores"]),
                tuple(float(s) for s in obj["nonamb_scores"]),
            ),
            created_from=str(obj["created_from"]),
            flag_source=str(obj.get("flag_source", "pipeline")),
        )
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise CalibrationError(f"malformed calibration artifact: {exc}") from None
    return art
