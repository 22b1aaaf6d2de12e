"""End-to-end request handling and test-set outcome accounting."""

from __future__ import annotations

import csv
import enum
import io
import json
from dataclasses import dataclass
from numbers import Real
from pathlib import Path
from typing import Iterable, Sequence

from .conformal import (
    DEFAULT_ALPHA,
    CalibrationSet,
    ConformalClass,
    Decision,
    FlagWeights,
    PValuePair,
    ReasonCode,
    Verdict,
    calibrate,
    decide,
    p_values,
)
from .dataset import LabeledSample, calibration_class
from .instruction import Vocabulary, parse_instruction
from .kb import AffordanceKB
from .reasoning import (
    AmbiguityFlags,
    Command,
    ReasoningExpert,
    ReasoningStep,
    RuleBasedExpert,
    render_trace,
)
from .scene import SceneDescription

OUTCOME_ROWS = (
    ("disambiguated", "Successfully Disambiguated"),
    ("failed", "Failed Disambiguation (Still Ambiguous)"),
    ("uncertain", "Flagged as Uncertain"),
)


class Outcome(str, enum.Enum):
    DISAMBIGUATED = "disambiguated"
    FAILED = "failed"
    UNCERTAIN = "uncertain"


@dataclass(frozen=True)
class PipelineVerdict:
    decision: Decision
    p: PValuePair
    flags: AmbiguityFlags
    resolved: Command | None
    trace: tuple[ReasoningStep, ...]
    candidates: tuple[tuple[str, str], ...] = ()

    @property
    def executable(self) -> bool:
        return self.decision.verdict is Verdict.EXECUTABLE

    def to_dict(self) -> dict:
        return {
            "decision": {"verdict": self.decision.verdict.value, "reason": self.decision.reason.value},
            "p": self.p.as_floats(),
            "flags": self.flags._asdict(),
            "resolved": None if self.resolved is None else self.resolved._asdict(),
            "trace": [step.render() for step in self.trace],
            "candidates": [list(c) for c in self.candidates],
        }

    def render_trace(self) -> str:
        return render_trace(self.trace)


def run_pipeline(
    scene: SceneDescription,
    request: str,
    kb: AffordanceKB,
    vocab: Vocabulary,
    calib: CalibrationSet,
    alpha: Real = DEFAULT_ALPHA,
    weights: FlagWeights = FlagWeights(),
    expert: ReasoningExpert | None = None,
) -> PipelineVerdict:
    """Parse, reason, score and gate one request.

    Raises :class:`InstructionParseError` (carrying the request text) when
    the request cannot be parsed; no verdict is produced in that case.
    """
    calib.require_both()
    triple = parse_instruction(request, vocab)
    result = (expert or RuleBasedExpert()).reason(scene, triple, kb)
    p = p_values(calib, result.flags, weights)
    decision = decide(p, alpha)
    trace = result.trace
    if decision.verdict is Verdict.EXECUTABLE and result.resolved is None:
        decision = Decision(Verdict.UNCERTAIN, ReasonCode.NEITHER_CREDIBLE)
        trace = trace + (
            ReasoningStep(
                "safety-gate",
                "conformal gate passed but the expert produced no concrete command",
                "forced Uncertain",
            ),
        )
    return PipelineVerdict(decision, p, result.flags, result.resolved, trace, result.candidates)


def calibration_flags(
    samples: Iterable[LabeledSample],
    kb: AffordanceKB,
    vocab: Vocabulary,
    expert: ReasoningExpert | None = None,
) -> list[tuple[AmbiguityFlags, ConformalClass]]:
    """Run the expert over calibration samples, pairing its flags with each sample's class."""
    expert = expert or RuleBasedExpert()
    return [
        (expert.reason(s.scene, parse_instruction(s.request, vocab), kb).flags, calibration_class(s.label))
        for s in samples
    ]


def calibrate_from_samples(
    samples: Iterable[LabeledSample],
    kb: AffordanceKB,
    vocab: Vocabulary,
    weights: FlagWeights = FlagWeights(),
    expert: ReasoningExpert | None = None,
) -> CalibrationSet:
    return calibrate(calibration_flags(samples, kb, vocab, expert), weights)


@dataclass(frozen=True)
class OutcomeTally:
    disambiguated: int = 0
    failed: int = 0
    uncertain: int = 0

    @property
    def total(self) -> int:
        return self.disambiguated + self.failed + self.uncertain

    def as_tuple(self) -> tuple[int, int, int, int]:
        return (self.disambiguated, self.failed, self.uncertain, self.total)

    def percentages(self) -> dict[str, float]:
        n = self.total
        return {key: (100.0 * getattr(self, key) / n if n else 0.0) for key, _ in OUTCOME_ROWS}


@dataclass(frozen=True)
class SampleRecord:
    index: int
    request: str
    gold: Command
    verdict: PipelineVerdict
    outcome: Outcome

    def to_dict(self) -> dict:
        return {
            "index": self.index,
            "request": self.request,
            "gold": self.gold._asdict(),
            "outcome": self.outcome.value,
            **self.verdict.to_dict(),
        }


def classify_outcome(verdict: PipelineVerdict, gold: Command) -> Outcome:
    if verdict.decision.verdict is Verdict.UNCERTAIN:
        return Outcome.UNCERTAIN
    if verdict.executable and verdict.resolved == gold:
        return Outcome.DISAMBIGUATED
    # confidently wrong commands count against the system
    return Outcome.FAILED


def evaluate(
    samples: Sequence[LabeledSample],
    kb: AffordanceKB,
    vocab: Vocabulary,
    calib: CalibrationSet,
    alpha: Real = DEFAULT_ALPHA,
    weights: FlagWeights = FlagWeights(),
    expert: ReasoningExpert | None = None,
) -> tuple[OutcomeTally, list[SampleRecord]]:
    records = []
    counts = {o: 0 for o in Outcome}
    for i, s in enumerate(samples):
        if s.gold is None:
            raise ValueError(f"test sample {i} has no gold command")
        verdict = run_pipeline(s.scene, s.request, kb, vocab, calib, alpha, weights, expert)
        outcome = classify_outcome(verdict, s.gold)
        counts[outcome] += 1
        records.append(SampleRecord(i, s.request, s.gold, verdict, outcome))
    tally = OutcomeTally(
        counts[Outcome.DISAMBIGUATED], counts[Outcome.FAILED], counts[Outcome.UNCERTAIN]
    )
    return tally, records


def format_tally(tally: OutcomeTally) -> str:
    pct = tally.percentages()
    width = max(len(title) for _, title in OUTCOME_ROWS)
    lines = [f"{'Outcome Category':<{width}}  {'Count':>5}  {'Percentage':>10}"]
    for key, title in OUTCOME_ROWS:
        lines.append(f"{title:<{width}}  {getattr(tally, key):>5}  {pct[key]:>9.1f}%")
    total_pct = 100.0 if tally.total else 0.0
    lines.append(f"{'Total':<{width}}  {tally.total:>5}  {total_pct:>9.1f}%")
    return "\n".join(lines) + "\n"


def dump_records(records: Iterable[SampleRecord]) -> bytes:
    return "".join(json.dumps(r.to_dict(), ensure_ascii=False) + "\n" for r in records).encode(
        "utf-8"
    )


def pvalue_rows(
    calib: CalibrationSet,
    samples: Iterable[LabeledSample],
    kb: AffordanceKB,
    vocab: Vocabulary,
    weights: FlagWeights = FlagWeights(),
    expert: ReasoningExpert | None = None,
) -> list[tuple[str, float, float]]:
    expert = expert or RuleBasedExpert()
    calib.require_both()
    rows = []
    for s in samples:
        flags = expert.reason(s.scene, parse_instruction(s.request, vocab), kb).flags
        p = p_values(calib, flags, weights)
        rows.append((s.label.value, float(p.p_amb), float(p.p_nonamb)))
    return rows


def export_pvalue_distributions(
    calib: CalibrationSet,
    samples: Iterable[LabeledSample],
    kb: AffordanceKB,
    vocab: Vocabulary,
    path: str | Path | None = None,
    weights: FlagWeights = FlagWeights(),
    expert: ReasoningExpert | None = None,
) -> str:
    """Write ``label,p_amb,p_nonamb`` CSV rows; returns the CSV text."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["label", "p_amb", "p_nonamb"])
    for label, p_amb, p_nonamb in pvalue_rows(calib, samples, kb, vocab, weights, expert):
        writer.writerow([label, repr(p_amb), repr(p_nonamb)])
    text = buf.getvalue()
    if path is not None:
        Path(path).write_text(text, encoding="utf-8")
    return text

