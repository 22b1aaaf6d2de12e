"""Rule-based reasoning expert.

Validates a parsed request against the scene and the affordance KB in a
fixed sequence of checks and reports three binary ambiguity flags:

1. affordance-check: the facts consistent with the specified slots (the
   type-level set). None at all means the action is invalid as asked.
2. tool-presence-check: which present tools appear in that set. None
   present (while the set is non-empty) means the tool is missing.
3. target-resolution: a specified target must be present; an unspecified
   one must resolve to exactly one present object. Several candidate
   targets are never guessed.
4. tie-break (optional): several capable tools for the resolved target are
   resolved by scene order, and the choice is recorded.

Every step is recorded so the outcome can be audited line by line.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Protocol

from .instruction import InstructionTriple
from .kb import AffordanceFact, AffordanceKB
from .scene import SceneDescription, present_objects, present_tools

STEP_NAMES = ("affordance-check", "tool-presence-check", "target-resolution", "tie-break")


class AmbiguityFlags(NamedTuple):
    tool_missing: int = 0
    action_invalid: int = 0
    target_unclear: int = 0

    @property
    def any(self) -> bool:
        return any(self)

    @classmethod
    def from_bools(cls, tool_missing: bool, action_invalid: bool, target_unclear: bool):
        return cls(int(tool_missing), int(action_invalid), int(target_unclear))


class Command(NamedTuple):
    tool: str
    action: str
    target: str


@dataclass(frozen=True)
class ReasoningStep:
    name: str
    detail: str
    outcome: str

    def render(self) -> str:
        return f"[{self.name}] {self.detail} => {self.outcome}"


@dataclass(frozen=True)
class DisambiguationResult:
    flags: AmbiguityFlags
    trace: tuple[ReasoningStep, ...]
    resolved: Command | None = None
    candidates: tuple[tuple[str, str], ...] = field(default_factory=tuple)

    def render_trace(self) -> str:
        return render_trace(self.trace)


def render_trace(steps) -> str:
    return "".join(step.render() + "\n" for step in steps)


class ReasoningExpert(Protocol):
    """Anything that maps (scene, request triple, KB) to a disambiguation result.

    Implementations must be deterministic for identical inputs.
    """

    def reason(
        self, scene: SceneDescription, triple: InstructionTriple, kb: AffordanceKB
    ) -> DisambiguationResult: ...


def _fmt_slot(value: str | None) -> str:
    return "?" if value is None else value


def _fmt_facts(facts: list[AffordanceFact]) -> str:
    return "[" + ", ".join(f"({f.tool},{f.action},{f.object})" for f in facts) + "]"


def _fmt_list(tokens) -> str:
    return "[" + ", ".join(tokens) + "]"


def reason(
    scene: SceneDescription, triple: InstructionTriple, kb: AffordanceKB
) -> DisambiguationResult:
    steps: list[ReasoningStep] = []
    tools_present = list(dict.fromkeys(present_tools(scene)))
    objects_present = list(dict.fromkeys(present_objects(scene)))

    type_level = kb.matching_facts(triple.tool, triple.action, triple.target)
    action_invalid = not type_level
    steps.append(
        ReasoningStep(
            "affordance-check",
            f"CanPerform({_fmt_slot(triple.tool)}, {triple.action}, "
            f"{_fmt_slot(triple.target)}) matches {_fmt_facts(type_level)}",
            "action_invalid" if action_invalid else "valid",
        )
    )

    kb_tools = {f.tool for f in type_level}
    tools_ok = [t for t in tools_present if t in kb_tools]
    tool_missing = bool(type_level) and not tools_ok
    steps.append(
        ReasoningStep(
            "tool-presence-check",
            f"present tools {_fmt_list(tools_present)}; capable {_fmt_list(tools_ok)}",
            "tool_missing" if tool_missing else ("ok" if tools_ok else "no-capable-tool"),
        )
    )

    if triple.target is not None:
        target_unclear = triple.target not in objects_present
        target = None if target_unclear else triple.target
        steps.append(
            ReasoningStep(
                "target-resolution",
                f"specified target {triple.target} "
                + ("absent from scene" if target_unclear else "present in scene"),
                "target_unclear" if target_unclear else f"target {triple.target}",
            )
        )
    else:
        # with no capable tool present, judge the target against any KB tool
        allowed_tools = set(tools_ok) if tools_ok else kb_tools
        reachable = {f.object for f in type_level if f.tool in allowed_tools}
        targets_ok = [o for o in objects_present if o in reachable]
        target_unclear = len(targets_ok) != 1
        target = None if target_unclear else targets_ok[0]
        if not targets_ok:
            why = "no compatible target present"
        elif len(targets_ok) > 1:
            why = f"multiple compatible targets {_fmt_list(targets_ok)}"
        else:
            why = f"unique compatible target {_fmt_list(targets_ok)}"
        steps.append(
            ReasoningStep(
                "target-resolution",
                why,
                "target_unclear" if target_unclear else f"target {target}",
            )
        )

    flags = AmbiguityFlags.from_bools(tool_missing, action_invalid, target_unclear)

    pairs = {(f.tool, f.object) for f in type_level}
    candidates = tuple(
        (t, o) for t in tools_ok for o in objects_present if (t, o) in pairs
    )

    resolved = None
    if not flags.any:
        capable = [t for t in tools_ok if (t, target) in pairs]
        if len(capable) > 1:
            steps.append(
                ReasoningStep(
                    "tie-break",
                    f"capable tools for {target} {_fmt_list(capable)}; first in scene order",
                    f"tool {capable[0]}",
                )
            )
        resolved = Command(capable[0], triple.action, target)

    return DisambiguationResult(flags, tuple(steps), resolved, candidates)


class RuleBasedExpert:
    """The shipped, deterministic :class:`ReasoningExpert`."""

    def reason(
        self, scene: SceneDescription, triple: InstructionTriple, kb: AffordanceKB
    ) -> DisambiguationResult:
        return reason(scene, triple, kb)
