"""Verbal request parsing into (tool, action, target) slot triples.

Only five phrasings are recognised::

    <verb>
    <verb> the <object>
    <verb> with the <tool>
    <verb> the <object> with the <tool>
    use the <tool> to <verb> the <object>

A slot the speaker left out is ``None`` (unspecified). Matching is
case-insensitive, ignores "please" and trailing punctuation, and maps
aliases to canonical tokens before anything else.
"""

from __future__ import annotations

import enum
import json
import re
from dataclasses import dataclass, field
from typing import NamedTuple


class AmbiguityLabel(str, enum.Enum):
    UNAMBIGUOUS = "unambiguous"
    DEAMBIGUABLE = "deambiguable"
    TRULY_AMBIGUOUS = "truly_ambiguous"


class InstructionParseError(ValueError):
    """Raised when a request cannot be turned into a triple.

    ``code`` is one of ``empty``, ``no-pattern``, ``unknown-verb``,
    ``unknown-tool``, ``unknown-object``; ``text`` is the original request.
    """

    def __init__(self, code: str, message: str, text: str):
        super().__init__(f"{message} (request: {text!r})")
        self.code = code
        self.text = text


class VocabularyError(ValueError):
    pass


class InstructionTriple(NamedTuple):
    tool: str | None
    action: str
    target: str | None

    @property
    def is_fully_specified(self) -> bool:
        return self.tool is not None and self.target is not None


@dataclass(frozen=True)
class Vocabulary:
    verbs: frozenset[str]
    tool_labels: frozenset[str]
    object_labels: frozenset[str]
    aliases: dict[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        for name in ("verbs", "tool_labels", "object_labels"):
            tokens = frozenset(getattr(self, name))
            if any(not t or t != t.lower() or " " in t for t in tokens):
                raise VocabularyError(f"{name}: tokens must be non-empty lowercase single words")
            object.__setattr__(self, name, tokens)
        overlap = (
            (self.verbs & self.tool_labels)
            | (self.verbs & self.object_labels)
            | (self.tool_labels & self.object_labels)
        )
        if overlap:
            raise VocabularyError(f"vocabulary sets overlap on {sorted(overlap)}")
        known = self.verbs | self.tool_labels | self.object_labels
        for alias, canonical in self.aliases.items():
            if canonical not in known:
                raise VocabularyError(f"alias {alias!r} maps to unknown token {canonical!r}")
            if alias in known:
                raise VocabularyError(f"alias {alias!r} shadows a canonical token")

    @classmethod
    def from_dict(cls, obj: dict) -> Vocabulary:
        try:
            return cls(
                frozenset(obj["verbs"]),
                frozenset(obj["tool_labels"]),
                frozenset(obj["object_labels"]),
                {k.lower(): v for k, v in obj.get("aliases", {}).items()},
            )
        except (KeyError, TypeError, AttributeError) as exc:
            raise VocabularyError(f"malformed vocabulary: {exc}") from None

    def to_dict(self) -> dict:
        return {
            "verbs": sorted(self.verbs),
            "tool_labels": sorted(self.tool_labels),
            "object_labels": sorted(self.object_labels),
            "aliases": dict(sorted(self.aliases.items())),
        }

    def canonical(self, token: str) -> str:
        return self.aliases.get(token, token)


def load_vocabulary(document: bytes | str) -> Vocabulary:
    try:
        obj = json.loads(document)
    except json.JSONDecodeError as exc:
        raise VocabularyError(f"vocabulary is not valid JSON: {exc}") from None
    if not isinstance(obj, dict):
        raise VocabularyError("vocabulary document must be a JSON object")
    return Vocabulary.from_dict(obj)


_FILLER = {"please"}
_PUNCT = re.compile(r"[.,!?;:]+")

V, O, T = "<verb>", "<object>", "<tool>"

# token-shape patterns; literals must match exactly, placeholders bind one token
PATTERNS: tuple[tuple[str, ...], ...] = (
    (V,),
    (V, "the", O),
    (V, "with", "the", T),
    (V, "the", O, "with", "the", T),
    ("use", "the", T, "to", V, "the", O),
)


def _tokenize(text: str, vocab: Vocabulary) -> list[str]:
    words = _PUNCT.sub(" ", text.lower()).split()
    return [vocab.canonical(w) for w in words if w not in _FILLER]


def _bind(pattern: tuple[str, ...], tokens: list[str]) -> dict[str, str] | None:
    if len(pattern) != len(tokens):
        return None
    slots: dict[str, str] = {}
    for want, got in zip(pattern, tokens):
        if want.startswith("<"):
            slots[want] = got
        elif want != got:
            return None
    return slots


def parse_instruction(text: str, vocab: Vocabulary) -> InstructionTriple:
    if not text or not text.strip():
        raise InstructionParseError("empty", "empty request", text)
    tokens = _tokenize(text, vocab)
    if not tokens:
        raise InstructionParseError("empty", "request has no content words", text)
    # the "use the ... to ..." form goes first so that "use" is never read as a verb there
    for pattern in sorted(PATTERNS, key=lambda p: p[0] != "use"):
        slots = _bind(pattern, tokens)
        if slots is None:
            continue
        verb, tool, target = slots[V], slots.get(T), slots.get(O)
        if verb not in vocab.verbs:
            raise InstructionParseError("unknown-verb", f"unknown verb {verb!r}", text)
        if tool is not None and tool not in vocab.tool_labels:
            raise InstructionParseError("unknown-tool", f"unknown tool {tool!r}", text)
        if target is not None and target not in vocab.object_labels:
            raise InstructionParseError("unknown-object", f"unknown object {target!r}", text)
        return InstructionTriple(tool, verb, target)
    raise InstructionParseError("no-pattern", "request matches no supported phrasing", text)


def phrase(triple: InstructionTriple, *, style: int = 0) -> str:
    """Render a triple back into a supported phrasing.

    Fully specified triples have two phrasings; ``style`` picks between
    them (0: "<verb> the <object> with the <tool>", 1: "use the ...").
    """
    tool, verb, target = triple
    if tool is None and target is None:
        return verb
    if tool is None:
        return f"{verb} the {target}"
    if target is None:
        return f"{verb} with the {tool}"
    if style == 1:
        return f"use the {tool} to {verb} the {target}"
    return f"{verb} the {target} with the {tool}"
