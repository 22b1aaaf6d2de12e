"""Affordance knowledge base of ``CanPerform(tool, action, object)`` facts.

Closed world: a fact that is not listed is false. There is no type
hierarchy, facts are flat triples compared by exact token.
"""

from __future__ import annotations

import json
from typing import Iterable, NamedTuple


class KBFormatError(ValueError):
    pass


class AffordanceFact(NamedTuple):
    tool: str
    action: str
    object: str


class AffordanceKB:
    """Immutable fact set with a stable iteration order (file order, first occurrence wins)."""

    __slots__ = ("_facts", "_index")

    def __init__(self, facts: Iterable[AffordanceFact | tuple[str, str, str]] = ()):
        ordered: dict[AffordanceFact, None] = {}
        for raw in facts:
            fact = AffordanceFact(*raw)
            if not all(isinstance(tok, str) and tok for tok in fact):
                raise KBFormatError(f"fact {tuple(raw)!r} has an empty token")
            ordered.setdefault(fact, None)
        self._facts: tuple[AffordanceFact, ...] = tuple(ordered)
        self._index = frozenset(self._facts)

    def __iter__(self):
        return iter(self._facts)

    def __len__(self) -> int:
        return len(self._facts)

    def __contains__(self, fact: object) -> bool:
        return fact in self._index

    def __eq__(self, other: object) -> bool:
        return isinstance(other, AffordanceKB) and self._facts == other._facts

    def __repr__(self) -> str:
        return f"AffordanceKB({list(self._facts)!r})"

    @property
    def facts(self) -> frozenset[AffordanceFact]:
        return self._index

    @property
    def source_order(self) -> tuple[AffordanceFact, ...]:
        return self._facts

    def can_perform(self, tool: str, action: str, obj: str) -> bool:
        return AffordanceFact(tool, action, obj) in self._index

    def matching_facts(
        self, tool: str | None, action: str, target: str | None
    ) -> list[AffordanceFact]:
        """Facts for ``action`` consistent with whichever slots are specified."""
        return [
            f
            for f in self._facts
            if f.action == action
            and (tool is None or f.tool == tool)
            and (target is None or f.object == target)
        ]

    def tools_for(self, action: str, obj: str) -> list[str]:
        return _distinct(f.tool for f in self.matching_facts(None, action, obj))

    def targets_for(self, tool: str, action: str) -> list[str]:
        return _distinct(f.object for f in self.matching_facts(tool, action, None))

    def actions(self) -> list[str]:
        return _distinct(f.action for f in self._facts)


def _distinct(tokens: Iterable[str]) -> list[str]:
    return list(dict.fromkeys(tokens))


def kb_from_list(obj: object) -> AffordanceKB:
    if not isinstance(obj, list):
        raise KBFormatError("KB document must be a JSON array")
    facts = []
    for i, item in enumerate(obj):
        if not isinstance(item, dict) or set(item) != {"tool", "action", "object"}:
            raise KBFormatError(f"fact #{i} must have exactly the keys tool, action, object")
        if not all(isinstance(item[k], str) for k in ("tool", "action", "object")):
            raise KBFormatError(f"fact #{i}: tokens must be strings")
        facts.append(AffordanceFact(item["tool"], item["action"], item["object"]))
    return AffordanceKB(facts)


def load_kb(document: bytes | str) -> AffordanceKB:
    try:
        obj = json.loads(document)
    except json.JSONDecodeError as exc:
        raise KBFormatError(f"KB is not valid JSON: {exc}") from None
    return kb_from_list(obj)


def kb_to_list(kb: AffordanceKB) -> list[dict]:
    return [{"tool": f.tool, "action": f.action, "object": f.object} for f in kb]


def serialize_kb(kb: AffordanceKB) -> bytes:
    return (json.dumps(kb_to_list(kb), ensure_ascii=False, indent=2) + "\n").encode("utf-8")
