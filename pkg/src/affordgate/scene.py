"""Structured scene descriptions: the entities visible in the operating field.

A scene is the already-grounded output of a vision stage. Entities are
tools or anatomy, each carrying an open vocabulary of state predicates
(``{"holding": "e3"}``, ``{"bleeding": true}``). Entity order is kept
exactly as read, since every downstream tie-break follows it.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from typing import Iterable, Union

StateValue = Union[str, bool]

_SCENE_KEYS = {"scene_id", "entities"}
_ENTITY_KEYS = {"id", "label", "kind", "states"}

# state predicate -> the only kind allowed to carry it
_KIND_RESTRICTED_STATES = {"holding": "tool", "held_by": "anatomy"}


class Kind(str, enum.Enum):
    TOOL = "tool"
    ANATOMY = "anatomy"


class SceneError(ValueError):
    """Base class for scene parse and query failures."""


class MalformedSceneError(SceneError):
    pass


class DuplicateEntityIdError(SceneError):
    pass


class DanglingReferenceError(SceneError):
    pass


class KindRestrictionError(SceneError):
    """A kind-restricted state (``holding``/``held_by``) on the wrong kind."""


class UnknownEntityError(SceneError, KeyError):
    pass


@dataclass(frozen=True)
class Entity:
    id: str
    label: str
    kind: Kind
    states: dict[str, StateValue] = field(default_factory=dict)

    @property
    def is_tool(self) -> bool:
        return self.kind is Kind.TOOL


@dataclass(frozen=True)
class SceneDescription:
    scene_id: str
    entities: tuple[Entity, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "entities", tuple(self.entities))
        _validate(self)

    def entity(self, entity_id: str) -> Entity:
        for ent in self.entities:
            if ent.id == entity_id:
                return ent
        raise UnknownEntityError(f"unknown entity id {entity_id!r}")

    def labels(self) -> list[str]:
        return [ent.label for ent in self.entities]


def _validate(scene: SceneDescription) -> None:
    seen: set[str] = set()
    for ent in scene.entities:
        if ent.id in seen:
            raise DuplicateEntityIdError(f"duplicate entity id {ent.id!r}")
        seen.add(ent.id)
    for ent in scene.entities:
        for pred, value in ent.states.items():
            required = _KIND_RESTRICTED_STATES.get(pred)
            if required is not None and ent.kind.value != required:
                raise KindRestrictionError(
                    f"{pred!r} on {ent.kind.value} entity {ent.id!r} "
                    f"(only allowed on {required})"
                )
            if isinstance(value, str) and value not in seen:
                raise DanglingReferenceError(
                    f"entity {ent.id!r} state {pred!r} refers to unknown id {value!r}"
                )


def _entity_from_obj(obj: object, index: int) -> Entity:
    if not isinstance(obj, dict):
        raise MalformedSceneError(f"entity #{index} is not an object")
    extra = set(obj) - _ENTITY_KEYS
    if extra:
        raise MalformedSceneError(f"entity #{index}: unknown keys {sorted(extra)}")
    for key in ("id", "label", "kind"):
        if not isinstance(obj.get(key), str) or not obj[key]:
            raise MalformedSceneError(f"entity #{index}: {key!r} must be a non-empty string")
    try:
        kind = Kind(obj["kind"])
    except ValueError:
        raise MalformedSceneError(
            f"entity #{index}: kind must be 'tool' or 'anatomy', got {obj['kind']!r}"
        ) from None
    states = obj.get("states", {})
    if not isinstance(states, dict):
        raise MalformedSceneError(f"entity #{index}: states must be an object")
    for pred, value in states.items():
        if not isinstance(value, (str, bool)):
            raise MalformedSceneError(
                f"entity #{index}: state {pred!r} must be a string or boolean"
            )
    return Entity(obj["id"], obj["label"], kind, dict(states))


def scene_from_dict(obj: object) -> SceneDescription:
    if not isinstance(obj, dict):
        raise MalformedSceneError("scene document must be a JSON object")
    extra = set(obj) - _SCENE_KEYS
    if extra:
        raise MalformedSceneError(f"unknown top-level keys {sorted(extra)}")
    if not isinstance(obj.get("scene_id"), str):
        raise MalformedSceneError("'scene_id' must be a string")
    raw_entities = obj.get("entities")
    if not isinstance(raw_entities, list):
        raise MalformedSceneError("'entities' must be a list")
    entities = [_entity_from_obj(e, i) for i, e in enumerate(raw_entities)]
    return SceneDescription(obj["scene_id"], tuple(entities))


def scene_to_dict(scene: SceneDescription) -> dict:
    return {
        "scene_id": scene.scene_id,
        "entities": [
            {"id": e.id, "label": e.label, "kind": e.kind.value, "states": dict(e.states)}
            for e in scene.entities
        ],
    }


def parse_scene(document: bytes | str) -> SceneDescription:
    """Parse a UTF-8 scene document, enforcing every entity invariant."""
    if isinstance(document, bytes):
        try:
            document = document.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise MalformedSceneError(f"scene is not valid UTF-8: {exc}") from None
    try:
        obj = json.loads(document)
    except json.JSONDecodeError as exc:
        raise MalformedSceneError(f"scene is not valid JSON: {exc}") from None
    return scene_from_dict(obj)


def serialize_scene(scene: SceneDescription) -> bytes:
    return (json.dumps(scene_to_dict(scene), ensure_ascii=False, indent=2) + "\n").encode("utf-8")


def present_tools(scene: SceneDescription) -> list[str]:
    return [e.label for e in scene.entities if e.kind is Kind.TOOL]


def present_objects(scene: SceneDescription) -> list[str]:
    return [e.label for e in scene.entities if e.kind is Kind.ANATOMY]


def entity_state(scene: SceneDescription, entity_id: str, predicate: str) -> StateValue | None:
    """Value of ``predicate`` on entity ``entity_id``, or None when unset."""
    return scene.entity(entity_id).states.get(predicate)


def without_labels(scene: SceneDescription, labels: Iterable[str]) -> SceneDescription:
    """Copy of ``scene`` with every entity carrying one of ``labels`` removed.

    State references to removed entities are dropped so the result still
    satisfies the reference invariant.
    """
    drop = set(labels)
    kept = [e for e in scene.entities if e.label not in drop]
    kept_ids = {e.id for e in kept}
    cleaned = [
        Entity(
            e.id,
            e.label,
            e.kind,
            {k: v for k, v in e.states.items() if not (isinstance(v, str) and v not in kept_ids)},
        )
        for e in kept
    ]
    return SceneDescription(scene.scene_id, tuple(cleaned))
