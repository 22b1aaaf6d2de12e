"""Labeled request/scene datasets: JSON-lines I/O, splitting, synthetic generation.

A dataset file is JSON-lines. The first line is a header::

    {"format_version": 1, "seed": 42, "generator_config_hash": "...", "rng": "..."}

and every following line is one sample::

    {"scene": {...}, "request": "cut", "label": "deambiguable",
     "gold": {"tool": "cutter", "action": "cut", "target": "tissue"}}

The generator draws each sample from its own numpy ``PCG64`` stream seeded
with ``SeedSequence([seed, index])``, so sample ``i`` depends only on
``(config, seed, i)``.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .conformal import ConformalClass
from .instruction import AmbiguityLabel, InstructionTriple, Vocabulary, parse_instruction, phrase
from .kb import AffordanceFact, AffordanceKB, kb_to_list
from .reasoning import Command, DisambiguationResult, reason
from .scene import (
    Entity,
    Kind,
    SceneDescription,
    SceneError,
    present_objects,
    present_tools,
    scene_from_dict,
    scene_to_dict,
    without_labels,
)

FORMAT_VERSION = 1
RNG_ALGORITHM = "numpy.PCG64/SeedSequence([seed, index])"

TOOL_REMOVED = "tool_removed"
AFFORDANCE_BROKEN = "affordance_broken"
MULTIPLE_TARGETS = "multiple_targets"
TRULY_AMBIGUOUS_MODES = (TOOL_REMOVED, AFFORDANCE_BROKEN, MULTIPLE_TARGETS)
DEAMBIGUABLE_MASKS = ("tool", "target", "both")


class DatasetFormatError(ValueError):
    def __init__(self, lineno: int, message: str):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


class GeneratorConfigError(ValueError):
    """The vocabulary/KB cannot realize a requested label."""


@dataclass(frozen=True)
class LabeledSample:
    scene: SceneDescription
    request: str
    label: AmbiguityLabel
    gold: Command | None = None

    def __post_init__(self) -> None:
        needs_gold = self.label is not AmbiguityLabel.TRULY_AMBIGUOUS
        if needs_gold and self.gold is None:
            raise ValueError(f"{self.label.value} sample must carry a gold command")
        if not needs_gold and self.gold is not None:
            raise ValueError("truly_ambiguous sample must not carry a gold command")

    def check_gold_present(self) -> None:
        if self.gold is None:
            return
        if self.gold.tool not in present_tools(self.scene):
            raise ValueError(f"gold tool {self.gold.tool!r} is not in the scene")
        if self.gold.target not in present_objects(self.scene):
            raise ValueError(f"gold target {self.gold.target!r} is not in the scene")


@dataclass(frozen=True)
class DatasetSplit:
    calibration: list[LabeledSample]
    test: list[LabeledSample]


def calibration_class(label: AmbiguityLabel) -> ConformalClass:
    if label is AmbiguityLabel.UNAMBIGUOUS:
        return ConformalClass.NON_AMBIGUOUS
    if label is AmbiguityLabel.TRULY_AMBIGUOUS:
        return ConformalClass.AMBIGUOUS
    raise ValueError("deambiguable samples belong to the test set, not calibration")


def split_by_label(samples: Iterable[LabeledSample]) -> DatasetSplit:
    """Deambiguable samples form the test set; everything else calibrates."""
    calibration, test = [], []
    for s in samples:
        (test if s.label is AmbiguityLabel.DEAMBIGUABLE else calibration).append(s)
    return DatasetSplit(calibration, test)


# --- I/O ---------------------------------------------------------------------


def sample_to_dict(sample: LabeledSample) -> dict:
    gold = sample.gold
    return {
        "scene": scene_to_dict(sample.scene),
        "request": sample.request,
        "label": sample.label.value,
        "gold": None
        if gold is None
        else {"tool": gold.tool, "action": gold.action, "target": gold.target},
    }


def sample_from_dict(obj: object) -> LabeledSample:
    if not isinstance(obj, dict) or set(obj) != {"scene", "request", "label", "gold"}:
        raise ValueError("sample must have exactly the keys scene, request, label, gold")
    if not isinstance(obj["request"], str):
        raise ValueError("request must be a string")
    label = AmbiguityLabel(obj["label"])
    gold = obj["gold"]
    if gold is not None:
        if not isinstance(gold, dict) or set(gold) != {"tool", "action", "target"}:
            raise ValueError("gold must be null or have keys tool, action, target")
        gold = Command(gold["tool"], gold["action"], gold["target"])
    sample = LabeledSample(scene_from_dict(obj["scene"]), obj["request"], label, gold)
    sample.check_gold_present()
    return sample


def make_header(seed: int | None = None, config_hash: str | None = None) -> dict:
    return {
        "format_version": FORMAT_VERSION,
        "seed": seed,
        "generator_config_hash": config_hash,
        "rng": RNG_ALGORITHM,
    }


def dump_dataset(samples: Sequence[LabeledSample], header: dict | None = None) -> bytes:
    lines = [json.dumps(header if header is not None else make_header(), ensure_ascii=False)]
    lines += [json.dumps(sample_to_dict(s), ensure_ascii=False) for s in samples]
    return ("\n".join(lines) + "\n").encode("utf-8")


def parse_dataset(text: bytes | str) -> tuple[dict | None, list[LabeledSample]]:
    if isinstance(text, bytes):
        text = text.decode("utf-8")
    header = None
    samples: list[LabeledSample] = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise DatasetFormatError(lineno, f"invalid JSON: {exc}") from None
        if lineno == 1 and isinstance(obj, dict) and "format_version" in obj:
            if obj["format_version"] != FORMAT_VERSION:
                raise DatasetFormatError(lineno, f"unsupported format_version {obj['format_version']!r}")
            header = obj
            continue
        try:
            samples.append(sample_from_dict(obj))
        except (ValueError, KeyError, TypeError, SceneError) as exc:
            raise DatasetFormatError(lineno, str(exc)) from None
    return header, samples


def read_dataset(path: str | Path) -> tuple[dict | None, list[LabeledSample]]:
    return parse_dataset(Path(path).read_bytes())


def load_dataset(path: str | Path) -> list[LabeledSample]:
    return read_dataset(path)[1]


def save_dataset(
    samples: Sequence[LabeledSample], path: str | Path, header: dict | None = None
) -> None:
    Path(path).write_bytes(dump_dataset(samples, header))


def corrupt_tool_removal(
    samples: Sequence[LabeledSample], indices: Iterable[int]
) -> list[LabeledSample]:
    """Remove the gold tool (every instance of its label) from the chosen samples' scenes.

    The label and gold are kept, so the corrupted samples still claim to be
    resolvable; the evaluation should no longer count them as resolved.
    """
    chosen = set(indices)
    out = []
    for i, s in enumerate(samples):
        if i in chosen:
            if s.gold is None:
                raise ValueError(f"sample {i} has no gold tool to remove")
            s = replace(s, scene=without_labels(s.scene, [s.gold.tool]))
        out.append(s)
    return out


# --- synthetic generation ----------------------------------------------------


@dataclass(frozen=True)
class GeneratorConfig:
    vocab: Vocabulary
    kb: AffordanceKB
    n_unambiguous: int = 60
    n_deambiguable: int = 60
    n_truly_ambiguous: int = 60
    max_extra_tools: int = 2
    max_extra_objects: int = 2
    deambiguable_masks: tuple[str, ...] = DEAMBIGUABLE_MASKS
    truly_ambiguous_modes: tuple[str, ...] = TRULY_AMBIGUOUS_MODES
    state_probability: float = 0.3
    politeness_probability: float = 0.2
    max_attempts: int = 50

    def counts(self) -> dict[AmbiguityLabel, int]:
        return {
            AmbiguityLabel.UNAMBIGUOUS: self.n_unambiguous,
            AmbiguityLabel.DEAMBIGUABLE: self.n_deambiguable,
            AmbiguityLabel.TRULY_AMBIGUOUS: self.n_truly_ambiguous,
        }

    def to_dict(self) -> dict:
        return {
            "vocab": self.vocab.to_dict(),
            "kb": kb_to_list(self.kb),
            "counts": {k.value: v for k, v in self.counts().items()},
            "max_extra_tools": self.max_extra_tools,
            "max_extra_objects": self.max_extra_objects,
            "deambiguable_masks": list(self.deambiguable_masks),
            "truly_ambiguous_modes": list(self.truly_ambiguous_modes),
            "state_probability": self.state_probability,
            "politeness_probability": self.politeness_probability,
            "max_attempts": self.max_attempts,
        }

    def config_hash(self) -> str:
        canonical = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


@dataclass
class _Draw:
    """Everything needed to assemble one sample before verification."""

    tools: list[str]
    objects: list[str]
    triple: InstructionTriple
    gold: Command | None = None


class _Generator:
    def __init__(self, config: GeneratorConfig):
        self.cfg = config
        self.kb = config.kb
        self.facts = list(config.kb)
        self.all_tools = sorted(config.vocab.tool_labels)
        self.all_objects = sorted(config.vocab.object_labels)
        self._check_config()

    # feasibility -------------------------------------------------------------

    def _broken_swaps(self, fact: AffordanceFact) -> list[str]:
        return [t for t in self.all_tools if not self.kb.can_perform(t, fact.action, fact.object)]

    def _multi_target_facts(self) -> list[AffordanceFact]:
        return [f for f in self.facts if len(self.kb.targets_for(f.tool, f.action)) >= 2]

    def _mode_facts(self, mode: str) -> list[AffordanceFact]:
        if mode == TOOL_REMOVED:
            return list(self.facts)
        if mode == AFFORDANCE_BROKEN:
            return [f for f in self.facts if self._broken_swaps(f)]
        return self._multi_target_facts()

    def _check_config(self) -> None:
        cfg = self.cfg
        if min(cfg.n_unambiguous, cfg.n_deambiguable, cfg.n_truly_ambiguous) < 0:
            raise GeneratorConfigError("label counts must be non-negative")
        vocab = cfg.vocab
        for f in self.facts:
            if f.tool not in vocab.tool_labels or f.action not in vocab.verbs or f.object not in vocab.object_labels:
                raise GeneratorConfigError(f"KB fact {tuple(f)} uses tokens outside the vocabulary")
        if (cfg.n_unambiguous or cfg.n_deambiguable or cfg.n_truly_ambiguous) and not self.facts:
            raise GeneratorConfigError("cannot generate samples from an empty KB")
        bad = set(cfg.deambiguable_masks) - set(DEAMBIGUABLE_MASKS)
        bad |= set(cfg.truly_ambiguous_modes) - set(TRULY_AMBIGUOUS_MODES)
        if bad:
            raise GeneratorConfigError(f"unknown masks/modes {sorted(bad)}")
        if cfg.n_deambiguable and not cfg.deambiguable_masks:
            raise GeneratorConfigError("deambiguable samples requested but no masks allowed")
        self.modes = [m for m in cfg.truly_ambiguous_modes if self._mode_facts(m)]
        if cfg.n_truly_ambiguous and not self.modes:
            raise GeneratorConfigError(
                "no truly-ambiguous construction is realizable with this vocabulary/KB "
                f"(allowed modes: {list(cfg.truly_ambiguous_modes)})"
            )

    # helpers -----------------------------------------------------------------

    def _pick(self, rng: np.random.Generator, items: Sequence):
        return items[int(rng.integers(len(items)))]

    def _extras(self, rng, pool: Sequence[str], exclude: Iterable[str], limit: int) -> list[str]:
        pool = [p for p in pool if p not in set(exclude)]
        k = int(rng.integers(min(limit, len(pool)) + 1)) if pool else 0
        if k == 0:
            return []
        idx = rng.choice(len(pool), size=k, replace=False)
        return [pool[int(i)] for i in sorted(idx)]

    def _scene(self, rng, scene_id: str, tools: list[str], objects: list[str]) -> SceneDescription:
        parts = [(t, Kind.TOOL) for t in tools] + [(o, Kind.ANATOMY) for o in objects]
        order = rng.permutation(len(parts))
        ordered = [parts[int(i)] for i in order]
        ids = [f"e{i + 1}" for i in range(len(ordered))]
        states: list[dict] = [{} for _ in ordered]
        tool_idx = [i for i, (_, k) in enumerate(ordered) if k is Kind.TOOL]
        anat_idx = [i for i, (_, k) in enumerate(ordered) if k is Kind.ANATOMY]
        if tool_idx and anat_idx and rng.random() < self.cfg.state_probability:
            ti, ai = self._pick(rng, tool_idx), self._pick(rng, anat_idx)
            states[ti]["holding"] = ids[ai]
            states[ai]["held_by"] = ids[ti]
        entities = tuple(
            Entity(ids[i], label, kind, states[i]) for i, (label, kind) in enumerate(ordered)
        )
        return SceneDescription(scene_id, entities)

    def _request(self, rng, triple: InstructionTriple) -> str:
        text = phrase(triple, style=int(rng.integers(2)))
        if rng.random() < self.cfg.politeness_probability:
            text = "please " + text
        return text

    # per-label draws -----------------------------------------------------------

    def _draw_unambiguous(self, rng, attempt: int) -> _Draw:
        f = self._pick(rng, self.facts)
        return _Draw(
            [f.tool] + self._extras(rng, self.all_tools, [f.tool], self.cfg.max_extra_tools),
            [f.object] + self._extras(rng, self.all_objects, [f.object], self.cfg.max_extra_objects),
            InstructionTriple(f.tool, f.action, f.object),
            Command(*f),
        )

    def _draw_deambiguable(self, rng, attempt: int) -> _Draw:
        f = self._pick(rng, self.facts)
        mask = self._pick(rng, self.cfg.deambiguable_masks)
        triple = InstructionTriple(
            None if mask in ("tool", "both") else f.tool,
            f.action,
            None if mask in ("target", "both") else f.object,
        )
        # distractors can create competing candidates; the last attempt drops them
        last = attempt == self.cfg.max_attempts - 1
        tools, objects = [f.tool], [f.object]
        if not last:
            tools += self._extras(rng, self.all_tools, [f.tool], self.cfg.max_extra_tools)
            objects += self._extras(rng, self.all_objects, [f.object], self.cfg.max_extra_objects)
        return _Draw(tools, objects, triple, Command(*f))

    def _draw_truly_ambiguous(self, rng, attempt: int) -> _Draw:
        mode = self._pick(rng, self.modes)
        f = self._pick(rng, self._mode_facts(mode))
        if mode == TOOL_REMOVED:
            triple = self._pick(
                rng,
                [
                    InstructionTriple(None, f.action, f.object),
                    InstructionTriple(f.tool, f.action, f.object),
                    InstructionTriple(f.tool, f.action, None),
                    InstructionTriple(None, f.action, None),
                ],
            )
            capable = {g.tool for g in self.kb.matching_facts(*triple)}
            tools = self._extras(rng, self.all_tools, capable, self.cfg.max_extra_tools)
            objects = [f.object] + self._extras(rng, self.all_objects, [f.object], self.cfg.max_extra_objects)
        elif mode == AFFORDANCE_BROKEN:
            wrong = self._pick(rng, self._broken_swaps(f))
            triple = InstructionTriple(wrong, f.action, f.object)
            tools = [wrong] + self._extras(rng, self.all_tools, [wrong], self.cfg.max_extra_tools)
            objects = [f.object] + self._extras(rng, self.all_objects, [f.object], self.cfg.max_extra_objects)
        else:
            targets = self.kb.targets_for(f.tool, f.action)
            second = self._pick(rng, [o for o in targets if o != f.object])
            triple = self._pick(
                rng,
                [InstructionTriple(None, f.action, None), InstructionTriple(f.tool, f.action, None)],
            )
            tools = [f.tool] + self._extras(rng, self.all_tools, [f.tool], self.cfg.max_extra_tools)
            objects = [f.object, second] + self._extras(
                rng, self.all_objects, [f.object, second], self.cfg.max_extra_objects
            )
        return _Draw(tools, objects, triple)

    # verification ----------------------------------------------------------------

    @staticmethod
    def _sound(label: AmbiguityLabel, draw: _Draw, result: DisambiguationResult) -> bool:
        if label is AmbiguityLabel.TRULY_AMBIGUOUS:
            return result.flags.any
        if result.flags.any or result.resolved != draw.gold:
            return False
        if label is AmbiguityLabel.DEAMBIGUABLE:
            return len(result.candidates) == 1
        return True

    def sample(self, label: AmbiguityLabel, seed: int, index: int) -> LabeledSample:
        rng = np.random.default_rng(np.random.SeedSequence([seed, index]))
        draw_fn = {
            AmbiguityLabel.UNAMBIGUOUS: self._draw_unambiguous,
            AmbiguityLabel.DEAMBIGUABLE: self._draw_deambiguable,
            AmbiguityLabel.TRULY_AMBIGUOUS: self._draw_truly_ambiguous,
        }[label]
        scene_id = f"syn-{seed}-{index:04d}"
        for attempt in range(self.cfg.max_attempts):
            draw = draw_fn(rng, attempt)
            scene = self._scene(rng, scene_id, draw.tools, draw.objects)
            request = self._request(rng, draw.triple)
            triple = parse_instruction(request, self.cfg.vocab)
            if triple != draw.triple:
                raise AssertionError(f"phrasing {request!r} did not parse back to {draw.triple}")
            result = reason(scene, triple, self.kb)
            if self._sound(label, draw, result):
                return LabeledSample(scene, request, label, draw.gold)
        raise GeneratorConfigError(
            f"could not realize a {label.value} sample at index {index} "
            f"in {self.cfg.max_attempts} attempts"
        )


def generate_synthetic(config: GeneratorConfig, seed: int) -> list[LabeledSample]:
    """Generate labeled samples, grouped by label in the order U, D, T.

    Each sample is checked with the rule-based expert before it is emitted:
    resolvable labels must reproduce their gold command with no flags raised
    (deambiguable ones with exactly one candidate), truly ambiguous ones
    must raise at least one flag.
    """
    if not 0 <= seed < 2**64:
        raise GeneratorConfigError("seed must be a 64-bit unsigned integer")
    gen = _Generator(config)
    labels = [label for label, n in config.counts().items() for _ in range(n)]
    return [gen.sample(label, seed, i) for i, label in enumerate(labels)]
