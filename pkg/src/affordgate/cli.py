"""Command-line entry point.

Exit codes: 0 success, 1 operational error (missing files, unusable
calibration data, generator cannot realize the request), 2 input error
(unparseable request, malformed scene/KB/vocabulary/dataset, bad flags).
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import TextIO

from .conformal import (
    DEFAULT_ALPHA,
    CalibrationArtifact,
    CalibrationError,
    FlagWeights,
    Verdict,
    check_alpha,
    load_calibration,
    serialize_calibration,
)
from .dataset import (
    DatasetFormatError,
    GeneratorConfig,
    GeneratorConfigError,
    corrupt_tool_removal,
    generate_synthetic,
    make_header,
    parse_dataset,
    save_dataset,
    split_by_label,
)
from .defaults import default_kb, default_vocabulary
from .instruction import InstructionParseError, Vocabulary, VocabularyError, load_vocabulary
from .kb import AffordanceKB, KBFormatError, load_kb
from .pipeline import (
    calibrate_from_samples,
    dump_records,
    evaluate,
    export_pvalue_distributions,
    format_tally,
    run_pipeline,
)
from .scene import SceneDescription, SceneError, parse_scene

EXIT_OK, EXIT_OPERATIONAL, EXIT_INPUT = 0, 1, 2

GLOBAL_DEFAULTS = {
    "kb": None,
    "vocab": None,
    "alpha": None,
    "weights": None,
    "seed": 42,
    "out": ".",
}


class InputError(Exception):
    """Bad user input; maps to exit code 2."""


class OperationalError(Exception):
    """Environment or data problem; maps to exit code 1."""


@dataclass
class RunConfig:
    kb_path: Path | None = None
    vocab_path: Path | None = None
    out: Path = Path(".")
    alpha: float | None = None
    weights: FlagWeights | None = None
    seed: int = 42

    def kb(self) -> AffordanceKB:
        if self.kb_path is None:
            return default_kb()
        return load_kb(_read(self.kb_path))

    def vocab(self) -> Vocabulary:
        if self.vocab_path is None:
            return default_vocabulary()
        return load_vocabulary(_read(self.vocab_path))

    def path(self, given: str | None, default_name: str) -> Path:
        return Path(given) if given else self.out / default_name


def _read(path: Path) -> bytes:
    try:
        return Path(path).read_bytes()
    except OSError as exc:
        raise OperationalError(f"cannot read {path}: {exc.strerror}") from None


def _write(path: Path, data: bytes) -> None:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(data)
    except OSError as exc:
        raise OperationalError(f"cannot write {path}: {exc.strerror}") from None


def _global_flags(suppress: bool) -> argparse.ArgumentParser:
    default = argparse.SUPPRESS if suppress else None
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("global options")
    g.add_argument("--config", default=default, help="JSON config file mirroring these flags")
    g.add_argument("--kb", default=default, help="affordance KB JSON (default: built-in)")
    g.add_argument("--vocab", default=default, help="vocabulary JSON (default: built-in)")
    g.add_argument("--alpha", type=float, default=default, help="significance level (default 0.1)")
    g.add_argument("--weights", default=default, help="w_tool,w_action,w_target (default 1,1,1)")
    g.add_argument("--seed", type=int, default=default, help="generator seed (default 42)")
    g.add_argument("--out", default=default, help="output directory (default .)")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _global_flags(suppress=True)
    parser = argparse.ArgumentParser(
        prog="affordgate",
        description="Disambiguate surgical requests with affordance reasoning and a conformal gate.",
        parents=[common],
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", parents=[common], help="write a synthetic labeled dataset")
    p.add_argument("--counts", default="60,60,60", help="unambiguous,deambiguable,truly_ambiguous")
    p.add_argument("--dataset", help="output path (default OUT/dataset.jsonl)")

    p = sub.add_parser("calibrate", parents=[common], help="build the calibration artifact")
    p.add_argument("--dataset", help="default OUT/dataset.jsonl")
    p.add_argument("--calibration", help="output path (default OUT/calibration.json)")

    p = sub.add_parser("evaluate", parents=[common], help="score the deambiguable test set")
    p.add_argument("--dataset", help="default OUT/dataset.jsonl")
    p.add_argument("--calibration", help="default OUT/calibration.json")
    p.add_argument("--results", help="per-sample JSON-lines (default OUT/results.jsonl)")
    p.add_argument(
        "--remove-tool",
        type=int,
        default=0,
        metavar="K",
        help="corrupt the first K test scenes by removing their gold tool",
    )

    p = sub.add_parser("predict", parents=[common], help="judge one request against a scene")
    p.add_argument("--calibration", help="default OUT/calibration.json")
    p.add_argument("--scene", required=True, help="scene JSON file")
    p.add_argument("request", help="verbal request, e.g. 'cut the tissue'")

    p = sub.add_parser("session", parents=[common], help="interactive clarification loop")
    p.add_argument("--calibration", help="default OUT/calibration.json")
    p.add_argument("--scene", required=True, help="scene JSON file")
    p.add_argument("--transcript", help="default OUT/session_transcript.jsonl")

    p = sub.add_parser("export-pvalues", parents=[common], help="CSV of per-sample p-values")
    p.add_argument("--dataset", help="default OUT/dataset.jsonl")
    p.add_argument("--calibration", help="default OUT/calibration.json")
    p.add_argument("--csv", help="default OUT/pvalues.csv")
    p.add_argument(
        "--split",
        choices=("calibration", "test", "all"),
        default="calibration",
        help="which samples to export (default: calibration)",
    )
    return parser


def resolve_config(args: argparse.Namespace) -> RunConfig:
    values = dict(GLOBAL_DEFAULTS)
    config_path = getattr(args, "config", None)
    if config_path:
        try:
            file_values = json.loads(_read(Path(config_path)))
        except json.JSONDecodeError as exc:
            raise InputError(f"config file is not valid JSON: {exc}") from None
        unknown = set(file_values) - set(GLOBAL_DEFAULTS)
        if unknown:
            raise InputError(f"unknown config keys {sorted(unknown)}")
        values.update(file_values)
    for key in GLOBAL_DEFAULTS:
        if hasattr(args, key):
            values[key] = getattr(args, key)

    try:
        weights = values["weights"]
        if isinstance(weights, (list, tuple)):
            weights = FlagWeights(*map(float, weights))
        elif weights is not None:
            weights = FlagWeights.parse(str(weights))
        alpha = values["alpha"]
        if alpha is not None:
            alpha = float(check_alpha(float(alpha)))
        seed = int(values["seed"])
    except (TypeError, ValueError) as exc:
        raise InputError(str(exc)) from None
    return RunConfig(
        kb_path=Path(values["kb"]) if values["kb"] else None,
        vocab_path=Path(values["vocab"]) if values["vocab"] else None,
        out=Path(values["out"]),
        alpha=alpha,
        weights=weights,
        seed=seed,
    )


def _load_artifact(cfg: RunConfig, given: str | None) -> CalibrationArtifact:
    path = cfg.path(given, "calibration.json")
    if not path.exists():
        raise OperationalError(f"calibration artifact {path} not found (run `calibrate` first)")
    art = load_calibration(_read(path))
    if cfg.weights is not None and cfg.weights != art.weights:
        raise InputError(
            f"--weights {cfg.weights.as_tuple()} differ from the calibration artifact's "
            f"{art.weights.as_tuple()}; recalibrate with the new weights"
        )
    return art


def _alpha(cfg: RunConfig, art: CalibrationArtifact) -> float:
    return cfg.alpha if cfg.alpha is not None else art.alpha


def _load_scene(path: str) -> SceneDescription:
    return parse_scene(_read(Path(path)))


def cmd_generate(args, cfg: RunConfig, out: TextIO) -> int:
    try:
        n_u, n_d, n_t = (int(x) for x in args.counts.split(","))
    except ValueError:
        raise InputError(f"--counts must be three comma-separated integers, got {args.counts!r}") from None
    gen_cfg = GeneratorConfig(cfg.vocab(), cfg.kb(), n_u, n_d, n_t)
    try:
        samples = generate_synthetic(gen_cfg, cfg.seed)
    except GeneratorConfigError as exc:
        raise OperationalError(str(exc)) from None
    path = cfg.path(args.dataset, "dataset.jsonl")
    _write_dataset(samples, path, make_header(cfg.seed, gen_cfg.config_hash()))
    counts = {label.value: n for label, n in gen_cfg.counts().items()}
    out.write(f"wrote {len(samples)} samples to {path}\n")
    for label, n in counts.items():
        out.write(f"  {label:<16} {n}\n")
    return EXIT_OK


def _write_dataset(samples, path: Path, header: dict) -> None:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        save_dataset(samples, path, header)
    except OSError as exc:
        raise OperationalError(f"cannot write {path}: {exc.strerror}") from None


def _dataset(cfg: RunConfig, given: str | None):
    path = cfg.path(given, "dataset.jsonl")
    raw = _read(path)
    header, samples = parse_dataset(raw)
    return raw, header, samples


def cmd_calibrate(args, cfg: RunConfig, out: TextIO) -> int:
    raw, _, samples = _dataset(cfg, args.dataset)
    split = split_by_label(samples)
    weights = cfg.weights or FlagWeights()
    calib = calibrate_from_samples(split.calibration, cfg.kb(), cfg.vocab(), weights)
    art = CalibrationArtifact(
        weights=weights,
        alpha=cfg.alpha if cfg.alpha is not None else DEFAULT_ALPHA,
        calibration=calib,
        created_from="sha256:" + hashlib.sha256(raw).hexdigest(),
    )
    path = cfg.path(args.calibration, "calibration.json")
    _write(path, serialize_calibration(art))
    out.write(f"wrote {path}\n")
    out.write(f"  C_Amb     {len(calib.amb_scores)} scores\n")
    out.write(f"  C_NonAmb  {len(calib.nonamb_scores)} scores\n")
    return EXIT_OK


def cmd_evaluate(args, cfg: RunConfig, out: TextIO) -> int:
    art = _load_artifact(cfg, args.calibration)
    _, _, samples = _dataset(cfg, args.dataset)
    test = split_by_label(samples).test
    if args.remove_tool:
        if not 0 <= args.remove_tool <= len(test):
            raise InputError(f"--remove-tool must be between 0 and {len(test)}")
        test = corrupt_tool_removal(test, range(args.remove_tool))
    tally, records = evaluate(
        test, cfg.kb(), cfg.vocab(), art.calibration, _alpha(cfg, art), art.weights
    )
    path = cfg.path(args.results, "results.jsonl")
    _write(path, dump_records(records))
    out.write(f"Disambiguation outcomes for {tally.total} test requests\n")
    out.write(format_tally(tally))
    out.write(f"per-sample results: {path}\n")
    return EXIT_OK


def predict_json(cfg: RunConfig, art: CalibrationArtifact, scene: SceneDescription, request: str) -> dict:
    verdict = run_pipeline(
        scene, request, cfg.kb(), cfg.vocab(), art.calibration, _alpha(cfg, art), art.weights
    )
    return verdict.to_dict()


def cmd_predict(args, cfg: RunConfig, out: TextIO) -> int:
    art = _load_artifact(cfg, args.calibration)
    scene = _load_scene(args.scene)
    out.write(json.dumps(predict_json(cfg, art, scene, args.request), indent=2) + "\n")
    return EXIT_OK


def run_session(
    cfg: RunConfig,
    art: CalibrationArtifact,
    scene: SceneDescription,
    transcript: Path,
    inp: TextIO,
    out: TextIO,
) -> int:
    """Read requests until "quit" or end of input, asking for clarification when needed."""
    kb, vocab, alpha = cfg.kb(), cfg.vocab(), _alpha(cfg, art)
    _write(transcript, b"")
    prompt = "request> "
    turn = 0
    with transcript.open("a", encoding="utf-8") as log:
        while True:
            out.write(prompt)
            out.flush()
            line = inp.readline()
            if not line:
                out.write("\n")
                break
            text = line.strip()
            if not text:
                continue
            if text.lower() in ("quit", "exit"):
                break
            turn += 1
            entry: dict = {"turn": turn, "request": text}
            try:
                verdict = run_pipeline(scene, text, kb, vocab, art.calibration, alpha, art.weights)
            except InstructionParseError as exc:
                entry["error"] = {"code": exc.code, "message": str(exc)}
                out.write(f"cannot parse request ({exc.code}): {exc}\n")
                prompt = "request> "
            else:
                entry["verdict"] = verdict.to_dict()
                if verdict.decision.verdict is Verdict.EXECUTABLE:
                    tool, action, target = verdict.resolved
                    out.write(f"EXECUTE {action} {target} with {tool}\n")
                    prompt = "request> "
                else:
                    flags = ", ".join(f"{k}={v}" for k, v in verdict.flags._asdict().items())
                    out.write(
                        f"{verdict.decision.verdict.value} ({verdict.decision.reason.value}); "
                        f"p_amb={float(verdict.p.p_amb):.3f} p_nonamb={float(verdict.p.p_nonamb):.3f}\n"
                    )
                    out.write(f"  flags: {flags}\n")
                    if verdict.candidates:
                        options = "; ".join(f"{t} -> {o}" for t, o in verdict.candidates)
                        out.write(f"  candidates: {options}\n")
                    else:
                        out.write("  candidates: none in view\n")
                    out.write("  please restate the full request (e.g. name the tool and target)\n")
                    prompt = "clarify> "
            log.write(json.dumps(entry, ensure_ascii=False) + "\n")
            log.flush()
    return EXIT_OK


def cmd_session(args, cfg: RunConfig, out: TextIO, inp: TextIO = sys.stdin) -> int:
    art = _load_artifact(cfg, args.calibration)
    scene = _load_scene(args.scene)
    transcript = cfg.path(args.transcript, "session_transcript.jsonl")
    return run_session(cfg, art, scene, transcript, inp, out)


def cmd_export_pvalues(args, cfg: RunConfig, out: TextIO) -> int:
    art = _load_artifact(cfg, args.calibration)
    _, _, samples = _dataset(cfg, args.dataset)
    split = split_by_label(samples)
    chosen = {"calibration": split.calibration, "test": split.test, "all": samples}[args.split]
    path = cfg.path(args.csv, "pvalues.csv")
    text = export_pvalue_distributions(
        art.calibration, chosen, cfg.kb(), cfg.vocab(), weights=art.weights
    )
    _write(path, text.encode("utf-8"))
    out.write(f"wrote {len(chosen)} rows to {path}\n")
    return EXIT_OK


COMMANDS = {
    "generate": cmd_generate,
    "calibrate": cmd_calibrate,
    "evaluate": cmd_evaluate,
    "predict": cmd_predict,
    "session": cmd_session,
    "export-pvalues": cmd_export_pvalues,
}


def main(argv: list[str] | None = None, stdout: TextIO | None = None, stdin: TextIO | None = None) -> int:
    out = stdout or sys.stdout
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:  # usage errors and --help
        return exc.code if isinstance(exc.code, int) else EXIT_INPUT
    try:
        cfg = resolve_config(args)
        if args.command == "session":
            return cmd_session(args, cfg, out, stdin or sys.stdin)
        return COMMANDS[args.command](args, cfg, out)
    except InstructionParseError as exc:
        print(f"error: parse error ({exc.code}): {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (InputError, SceneError, KBFormatError, VocabularyError, DatasetFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (OperationalError, CalibrationError, GeneratorConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_OPERATIONAL


if __name__ == "__main__":
    sys.exit(main())
