"""Command-line driver.

Subcommands::

    gen       synthesize benign/attack message pairs and their profiles
    train     fit a one-class model on the positive rows of a profile CSV
    evaluate  run attack scenarios against a model, emit a metrics report
    sweep     train/test over a parameter grid, one CSV row per grid point
    replay    re-run the command recorded in a manifest

Configuration is layered: built-in defaults, then ``--config`` (YAML with
experiment keys and an optional ``scene`` mapping), then ``--scene`` (YAML
with scene keys), then individual flags. Every run writes a JSON manifest
holding the resolved configuration and its SHA-256.

Exit codes: 0 success, 2 configuration or I/O error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from dataclasses import asdict, fields, replace
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional

import yaml

from . import __version__
from .channel import SceneConfig, write_trace
from .errors import ConfigError, DomainError, ScenarioError, SolverError
from .experiment import (
    SWEEP_PARAMS,
    TEST_ATTACK,
    TEST_BENIGN,
    ExperimentConfig,
    sweep,
    sweep_csv,
    trial_scenario,
)
from .guard import Scenario, build_transcript, evaluate_batch, scenario_profile
from .ocsvm import OcsvmConfig, OcsvmModel, outlier_fraction, train
from .profile import LEGITIMATE, read_profiles, write_profiles

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3

EXPERIMENT_KEYS = {f.name for f in fields(ExperimentConfig)} - {"scene"}


# ---------------------------------------------------------------------------
# configuration


def _load_yaml(path: str) -> dict:
    try:
        data = yaml.safe_load(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: expected a key-value mapping")
    return data


def _parse_sigma(text):
    if text is None or text == "auto":
        return text
    try:
        return float(text)
    except ValueError:
        raise ConfigError(f"--sigma must be a number or 'auto', got {text!r}") from None


def resolve_experiment(args) -> ExperimentConfig:
    cfg: dict = {}
    scene: dict = {}
    if getattr(args, "config", None):
        data = _load_yaml(args.config)
        scene.update(data.pop("scene", None) or {})
        unknown = set(data) - EXPERIMENT_KEYS
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        cfg.update(data)
    if getattr(args, "scene", None):
        scene.update(_load_yaml(args.scene))
    flag_map = {
        "seed": "seed",
        "nu": "nu",
        "sigma": "sigma",
        "trials": "trials",
        "train_size": "train_size",
        "distance": "attacker_distance",
        "attack": "attack",
        "ratio": "negative_ratio",
    }
    for flag, key in flag_map.items():
        value = getattr(args, flag, None)
        if value is not None:
            cfg[key] = value
    if "sigma" in cfg:
        cfg["sigma"] = _parse_sigma(cfg["sigma"])
    if "nu_grid" in cfg:
        cfg["nu_grid"] = tuple(cfg["nu_grid"])
    try:
        return ExperimentConfig(scene=SceneConfig.from_dict(scene), **cfg)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None


def experiment_to_dict(cfg: ExperimentConfig) -> dict:
    d = asdict(cfg)
    d["scene"] = cfg.scene.to_dict()
    d["attack"] = cfg.attack.value
    d["nu_grid"] = list(cfg.nu_grid)
    return d


def experiment_from_dict(d: dict) -> ExperimentConfig:
    d = dict(d)
    scene = SceneConfig.from_dict(d.pop("scene"))
    d["nu_grid"] = tuple(d.get("nu_grid", ()))
    return ExperimentConfig(scene=scene, **d)


def config_hash(resolved: dict) -> str:
    blob = json.dumps(resolved, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


def write_manifest(path: Path, command: str, resolved: dict, seed, artifacts) -> None:
    manifest = {
        "command": command,
        "version": __version__,
        "config": resolved,
        "config_hash": config_hash(resolved),
        "seed": seed,
        "artifacts": [str(a) for a in artifacts],
        "timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds"),
    }
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def _manifest_path(out: Path) -> Path:
    return out.with_name(out.name + ".manifest.json")


# ---------------------------------------------------------------------------
# commands


def run_gen(resolved: dict) -> list[Path]:
    cfg = experiment_from_dict(resolved["experiment"])
    count = int(resolved["count"])
    if count < 0:
        raise ConfigError("count must be >= 0")
    out = Path(resolved["out"])
    save_traces = bool(resolved.get("traces", True))
    out.mkdir(parents=True, exist_ok=True)
    trace_dir = out / "traces"
    if save_traces:
        trace_dir.mkdir(exist_ok=True)

    profiles, artifacts = [], []
    for kind, stream in (("benign", TEST_BENIGN), ("attack", TEST_ATTACK)):
        made, index = 0, 0
        while made < count:
            if index >= 10 * count + 10:
                raise ConfigError(f"too many {kind} pairs failed to segment")
            sc = trial_scenario(cfg, stream, index)
            index += 1
            transcript, pair = build_transcript(sc)
            try:
                profiles.append(scenario_profile(sc, transcript, pair))
            except ScenarioError:
                continue
            if save_traces:
                for tag, m in zip(("ref", "sus"), pair):
                    p = trace_dir / f"{kind}_{made:05d}_{tag}.trace"
                    write_trace(transcript.messages[m].trace, p)
                    artifacts.append(p)
            made += 1
    csv_path = out / "profiles.csv"
    write_profiles(csv_path, profiles)
    artifacts.insert(0, csv_path)
    write_manifest(out / "manifest.json", "gen", resolved, cfg.seed, artifacts)
    print(f"wrote {len(profiles)} profiles to {csv_path}")
    return artifacts


def run_train(resolved: dict) -> list[Path]:
    try:
        rows = read_profiles(resolved["dataset"])
    except OSError as exc:
        raise ConfigError(f"cannot read dataset: {exc}") from None
    positives = [p for p in rows if p.label == LEGITIMATE]
    if resolved.get("train_size"):
        positives = positives[: int(resolved["train_size"])]
    if len(positives) < 2:
        raise ConfigError("dataset has fewer than two positive rows")
    cfg = OcsvmConfig(
        nu=resolved["nu"],
        sigma=_parse_sigma(resolved["sigma"]),
        max_iterations=resolved.get("max_iterations") or OcsvmConfig.max_iterations,
    )
    model = train(positives, cfg)
    out = Path(resolved["model_out"])
    model.save(out)
    frac = outlier_fraction(model, positives)
    print(
        f"trained on {len(positives)} profiles: nu={model.nu} sigma={model.sigma:.6g} "
        f"support_vectors={model.alphas.size} outlier_fraction={frac:.4f}"
    )
    write_manifest(_manifest_path(out), "train", resolved, None, [out])
    return [out]


def run_evaluate(resolved: dict) -> list[Path]:
    cfg = experiment_from_dict(resolved["experiment"])
    try:
        model = OcsvmModel.load(resolved["model"])
    except (OSError, ValueError, KeyError) as exc:
        raise ConfigError(f"cannot load model: {exc}") from None
    scenarios = []
    for kind in resolved["scenarios"]:
        kind = Scenario(kind)
        stream = TEST_BENIGN if kind is Scenario.BENIGN else TEST_ATTACK
        variant = cfg if kind is Scenario.BENIGN else replace(cfg, attack=kind)
        for i in range(cfg.trials):
            sc = trial_scenario(variant, stream, i)
            scenarios.append(replace(sc, model_ref=model))
    report = evaluate_batch(scenarios)
    out = Path(resolved["out"])
    out.write_text(report.to_csv())
    js = out.with_suffix(".json")
    js.write_text(report.to_json() + "\n")
    print(f"tp_rate={report.tp_rate} fp_rate={report.fp_rate} failures={report.failures}")
    write_manifest(_manifest_path(out), "evaluate", resolved, cfg.seed, [out, js])
    return [out, js]


def run_sweep(resolved: dict) -> list[Path]:
    cfg = experiment_from_dict(resolved["experiment"])
    param = resolved["param"]
    if param not in SWEEP_PARAMS:
        raise ConfigError(f"unknown sweep parameter {param!r}")
    grid = [float(v) for v in resolved["grid"]]
    results = sweep(cfg, param, grid)
    out = Path(resolved["out"])
    out.write_text(sweep_csv(param, results))
    for value, r in results:
        print(f"{param}={value:g}: tp_rate={r.tp_rate:.3f} fp_rate={r.fp_rate:.3f} nu={r.nu:g}")
    write_manifest(_manifest_path(out), "sweep", resolved, cfg.seed, [out])
    return [out]


RUNNERS = {"gen": run_gen, "train": run_train, "evaluate": run_evaluate, "sweep": run_sweep}


def run_replay(manifest_path: str, out: Optional[str]) -> list[Path]:
    try:
        manifest = json.loads(Path(manifest_path).read_text())
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot read manifest: {exc}") from None
    command = manifest.get("command")
    if command not in RUNNERS:
        raise ConfigError(f"manifest names unknown command {command!r}")
    resolved = dict(manifest.get("config") or {})
    if out is not None:
        resolved["model_out" if command == "train" else "out"] = out
    try:
        return RUNNERS[command](resolved)
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"manifest config is incomplete: {exc!r}") from None


# ---------------------------------------------------------------------------
# argument parsing


def _grid(text: str) -> list[float]:
    parts = [p for p in text.replace(" ", "").split(",") if p]
    try:
        return [float(p) for p in parts]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad grid {text!r}") from None


def _experiment_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="YAML experiment config")
    p.add_argument("--scene", help="YAML scene config")
    p.add_argument("--seed", type=int)
    p.add_argument("--nu", type=float)
    p.add_argument("--sigma", help="kernel width or 'auto'")
    p.add_argument("--trials", type=int)
    p.add_argument("--train-size", type=int)
    p.add_argument("--distance", type=float, help="attacker distance from the user (m)")
    p.add_argument("--attack", choices=[s.value for s in Scenario if s.is_attack])
    p.add_argument("--ratio", type=float, help="negatives per positive for nu selection")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="shieldscatter", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate a labelled profile dataset")
    _experiment_flags(g)
    g.add_argument("--count", type=int, required=True)
    g.add_argument("--out", required=True, help="output directory")
    g.add_argument("--no-traces", action="store_true", help="skip writing trace files")

    t = sub.add_parser("train", help="train a one-class model")
    t.add_argument("--dataset", required=True)
    t.add_argument("--nu", type=float, default=0.16)
    t.add_argument("--sigma", default="auto")
    t.add_argument("--train-size", type=int)
    t.add_argument("--max-iterations", type=int, help="solver iteration cap")
    t.add_argument("--model-out", "--out", dest="model_out", required=True)

    e = sub.add_parser("evaluate", help="run scenarios against a model")
    _experiment_flags(e)
    e.add_argument("--model", required=True)
    e.add_argument(
        "--scenarios",
        default="benign,deauth_injection,jam_and_replay,spoof_emulation",
        help="comma-separated scenario names",
    )
    e.add_argument("--out", required=True, help="report CSV (a .json mirror is written beside it)")

    s = sub.add_parser("sweep", help="parameter sweep")
    _experiment_flags(s)
    s.add_argument("--param", required=True, choices=SWEEP_PARAMS)
    s.add_argument("--grid", required=True, type=_grid)
    s.add_argument("--out", required=True)

    r = sub.add_parser("replay", help="re-run a manifest")
    r.add_argument("manifest")
    r.add_argument("--out", help="write outputs here instead of the recorded path")
    return parser


def resolve(args) -> dict:
    if args.command == "gen":
        return {
            "experiment": experiment_to_dict(resolve_experiment(args)),
            "count": args.count,
            "out": args.out,
            "traces": not args.no_traces,
        }
    if args.command == "train":
        OcsvmConfig(nu=args.nu, sigma=_parse_sigma(args.sigma))
        if args.max_iterations is not None and args.max_iterations < 1:
            raise ConfigError("--max-iterations must be >= 1")
        return {
            "dataset": args.dataset,
            "nu": args.nu,
            "sigma": args.sigma,
            "train_size": args.train_size,
            "max_iterations": args.max_iterations,
            "model_out": args.model_out,
        }
    if args.command == "evaluate":
        names = [n for n in args.scenarios.split(",") if n]
        try:
            names = [Scenario(n).value for n in names]
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if not names:
            raise ConfigError("no scenarios given")
        return {
            "experiment": experiment_to_dict(resolve_experiment(args)),
            "model": args.model,
            "scenarios": names,
            "out": args.out,
        }
    if args.command == "sweep":
        if not args.grid:
            raise ConfigError("empty grid")
        return {
            "experiment": experiment_to_dict(resolve_experiment(args)),
            "param": args.param,
            "grid": args.grid,
            "out": args.out,
        }
    raise ConfigError(f"unknown command {args.command!r}")


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "replay":
            run_replay(args.manifest, args.out)
        else:
            RUNNERS[args.command](resolve(args))
    except SolverError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ConfigError, DomainError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
