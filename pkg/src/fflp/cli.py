"""fflp command line: reproducible training, adaptation, and benchmark
runs.

Every command resolves its arguments, runs deterministically from
--seed, writes its artifacts under --out-dir, and drops a manifest.json
recording the resolved arguments and content digests of every file
read or written.  ``fflp rerun manifest.json`` re-executes the recorded
command and verifies the digests.

Exit codes: 0 success, 1 internal error or assertion, 2 bad input,
3 I/O failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from pathlib import Path

import numpy as np

from .manifest import ManifestError, ManifestWriter, RunManifest
from .network import NetworkConfig, PlasticityRule


class InputError(ValueError):
    """Bad user input: unknown task, malformed config, bad flag value."""


def _load_json(path) -> dict:
    try:
        raw = json.loads(Path(path).read_text())
    except json.JSONDecodeError as e:
        raise InputError(f"{path}: not valid JSON ({e})") from e
    if not isinstance(raw, dict):
        raise InputError(f"{path}: expected a JSON object")
    return raw


def load_net_config(path) -> NetworkConfig:
    raw = _load_json(path)
    allowed = {"n_in", "n_hidden", "n_out", "v_th", "lam"}
    unknown = set(raw) - allowed
    if unknown:
        raise InputError(f"{path}: unknown network config keys {sorted(unknown)}")
    missing = {"n_in", "n_hidden", "n_out"} - set(raw)
    if missing:
        raise InputError(f"{path}: missing network config keys {sorted(missing)}")
    try:
        return NetworkConfig(**raw)
    except (TypeError, ValueError) as e:
        raise InputError(f"{path}: {e}") from e


def load_hw_config(path):
    from .accel import HardwareConfig

    try:
        return HardwareConfig.from_dict(_load_json(path))
    except (TypeError, ValueError) as e:
        raise InputError(f"{path}: {e}") from e


def _make_task(args):
    from . import tasks

    perturbations = tuple(
        tasks.Perturbation.parse(p) for p in (getattr(args, "perturb", None) or [])
    )
    name = args.task
    if name not in tasks.TASK_NAMES:
        raise InputError(
            f"unknown task {name!r}; valid tasks: {', '.join(tasks.TASK_NAMES)}"
        )
    if perturbations and name != "reaching":
        raise InputError("--perturb is only meaningful for the reaching task")
    try:
        return tasks.make_task(
            name,
            dataset_path=getattr(args, "dataset", None),
            episode_len=getattr(args, "episode_len", None),
            perturbations=perturbations,
        )
    except (ValueError, KeyError, tasks.DatasetFormatError) as e:
        raise InputError(str(e)) from e


def _net_for(args, task):
    from .tasks import default_network_config

    if getattr(args, "net", None):
        return load_net_config(args.net)
    return default_network_config(task, getattr(args, "hidden", None))


def _public_args(args) -> dict:
    return {
        k: v for k, v in vars(args).items() if k not in ("func", "command")
    }


def _resolve_variant(task, raw):
    if raw is None:
        return task.train_variants[0]
    try:
        idx = int(raw)
    except ValueError:
        if raw in task.train_variants or raw in task.eval_variants:
            return raw
        raise InputError(f"variant {raw!r} not in the task's variant space")
    if idx in task.train_variants or idx in task.eval_variants:
        return idx
    raise InputError(f"variant {idx} not in the task's variant space")


# -- commands ----------------------------------------------------------------


def cmd_train_rule(args) -> int:
    from .evolution import PEPGConfig, train_rule
    from .model_io import Model, save_model

    task = _make_task(args)
    config = _net_for(args, task)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    writer = ManifestWriter("train-rule", _public_args(args), {"seed": args.seed})
    for p in (getattr(args, "net", None), getattr(args, "dataset", None)):
        if p:
            writer.add_input(p)

    pepg = PEPGConfig(
        eta_mu=args.eta_mu, eta_sigma=args.eta_sigma, sigma_init=args.sigma_init
    )
    log_path = out_dir / "training_log.csv"
    rule, es = train_rule(
        config, task,
        generations=args.generations, pop_size=args.pop, seed=args.seed,
        pepg=pepg, episodes=args.episodes, workers=args.workers,
        log_path=log_path, progress=not args.quiet,
    )
    rule_path = out_dir / args.out
    save_model(rule_path, Model.from_rule(config, rule))
    writer.add_output(rule_path)
    writer.add_output(log_path)
    writer.write(out_dir / "manifest.json")
    if not args.quiet:
        best = max((h[1] for h in es.history), default=float("nan"))
        print(f"wrote {rule_path} (best fitness {best:.4f})")
    return 0


def cmd_adapt(args) -> int:
    from .accel import latency_report
    from .control import run_episode
    from .model_io import load_model, ModelFormatError

    try:
        model = load_model(args.rule)
    except (ModelFormatError, FileNotFoundError) as e:
        raise InputError(f"cannot load rule file {args.rule}: {e}") from e
    task = _make_task(args)
    if args.steps:
        task.episode_len = args.steps
    variant = _resolve_variant(task, args.variant)
    hw = load_hw_config(args.hwconfig) if args.hwconfig else None

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    writer = ManifestWriter("adapt", _public_args(args), {"seed": args.seed})
    writer.add_input(args.rule)
    for p in (getattr(args, "dataset", None), args.hwconfig):
        if p:
            writer.add_input(p)

    result = run_episode(
        task, variant, model.rule, model.config, seed=args.seed,
        backend=args.backend, hw=hw, record=True, check=args.check,
    )

    csv_path = out_dir / "episode.csv"
    with open(csv_path, "w", newline="") as f:
        w = csv.writer(f)
        step0 = result.records[0]
        obs_cols = [f"obs_{i}" for i in range(len(step0[1]))]
        act_cols = [f"act_{i}" for i in range(len(step0[2]))]
        w.writerow(["step", *obs_cols, *act_cols, "reward"])
        for step, obs, action, reward in result.records:
            w.writerow([step, *(f"{x:.8g}" for x in obs),
                        *(f"{x:.8g}" for x in action), f"{reward:.8g}"])
    writer.add_output(csv_path)

    if args.backend == "cycle":
        report = latency_report(
            result.trace, (hw.clock_mhz if hw else 200.0)
        )
        report_path = out_dir / args.report
        report_path.write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
        writer.add_output(report_path)
    writer.write(out_dir / "manifest.json")
    line = f"return {result.total_return:.6g} over {len(result.rewards)} steps"
    if result.accuracy is not None:
        line += f", accuracy {result.accuracy:.4f}"
    print(line)
    return 0


def cmd_bench(args) -> int:
    from .accel import HardwareConfig, Simulator, latency_report

    config = load_net_config(args.net)
    hw = load_hw_config(args.hwconfig) if args.hwconfig else HardwareConfig()
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    writer = ManifestWriter("bench", _public_args(args), {"seed": args.seed})
    writer.add_input(args.net)
    if args.hwconfig:
        writer.add_input(args.hwconfig)

    rule = PlasticityRule.from_genome(
        config,
        np.random.default_rng(args.seed).normal(
            scale=0.01, size=config.genome_size
        ),
    )
    sim = Simulator(config, rule, hw, monitor=False)
    rng = np.random.default_rng((args.seed, 0xBE7C))
    for _ in range(args.frames):
        frame = (rng.random((args.timesteps, config.n_in)) < args.density).astype(
            np.uint8
        )
        sim.run_stream(frame)
    report = latency_report(sim.trace, hw.clock_mhz, frames=args.frames or None)
    text = json.dumps(report, indent=2, sort_keys=True)
    print(text)
    report_path = out_dir / "bench_report.json"
    report_path.write_text(text + "\n")
    writer.add_output(report_path)
    writer.write(out_dir / "manifest.json")
    return 0


def cmd_make_dataset(args) -> int:
    from .tasks import make_synthetic_digits, save_dataset

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    images, labels = make_synthetic_digits(args.per_class, args.seed)
    path = out_dir / args.out
    save_dataset(path, images, labels)
    writer = ManifestWriter("make-dataset", _public_args(args), {"seed": args.seed})
    writer.add_output(path)
    writer.write(out_dir / "manifest.json")
    print(f"wrote {path} ({len(labels)} images)")
    return 0


def cmd_rerun(args) -> int:
    manifest = RunManifest.load(args.manifest)
    stored = dict(manifest.args)
    stored["out_dir"] = args.out_dir
    ns = argparse.Namespace(**stored)
    handler = {
        "train-rule": cmd_train_rule,
        "adapt": cmd_adapt,
        "bench": cmd_bench,
        "make-dataset": cmd_make_dataset,
    }.get(manifest.command)
    if handler is None:
        raise InputError(f"manifest records unknown command {manifest.command!r}")
    code = handler(ns)
    if code != 0:
        return code
    new = RunManifest.load(Path(args.out_dir) / "manifest.json")
    mismatched = [
        name
        for name, digest in manifest.output_digests.items()
        if new.output_digests.get(name) != digest
    ]
    if mismatched:
        print(f"rerun DIVERGED on outputs: {', '.join(mismatched)}", file=sys.stderr)
        return 1
    print(f"rerun reproduced {len(manifest.output_digests)} outputs byte-identically")
    return 0


# -- argument parsing ----------------------------------------------------------


def _add_common(p, seed_default=0):
    p.add_argument("--out-dir", default=".", help="directory for all artifacts")
    p.add_argument("--seed", type=int, default=seed_default)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fflp", description="plastic-SNN controller toolkit"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train-rule", help="evolve a plasticity rule offline")
    p.add_argument("--task", required=True)
    p.add_argument("--dataset", help="FFDS file (mini-classify only)")
    p.add_argument("--net", help="network config JSON")
    p.add_argument("--hidden", type=int, help="hidden size when --net is omitted")
    p.add_argument("--generations", type=int, required=True)
    p.add_argument("--pop", type=int, required=True)
    p.add_argument("--episodes", type=int, default=2)
    p.add_argument("--episode-len", type=int, dest="episode_len")
    p.add_argument("--perturb", action="append", metavar="STEP:JOINT:SCALE")
    p.add_argument("--eta-mu", type=float, default=2.0, dest="eta_mu")
    p.add_argument("--eta-sigma", type=float, default=1.0, dest="eta_sigma")
    p.add_argument("--sigma-init", type=float, default=0.08, dest="sigma_init")
    p.add_argument(
        "--workers", type=int, default=int(os.environ.get("FFLP_WORKERS", "1"))
    )
    p.add_argument("--out", default="rule.fflp")
    p.add_argument("--quiet", action="store_true")
    _add_common(p)
    p.set_defaults(func=cmd_train_rule)

    p = sub.add_parser("adapt", help="online adaptation from zero weights")
    p.add_argument("--rule", required=True, help="FFLP rule file")
    p.add_argument("--task", required=True)
    p.add_argument("--dataset")
    p.add_argument("--variant")
    p.add_argument("--steps", type=int)
    p.add_argument("--episode-len", type=int, dest="episode_len")
    p.add_argument("--perturb", action="append", metavar="STEP:JOINT:SCALE")
    p.add_argument("--backend", choices=("functional", "cycle"), default="functional")
    p.add_argument("--check", action="store_true",
                   help="run both backends and fail on any bit mismatch")
    p.add_argument("--hwconfig", help="hardware config JSON (cycle backend)")
    p.add_argument("--report", default="report.json")
    _add_common(p)
    p.set_defaults(func=cmd_adapt)

    p = sub.add_parser("bench", help="cycle-model latency benchmark")
    p.add_argument("--net", required=True, help="network config JSON")
    p.add_argument("--hwconfig", help="hardware config JSON")
    p.add_argument("--frames", type=int, required=True)
    p.add_argument("--timesteps", type=int, default=16, help="timesteps per frame")
    p.add_argument("--density", type=float, default=0.13,
                   help="input spike probability for synthetic frames")
    _add_common(p)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("make-dataset", help="write a synthetic FFDS digit set")
    p.add_argument("--out", default="digits.ffds")
    p.add_argument("--per-class", type=int, default=32, dest="per_class")
    _add_common(p)
    p.set_defaults(func=cmd_make_dataset)

    p = sub.add_parser("rerun", help="re-execute a manifest and verify digests")
    p.add_argument("manifest")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_rerun)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (InputError, ManifestError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except OSError as e:
        print(f"i/o error: {e}", file=sys.stderr)
        return 3
    except AssertionError as e:
        print(f"assertion: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
