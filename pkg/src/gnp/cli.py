"""Command-line pipeline: generate, cluster, train-goal, train-nsf, eval, ablate, plot.

Every command reads a flat ``key = value`` config (``#`` starts a comment),
writes its artifacts under ``--out`` and records a manifest with the config
hash, seed, version and sha256 of every input and output file.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import subprocess
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable

import numpy as np
import torch

from . import __version__
from . import evaluation as ev
from . import goalnet as gn
from . import modes as md
from . import nn as gnn
from . import nsf
from . import svgplot, synthgen, trajdata

logger = logging.getLogger("gnp")

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3


class ConfigError(ValueError):
    def __init__(self, problems: list[str]):
        super().__init__("invalid configuration:\n" + "\n".join(f"  - {p}" for p in problems))
        self.problems = problems


class MissingPrerequisite(RuntimeError):
    def __init__(self, path: Path, command: str):
        super().__init__(f"missing {path}; run `gnp {command}` first (with the same --out)")
        self.command = command


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Key:
    kind: type
    default: Any
    check: Callable[[Any], bool] | None = None
    rule: str = ""


def _pos(v) -> bool:
    return v > 0


def _nonneg(v) -> bool:
    return v >= 0


def _frac(v) -> bool:
    return 0 < v < 1


KEYS: dict[str, Key] = {
    # data
    "data": Key(str, "", None),
    "lanes": Key(str, "", None),
    "schema": Key(str, "canonical", lambda v: v in ("canonical", "ngsim", "highd"), "one of canonical, ngsim, highd"),
    "vehicles": Key(int, 500, _pos, "> 0"),
    "lane_count": Key(int, 3, lambda v: v >= 2, ">= 2"),
    "lane_width": Key(float, 3.7, _pos, "> 0"),
    "duration": Key(float, 8.0, _pos, "> 0"),
    "dt": Key(float, 0.1, _pos, "> 0"),
    "maneuver_mix": Key(tuple, (1 / 3, 1 / 3, 1 / 3), lambda v: len(v) == 3 and min(v) >= 0 and abs(sum(v) - 1) < 1e-6, "3 fractions summing to 1"),
    "speed_min": Key(float, 25.5, _pos, "> 0"),
    "speed_max": Key(float, 26.5, _pos, "> 0"),
    # windows
    "T_obs": Key(int, 30, lambda v: v >= 3, ">= 3"),
    "T_pred": Key(int, 50, _pos, "> 0"),
    "stride": Key(int, 80, _pos, "> 0"),
    "test_fraction": Key(float, 0.3, _frac, "in (0, 1)"),
    "neighbor_radius": Key(float, 50.0, _pos, "> 0"),
    "max_neighbors": Key(int, 8, _pos, "> 0"),
    # goal network
    "L": Key(int, 20, lambda v: v >= 2, ">= 2"),
    "K": Key(int, 6, _pos, "> 0"),
    "basis": Key(str, "endpoint", lambda v: v in ("endpoint", "full"), "endpoint or full"),
    "d_model": Key(int, 64, _pos, "> 0"),
    "heads": Key(int, 4, _pos, "> 0"),
    "blocks": Key(int, 2, _pos, "> 0"),
    "ffn": Key(int, 256, _pos, "> 0"),
    "lam": Key(float, 1.0, _nonneg, ">= 0"),
    "goal_rate": Key(float, 1e-3, _pos, "> 0"),
    "goal_epochs": Key(int, 60, _nonneg, ">= 0"),
    "goal_batch": Key(int, 32, _pos, "> 0"),
    # force model
    "r_col": Key(float, 5.0, _pos, "> 0"),
    "a": Key(float, 5.0, _pos, "> 0"),
    "eps_line": Key(float, 0.1, _pos, "> 0"),
    "nsf_hidden": Key(int, 64, _pos, "> 0"),
    "nsf_rate": Key(float, 3e-3, _pos, "> 0"),
    "phase1_epochs": Key(int, 25, _nonneg, ">= 0"),
    "phase2_epochs": Key(int, 25, _nonneg, ">= 0"),
    "nsf_batch": Key(int, 128, _pos, "> 0"),
    "phase2": Key(bool, True),
    "joint_phase2": Key(bool, False),
    "nsf_goals": Key(str, "oracle", lambda v: v in ("oracle", "predicted"), "oracle or predicted"),
    "seed": Key(int, gnn.DEFAULT_SEED, lambda v: 0 <= v < 2**64, "in [0, 2^64)"),
}


def _convert(kind: type, text: str):
    if kind is bool:
        low = text.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"not a boolean: {text!r}")
    if kind is tuple:
        return tuple(float(p) for p in text.split(","))
    if kind is int:
        return int(text, 0)
    return kind(text)


def parse_config_text(text: str, source: str = "<config>") -> dict[str, str]:
    raw, problems = {}, []
    for n, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            problems.append(f"{source}:{n}: expected 'key = value', got {line!r}")
            continue
        k, v = (s.strip() for s in line.split("=", 1))
        if k in raw:
            problems.append(f"{source}:{n}: duplicate key {k!r}")
        raw[k] = v
    if problems:
        raise ConfigError(problems)
    return raw


def build_config(raw: dict[str, str], overrides: dict[str, Any] | None = None) -> dict[str, Any]:
    """Typed config from raw strings; every problem is collected before raising."""
    problems = []
    cfg = {k: spec.default for k, spec in KEYS.items()}
    for k, text in raw.items():
        if k not in KEYS:
            problems.append(f"unknown key {k!r}")
            continue
        try:
            cfg[k] = _convert(KEYS[k].kind, text)
        except ValueError as exc:
            problems.append(f"{k}: cannot parse {text!r} as {KEYS[k].kind.__name__} ({exc})")
    for k, v in (overrides or {}).items():
        if v is not None:
            cfg[k] = v
    for k, spec in KEYS.items():
        if spec.check is not None and k not in {p.split(":")[0] for p in problems}:
            try:
                ok = spec.check(cfg[k])
            except TypeError:
                ok = False
            if not ok:
                problems.append(f"{k} = {cfg[k]!r} violates: {spec.rule}")
    if cfg["speed_min"] > cfg["speed_max"]:
        problems.append("speed_min must not exceed speed_max")
    if cfg["d_model"] % cfg["heads"]:
        problems.append(f"d_model ({cfg['d_model']}) must be divisible by heads ({cfg['heads']})")
    if cfg["K"] > cfg["L"]:
        problems.append(f"K ({cfg['K']}) must not exceed L ({cfg['L']})")
    if problems:
        raise ConfigError(problems)
    return cfg


def config_text(cfg: dict[str, Any]) -> str:
    def fmt(v):
        if isinstance(v, tuple):
            return ",".join(repr(float(x)) for x in v)
        if isinstance(v, bool):
            return "true" if v else "false"
        return repr(v) if isinstance(v, float) else str(v)

    return "".join(f"{k} = {fmt(cfg[k])}\n" for k in sorted(cfg))


def config_hash(cfg: dict[str, Any]) -> str:
    return hashlib.sha256(config_text(cfg).encode()).hexdigest()


def load_config(path: str | None, overrides: dict[str, Any]) -> dict[str, Any]:
    raw = {}
    if path:
        p = Path(path)
        if not p.exists():
            raise ConfigError([f"config file {p} does not exist"])
        raw = parse_config_text(p.read_text(), str(p))
    return build_config(raw, overrides)


# ---------------------------------------------------------------------------
# Run context and manifests
# ---------------------------------------------------------------------------


def version_string() -> str:
    try:
        out = subprocess.run(
            ["git", "describe", "--tags", "--always", "--dirty"],
            cwd=Path(__file__).resolve().parent,
            capture_output=True,
            text=True,
            timeout=5,
        )
        if out.returncode == 0 and out.stdout.strip():
            return f"{__version__}+{out.stdout.strip()}"
    except (OSError, subprocess.SubprocessError):
        pass
    return __version__


def sha256_file(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


class Run:
    def __init__(self, cfg: dict[str, Any], out: Path):
        self.cfg = cfg
        self.out = out
        self.inputs: list[Path] = []
        self.outputs: list[Path] = []

    def path(self, name: str) -> Path:
        return self.out / name

    def need(self, name: str, command: str) -> Path:
        p = self.path(name)
        if not p.exists():
            raise MissingPrerequisite(p, command)
        self.inputs.append(p)
        return p

    def wrote(self, *paths: Path) -> None:
        self.outputs.extend(paths)

    def write_text(self, name: str, text: str) -> Path:
        p = self.path(name)
        p.parent.mkdir(parents=True, exist_ok=True)
        p.write_text(text)
        self.wrote(p)
        return p

    def manifest(self, command: str) -> Path:
        def rel(p: Path) -> str:
            try:
                return str(p.relative_to(self.out))
            except ValueError:
                return str(p)

        body = {
            "command": command,
            "config_hash": config_hash(self.cfg),
            "seed": self.cfg["seed"],
            "version": version_string(),
            "inputs": {rel(p): sha256_file(p) for p in sorted(set(self.inputs))},
            "artifacts": {rel(p): sha256_file(p) for p in sorted(set(self.outputs))},
        }
        p = self.path(f"manifest_{command.replace('-', '_')}.json")
        p.write_text(json.dumps(body, indent=2, sort_keys=True) + "\n")
        self.path("config.txt").write_text(config_text(self.cfg))
        return p


# ---------------------------------------------------------------------------
# Shared data preparation
# ---------------------------------------------------------------------------


def scenario(cfg) -> synthgen.ScenarioSpec:
    return synthgen.ScenarioSpec(
        lane_count=cfg["lane_count"],
        lane_width=cfg["lane_width"],
        duration=cfg["duration"],
        dt=cfg["dt"],
        vehicle_count=cfg["vehicles"],
        maneuver_mix=cfg["maneuver_mix"],
        speed_range=(cfg["speed_min"], cfg["speed_max"]),
        seed=cfg["seed"],
    )


@dataclass
class Prepared:
    train: list[trajdata.TrajectoryWindow]
    test: list[trajdata.TrajectoryWindow]
    lanes: trajdata.LaneGeometry
    labels: dict[int, str]


def split_vehicles(vehicle_ids, test_fraction: float, seed: int) -> set[int]:
    """Deterministic by-vehicle hold-out set."""
    ids = np.array(sorted(set(int(v) for v in vehicle_ids)))
    rng = np.random.default_rng([seed, 0x5EED])
    n_test = max(1, int(round(test_fraction * len(ids))))
    return set(ids[rng.permutation(len(ids))[:n_test]].tolist())


def prepare(run: Run) -> Prepared:
    cfg = run.cfg
    if cfg["data"]:
        data_path = Path(cfg["data"])
        if not data_path.exists():
            raise ConfigError([f"data file {data_path} does not exist"])
        run.inputs.append(data_path)
        dataset = trajdata.load_trajectories(data_path, cfg["schema"], None if cfg["schema"] != "canonical" else cfg["dt"])
        if cfg["lanes"]:
            run.inputs.append(Path(cfg["lanes"]))
            lanes = trajdata.load_lanes(cfg["lanes"])
        else:
            lanes = trajdata.LaneGeometry.uniform(cfg["lane_count"], cfg["lane_width"])
        labels = {}
    else:
        data_path = run.need("data/data.csv", "generate")
        dataset = trajdata.load_trajectories(data_path, "canonical", cfg["dt"])
        lanes = trajdata.load_lanes(run.need("data/lanes.csv", "generate"))
        labels = synthgen.read_labels(run.need("data/labels.csv", "generate"))
    rule = trajdata.NeighborRule(longitudinal=cfg["neighbor_radius"], max_neighbors=cfg["max_neighbors"])
    windows = trajdata.make_windows(dataset, cfg["T_obs"], cfg["T_pred"], cfg["stride"], rule)
    if not windows:
        raise RuntimeError(f"no windows of length {cfg['T_obs'] + cfg['T_pred']} frames in the dataset")
    windows = [trajdata.normalize(w)[0] for w in windows]
    test_ids = split_vehicles([w.vehicle_id for w in windows], cfg["test_fraction"], cfg["seed"])
    train = [w for w in windows if w.vehicle_id not in test_ids]
    test = [w for w in windows if w.vehicle_id in test_ids]
    if not train or not test:
        raise RuntimeError("train/test split left one side empty; add data or change test_fraction")
    return Prepared(train, test, lanes, labels)


def lane_change_windows(prep: Prepared, windows) -> list[trajdata.TrajectoryWindow]:
    if prep.labels:
        return [w for w in windows if prep.labels.get(w.vehicle_id, "straight") != "straight"]
    half = prep.lanes.offsets[1] - prep.lanes.offsets[0]
    return [w for w in windows if abs(w.future[-1, 1] - w.observed[0, 1]) > half / 2]


def goal_config(cfg) -> gn.GoalNetConfig:
    return gn.GoalNetConfig(
        d_model=cfg["d_model"],
        heads=cfg["heads"],
        blocks=cfg["blocks"],
        ffn=cfg["ffn"],
        lam=cfg["lam"],
        rate=cfg["goal_rate"],
        epochs=cfg["goal_epochs"],
        batch_size=cfg["goal_batch"],
        seed=cfg["seed"] % 2**63,
        basis=cfg["basis"],
    )


def nsf_config(cfg) -> nsf.NSFConfig:
    return nsf.NSFConfig(
        r_col=cfg["r_col"],
        a=cfg["a"],
        eps_line=cfg["eps_line"],
        hidden=cfg["nsf_hidden"],
        rate=cfg["nsf_rate"],
        epochs_phase1=cfg["phase1_epochs"],
        epochs_phase2=cfg["phase2_epochs"],
        batch_size=cfg["nsf_batch"],
        seed=cfg["seed"] % 2**63,
        phase2=cfg["phase2"],
        joint_phase2=cfg["joint_phase2"],
    )


def load_goalnet(run: Run, name: str) -> gn.GoalNet:
    tensors, meta = gnn.load_checkpoint(run.need(name, "train-goal"))
    modes = md.IntentionModeSet(tensors["centers"])
    model = gn.GoalNet(modes, meta["T_obs"], gn.GoalNetConfig(**meta["config"]))
    return gnn.load_module_state(model, tensors).eval()


def load_force(run: Run, name: str) -> nsf.NeuralSocialForce:
    tensors, meta = gnn.load_checkpoint(run.need(name, "train-nsf"))
    model = nsf.NeuralSocialForce(nsf.NSFConfig(**meta["config"]))
    return gnn.load_module_state(model, tensors).eval()


def _curve_csv(rows: list[dict]) -> str:
    cols = list(rows[0]) if rows else []
    lines = [",".join(cols)]
    for r in rows:
        lines.append(",".join(repr(r[c]) if isinstance(r[c], float) else str(r[c]) for c in cols))
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def cmd_generate(run: Run) -> None:
    corpus = synthgen.generate(scenario(run.cfg))
    paths = synthgen.write_corpus(corpus, run.path("data"))
    run.wrote(*paths.values())
    counts = {m: sum(1 for v in corpus.labels.values() if v == m) for m in synthgen.MANEUVERS}
    logger.info("generated %d vehicles %s", len(corpus.labels), counts)


def cmd_cluster(run: Run) -> None:
    prep = prepare(run)
    futures = np.stack([w.future[:, :2] for w in prep.train])
    modes = md.fit_modes(futures, run.cfg["L"], seed=run.cfg["seed"])
    md.save_modes(modes, run.path("modes.csv"), run.cfg["basis"])
    mean = md.fit_modes(futures, 1, seed=run.cfg["seed"])
    md.save_modes(mean, run.path("modes_mean.csv"), run.cfg["basis"])
    run.wrote(*(run.path(n) for n in ("modes.csv", "modes.meta.json", "modes_mean.csv", "modes_mean.meta.json")))
    logger.info("fitted %d modes, populations %s", modes.L, modes.populations)


def cmd_train_goal(run: Run) -> None:
    prep = prepare(run)
    cfg = goal_config(run.cfg)
    for mode_file, ckpt, curve_file in (
        ("modes.csv", "goalnet.ckpt", "goal_loss.csv"),
        ("modes_mean.csv", "goalnet_mean.ckpt", "goal_loss_mean.csv"),
    ):
        run.need(mode_file, "cluster")
        run.need(mode_file.replace(".csv", ".meta.json"), "cluster")
        modes = md.load_modes(run.path(mode_file))
        model, curve = gn.train_goalnet(prep.train, modes, cfg)
        gnn.save_module(run.path(ckpt), model, {"T_obs": model.T_obs, "config": gn.config_dict(cfg)})
        run.wrote(run.path(ckpt))
        run.write_text(curve_file, _curve_csv(curve))
        if curve:
            logger.info("%s: final loss %.4f", ckpt, curve[-1]["loss"])


def cmd_train_nsf(run: Run) -> None:
    prep = prepare(run)
    cfg = nsf_config(run.cfg)
    goals = None
    if run.cfg["nsf_goals"] == "predicted":
        goalnet = load_goalnet(run, "goalnet.ckpt")
        pred, _ = gn.predict_goals(goalnet, prep.train)
        truth = np.stack([w.goal for w in prep.train])
        nearest = np.argmin(((pred - truth[:, None]) ** 2).sum(-1), axis=1)
        goals = pred[np.arange(len(pred)), nearest]
    model, curve, phase1 = nsf.train_nsf(prep.train, prep.lanes, cfg, goals)
    meta = {"config": nsf.config_dict(cfg)}
    gnn.save_module(run.path("nsf.ckpt"), model, meta)
    gnn.save_checkpoint(run.path("nsf_phase1.ckpt"), phase1, meta)
    run.wrote(run.path("nsf.ckpt"), run.path("nsf_phase1.ckpt"))
    run.write_text("nsf_loss.csv", _curve_csv(curve))
    logger.info("trained force model; final loss %.4f", curve[-1]["loss"])


def _eval_models(run: Run):
    return ev.AblationModels(
        goalnet_modes=load_goalnet(run, "goalnet.ckpt"),
        goalnet_mean=load_goalnet(run, "goalnet_mean.ckpt"),
        force_full=load_force(run, "nsf.ckpt"),
        force_goal_only=load_force(run, "nsf_phase1.ckpt"),
    )


def cmd_eval(run: Run) -> None:
    force = load_force(run, "nsf.ckpt")
    goalnet = load_goalnet(run, "goalnet.ckpt")
    prep = prepare(run)
    K = run.cfg["K"]
    model = ev.GNPModel(goalnet, force, True)
    reports = []
    for name, windows in (("all", prep.test), ("lane_change", lane_change_windows(prep, prep.test))):
        if not windows:
            continue
        reports.append(ev.evaluate_best_of_k(model, windows, prep.lanes, K, f"gnp/{name}"))
        reports.append(ev.evaluate_baseline(windows, ev.baseline_cv, f"cv/{name}"))
        reports.append(ev.evaluate_baseline(windows, ev.baseline_ca, f"ca/{name}"))
    run.write_text("eval/report.csv", ev.reports_csv(reports))
    run.write_text("eval/report.txt", ev.reports_table(reports))
    print(ev.reports_table(reports), end="")


def cmd_ablate(run: Run) -> None:
    models = _eval_models(run)
    prep = prepare(run)
    text, rows = [], []
    for name, windows in (("all", prep.test), ("lane_change", lane_change_windows(prep, prep.test))):
        if not windows:
            continue
        reports = ev.run_ablation(models, windows, prep.lanes, run.cfg["K"])
        text.append(f"# {name} ({len(windows)} windows)\n" + ev.ablation_table(reports))
        rows += [ev.MetricReport(**{**r.__dict__, "label": f"{k}/{name}"}) for k, r in reports.items()]
    run.write_text("ablation/ablation.csv", ev.reports_csv(rows))
    run.write_text("ablation/ablation.txt", "\n".join(text))
    print("\n".join(text), end="")


PLOT_KINDS = ("modes", "multimodal", "forces")


def cmd_plot(run: Run, kind: str, svg: str | None, window: int | None, step: int) -> None:
    if kind not in PLOT_KINDS:
        raise ConfigError([f"unknown plot kind {kind!r}; valid kinds: {', '.join(PLOT_KINDS)}"])
    target = Path(svg) if svg else run.path(f"plots/{kind}.svg")
    target.parent.mkdir(parents=True, exist_ok=True)
    if kind == "modes":
        modes = md.load_modes(run.need("modes.csv", "cluster"))
        target.write_text(svgplot.plot_modes(modes.centers, run.cfg["lane_width"]))
        run.wrote(target)
        return
    prep = prepare(run)
    pool = lane_change_windows(prep, prep.test) or prep.test
    w = prep.test[window] if window is not None else pool[0]
    if kind == "multimodal":
        goalnet = load_goalnet(run, "goalnet.ckpt")
        force = load_force(run, "nsf.ckpt")
        _, _, paths = ev.predict_hypotheses(ev.GNPModel(goalnet, force), [w], prep.lanes, run.cfg["K"])
        d = np.sqrt(((paths[0] - w.future[None, :, :2]) ** 2).sum(-1)).mean(-1)
        target.write_text(svgplot.plot_multimodal(w.observed[:, :2], w.future[:, :2], paths[0], int(np.argmin(d))))
        run.wrote(target)
        return
    force = load_force(run, "nsf.ckpt")
    result = nsf.rollout(w, w.goal, force, prep.lanes)
    step = min(max(step, 0), len(result.breakdowns) - 1)
    b = result.breakdowns[step]
    position = result.positions[step - 1] if step > 0 else w.observed[-1, :2]
    nbrs = {
        int(vid): w.neighbors[j, -1, :2] + w.neighbors[j, -1, 2:] * step * w.dt
        for j, vid in enumerate(w.neighbor_ids)
        if w.neighbor_mask[j]
    }
    lanes = trajdata.window_lanes(w, prep.lanes)
    target.write_text(svgplot.plot_forces(b, position, lanes, nbrs))
    stem = target.with_suffix("")
    nsf.export_breakdown(result, f"{stem}_forces.csv", f"{stem}_forces.jsonl")
    run.wrote(target, Path(f"{stem}_forces.csv"), Path(f"{stem}_forces.jsonl"))


COMMANDS = {
    "generate": cmd_generate,
    "cluster": cmd_cluster,
    "train-goal": cmd_train_goal,
    "train-nsf": cmd_train_nsf,
    "eval": cmd_eval,
    "ablate": cmd_ablate,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    # SUPPRESS keeps a subcommand's unset flags from clobbering ones given before it
    common.add_argument("--config", default=argparse.SUPPRESS, help="flat key = value config file")
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="overrides the config seed")
    common.add_argument("--out", default=argparse.SUPPRESS, help="artifact directory (default: ./run)")
    common.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS)
    parser = argparse.ArgumentParser(prog="gnp", description="Goal-based neural physics trajectory prediction.", parents=[common])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common])
    plot = sub.add_parser("plot", parents=[common])
    plot.add_argument("kind", help=f"one of {', '.join(PLOT_KINDS)}")
    plot.add_argument("--svg", default=None, help="output path (default: <out>/plots/<kind>.svg)")
    plot.add_argument("--window", type=int, default=None, help="test window index")
    plot.add_argument("--step", type=int, default=0, help="rollout step for the forces plot")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    verbose = getattr(args, "verbose", False)
    logging.basicConfig(level=logging.DEBUG if verbose else logging.INFO, format="%(levelname)s %(message)s")
    torch.set_num_threads(1)
    try:
        cfg = load_config(getattr(args, "config", None), {"seed": getattr(args, "seed", None)})
        out = Path(getattr(args, "out", "run"))
        out.mkdir(parents=True, exist_ok=True)
        run = Run(cfg, out)
        if args.command == "plot":
            cmd_plot(run, args.kind, args.svg, args.window, args.step)
            run.manifest(f"plot-{args.kind}")
        else:
            COMMANDS[args.command](run)
            run.manifest(args.command)
    except ConfigError as exc:
        print(f"gnp: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (MissingPrerequisite, RuntimeError, ValueError, OSError) as exc:
        print(f"gnp {args.command}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
