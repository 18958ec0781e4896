"""Command-line front end.

Every command resolves its configuration from built-in defaults, an optional
YAML file (--config), and command-line flags, in that order (flags win), then
echoes the resolved values so runs are reproducible from the log alone.

Exit codes: 0 success, 2 config or schema error, 3 I/O error, 4 missing
artifact, 5 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import os
import shutil
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import yaml

from . import data, metrics, ranking, scale
from .diffusion import (
    TrainConfig,
    export_spatial_features,
    fast_profile,
    load_model,
    sample_trajectory,
    train,
)
from .diffusion.process import PRIOR_STD, RESIDUAL_SCALE
from .errors import SchemaError
from .spline import BASELINE_MODES, SparseObservations, build_baseline

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_MISSING = 4
EXIT_NUMERIC = 5

_MODE_ALIASES = {"catmull-rom": "catmull_rom", "catmull_rom": "catmull_rom",
                 "linear": "linear"}


def _parse_int_list(text):
    if isinstance(text, (list, tuple)):
        return [int(v) for v in text]
    items = [part.strip() for part in str(text).split(",") if part.strip()]
    if not items:
        raise SchemaError(f"empty integer list {text!r}")
    return [int(part) for part in items]


def _load_yaml_config(path):
    with open(path) as fh:
        try:
            loaded = yaml.safe_load(fh)
        except yaml.YAMLError as exc:
            raise SchemaError(f"config file {path} is not valid YAML: {exc}") from exc
    if loaded is None:
        return {}
    if not isinstance(loaded, dict):
        raise SchemaError(f"config file {path} must hold a mapping")
    return {str(k).replace("-", "_"): v for k, v in loaded.items()}


def resolve_config(args, defaults: dict) -> dict:
    """defaults <- config file <- explicit flags; flags win."""
    resolved = dict(defaults)
    if getattr(args, "config", None):
        file_values = _load_yaml_config(args.config)
        unknown = set(file_values) - set(defaults)
        if unknown:
            raise SchemaError(
                f"unknown config keys {sorted(unknown)}; valid: {sorted(defaults)}"
            )
        resolved.update(file_values)
    for key in defaults:
        value = getattr(args, key, None)
        if value is not None:
            resolved[key] = value
    return resolved


def echo_config(command: str, config: dict) -> None:
    for key in sorted(config):
        print(f"config {command}.{key} = {config[key]}")


def _read_observations(path, n_frames):
    obs = data.read_observations_csv(path, n_frames=n_frames)
    return obs


def cmd_gen_data(config) -> int:
    params = data.SyntheticSceneParams(
        n_frames=int(config["frames"]),
        frame_rate=float(config["frame_rate"]),
    )
    strides = _parse_int_list(config["strides"])
    root = config["out"]
    os.makedirs(root, exist_ok=True)
    for i in range(int(config["scenes"])):
        scene_id = f"scene_{i:03d}"
        try:
            gt = data.generate_scene(params, seed=int(config["seed"]) + i)
            data.write_scene(root, scene_id, gt, strides)
        except BaseException:
            shutil.rmtree(data.scene_dir(root, scene_id), ignore_errors=True)
            raise
        print(f"wrote {data.scene_dir(root, scene_id)}")
    return EXIT_OK


def _load_dataset(root):
    names = data.list_scenes(root)
    if not names:
        raise FileNotFoundError(f"no scenes under {root!r}")
    return [
        data.read_trajectory_csv(os.path.join(root, name, data.GT_FILENAME))
        for name in names
    ]


def cmd_train(config) -> int:
    if config["profile"] == "fast":
        base = fast_profile()
    elif config["profile"] == "default":
        base = TrainConfig()
    else:
        raise SchemaError(f"unknown profile {config['profile']!r}")
    overrides = {}
    for key in ("iterations", "t_diff"):
        if config[key] is not None:
            overrides[key] = int(config[key])
    if config["learning_rate"] is not None:
        overrides["learning_rate"] = float(config["learning_rate"])
    if config["schedule"] is not None:
        overrides["schedule_kind"] = str(config["schedule"])
    train_cfg = TrainConfig(**{**base.__dict__, **overrides,
                               "seed": int(config["seed"])})
    dataset = _load_dataset(config["data"])
    log_path = config["log"] or (str(config["out"]) + ".log.jsonl")
    _, history = train(dataset, train_cfg, config["out"], log_path=log_path)
    print(f"trained {train_cfg.iterations} iterations on {len(dataset)} scenes")
    print(f"final loss {history[-1]['loss']:.6f}")
    print(f"checkpoint {config['out']}")
    print(f"log {log_path}")
    return EXIT_OK


def cmd_baseline(config) -> int:
    mode = _MODE_ALIASES.get(str(config["mode"]))
    if mode not in BASELINE_MODES:
        raise SchemaError(f"mode must be one of {sorted(_MODE_ALIASES)}")
    n_frames = None if config["frames"] is None else int(config["frames"])
    obs = _read_observations(config["obs"], n_frames)
    traj = build_baseline(obs, mode=mode)
    data.write_trajectory_csv(config["out"], traj)
    print(f"wrote {config['out']} ({len(traj)} frames, mode {mode})")
    return EXIT_OK


def cmd_sample(config) -> int:
    params, schedule, extra = load_model(config["model"])
    n_frames = None if config["frames"] is None else int(config["frames"])
    obs = _read_observations(config["obs"], n_frames)
    out = sample_trajectory(params, obs, schedule, seed=int(config["seed"]),
                            residual_scale=extra.get("residual_scale", RESIDUAL_SCALE),
                            prior_std=extra.get("prior_std", PRIOR_STD))
    data.write_trajectory_csv(config["out"], out.trajectory)
    print(f"wrote {config['out']} ({len(out.trajectory)} frames, "
          f"{schedule.t_diff} denoising steps)")
    return EXIT_OK


def cmd_export_features(config) -> int:
    params, schedule, extra = load_model(config["model"])
    n_frames = None if config["frames"] is None else int(config["frames"])
    obs = _read_observations(config["obs"], n_frames)
    out = sample_trajectory(params, obs, schedule, seed=int(config["seed"]),
                            residual_scale=extra.get("residual_scale", RESIDUAL_SCALE),
                            prior_std=extra.get("prior_std", PRIOR_STD))
    if config["indices"] is None:
        indices = np.arange(len(out.trajectory))
    else:
        indices = np.asarray(_parse_int_list(config["indices"]), dtype=np.int64)
    records = export_spatial_features(out, indices)
    width = records.shape[1] - 7
    header = "frame,tx,ty,tz,qw,qx,qy,qz," + ",".join(
        f"f{j:03d}" for j in range(width)
    )
    with open(config["out"], "w") as fh:
        fh.write(header + "\n")
        for frame, row in zip(indices, records):
            fh.write(str(int(frame)) + "," +
                     ",".join(f"{v:.17g}" for v in row) + "\n")
    print(f"wrote {config['out']} ({records.shape[0]} records, "
          f"{records.shape[1]} values each)")
    return EXIT_OK


def _eval_one(pred_path, gt_path):
    pred = data.read_trajectory_csv(pred_path)
    gt = data.read_trajectory_csv(gt_path)
    return metrics.evaluate_pair(pred, gt)


def cmd_eval(config) -> int:
    pred_path, gt_path = config["pred"], config["gt"]
    if os.path.isdir(pred_path):
        names = data.list_scenes(gt_path)
        pairs = []
        for name in names:
            candidate = os.path.join(pred_path, f"{name}.csv")
            if os.path.isfile(candidate):
                pairs.append(
                    (name, candidate, os.path.join(gt_path, name, data.GT_FILENAME))
                )
        if not pairs:
            raise FileNotFoundError(
                f"no <scene>.csv files in {pred_path!r} matching scenes in {gt_path!r}"
            )
        with ThreadPoolExecutor(max_workers=min(8, os.cpu_count() or 1)) as pool:
            reports = list(pool.map(lambda p: _eval_one(p[1], p[2]), pairs))
        for (name, _, _), report in zip(pairs, reports):
            print(f"{name}: mean_euclidean_cm {report.mean_euclidean_cm:.3f} "
                  f"recall_075 {report.recall_075_pct:.1f}%")
        summary = metrics.mean_report(reports)
        payload = {
            "scenes": {name: rep.to_dict() for (name, _, _), rep in zip(pairs, reports)},
            "mean": summary.to_dict(),
        }
    else:
        summary = _eval_one(pred_path, gt_path)
        payload = summary.to_dict()
    print("mean over scenes:" if os.path.isdir(pred_path) else "report:")
    print(summary.to_text())
    if config["out"]:
        with open(config["out"], "w") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
        print(f"wrote {config['out']}")
    return EXIT_OK


def cmd_rank(config) -> int:
    judgments = ranking.read_judgments(config["judgments"])
    matrix = ranking.build_matrix(judgments)
    result = ranking.bt_fit(matrix)
    scores = ranking.bt_scores(result)
    for name in matrix.methods:
        print(f"{name}: pi {result.pi[list(matrix.methods).index(name)]:.6f} "
              f"score {scores[name]:.6f}")
    if not result.converged:
        print(f"warning: not converged after {result.iterations} iterations")
    if config["out"]:
        with open(config["out"], "w") as fh:
            json.dump({"scores": scores, "iterations": result.iterations,
                       "converged": result.converged}, fh, indent=2, sort_keys=True)
        print(f"wrote {config['out']}")
    return EXIT_OK


def cmd_sls(config) -> int:
    inputs = metrics.SlsInputs(
        recall_75_pct=float(config["r75"]),
        rotation_score_pct=float(config["rotation"]),
        bt_score_pct=float(config["bt"]),
    )
    print(f"sls {metrics.sls(inputs):.1f}")
    return EXIT_OK


def cmd_align_scale(config) -> int:
    ref, rec = scale.read_distance_pairs(config["pairs"])
    estimate = scale.estimate_scale(ref, rec, use_median=bool(config["use_median"]))
    print(f"scale multiplier {estimate.multiplier:.12g} "
          f"({len(estimate.ratios)} ratios, {estimate.n_rejected} rejected, "
          f"{estimate.aggregate})")
    if config["traj"]:
        if not config["out"]:
            raise SchemaError("--out is required when --traj is given")
        traj = data.read_trajectory_csv(config["traj"])
        data.write_trajectory_csv(config["out"], scale.apply_scale(traj, estimate.multiplier))
        print(f"wrote {config['out']}")
    return EXIT_OK


_COMMANDS = {
    "gen-data": (
        cmd_gen_data,
        {"scenes": 10, "frames": 128, "frame_rate": 30.0,
         "strides": "5,10,15", "out": "scenes", "seed": 0},
    ),
    "train": (
        cmd_train,
        {"data": "scenes", "out": "model.htrd", "log": None, "profile": "fast",
         "iterations": None, "learning_rate": None, "t_diff": None,
         "schedule": None, "seed": 0},
    ),
    "baseline": (
        cmd_baseline,
        {"obs": None, "mode": "catmull-rom", "frames": None,
         "out": "baseline.csv", "seed": 0},
    ),
    "sample": (
        cmd_sample,
        {"model": "model.htrd", "obs": None, "frames": None,
         "out": "pred.csv", "seed": 0},
    ),
    "export-features": (
        cmd_export_features,
        {"model": "model.htrd", "obs": None, "frames": None, "indices": None,
         "out": "features.csv", "seed": 0},
    ),
    "eval": (
        cmd_eval,
        {"pred": None, "gt": None, "out": None, "seed": 0},
    ),
    "rank": (
        cmd_rank,
        {"judgments": None, "out": None, "seed": 0},
    ),
    "sls": (
        cmd_sls,
        {"r75": None, "rotation": None, "bt": None, "seed": 0},
    ),
    "align-scale": (
        cmd_align_scale,
        {"pairs": None, "traj": None, "use_median": False, "out": None, "seed": 0},
    ),
}

_REQUIRED = {
    "baseline": ("obs",),
    "sample": ("obs",),
    "export-features": ("obs",),
    "eval": ("pred", "gt"),
    "rank": ("judgments",),
    "sls": ("r75", "rotation", "bt"),
    "align-scale": ("pairs",),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="trajdiff",
        description="Camera-trajectory densification by residual denoising "
                    "over spline interpolation, plus its evaluation suite.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (func, defaults) in _COMMANDS.items():
        p = sub.add_parser(name)
        p.set_defaults(func=func, defaults=defaults)
        p.add_argument("--config", help="YAML file with defaults for this command")
        for key, default in defaults.items():
            flag = "--" + key.replace("_", "-")
            if key == "use_median":
                p.add_argument(flag, dest=key, action="store_const", const=True,
                               default=None, help="aggregate ratios by median")
            else:
                p.add_argument(flag, dest=key, default=None,
                               help=f"default: {default}")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = resolve_config(args, args.defaults)
        missing = [k for k in _REQUIRED.get(args.command, ()) if config.get(k) is None]
        if missing:
            raise SchemaError(
                f"{args.command} needs {', '.join('--' + m.replace('_', '-') for m in missing)}"
            )
        echo_config(args.command, config)
        return args.func(config)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MISSING
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ArithmeticError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
