"""Command-line interface.

Subcommands: register, generate, evaluate, phantom, metrics, exp.
Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from . import __version__
from . import io as asio
from . import metrics as M
from .errors import DataError, NumericError
from .pipeline import (
    DEFAULT_INITIAL_S,
    MEAN_COMBINATION,
    PipelineParams,
    SubjectPair,
    emit_manifest,
    plan_generation,
    run_subject,
)
from .phantom import PhantomSpec, make_phantom
from .registration import DemonsParams, estimate_svf
from .svf import EULER, SCALING_SQUARING, IntegrationParams, exp_field
from .volume import VELOCITY, normalize_intensity

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="agingsynth",
        description="Synthesize subject-specific aging MRI sequences from an image pair.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("register", help="estimate a velocity field for an image pair")
    p.add_argument("moving")
    p.add_argument("fixed")
    p.add_argument("-o", "--out", required=True, help="output velocity field (.nii/.nii.gz)")
    p.add_argument("--iterations", type=int, default=200)
    p.add_argument("--levels", type=int, default=3)
    p.add_argument("--update-sigma", type=float, default=2.0)
    p.add_argument("--field-sigma", type=float, default=1.0)
    p.add_argument("--step-scale", type=float, default=0.5)
    p.add_argument("--normalize", action="store_true",
                   help="rescale input intensities to [0, 1] before registration")

    p = sub.add_parser("generate", help="run the full generation pipeline from a config file")
    p.add_argument("--config", required=True, help="JSON run configuration")
    p.add_argument("--out", help="output directory (overrides the config)")
    p.add_argument("--jobs", type=int, default=1,
                   help="concurrent subjects in batch mode (default 1)")

    p = sub.add_parser("evaluate", help="match generated frames against ground-truth images")
    p.add_argument("manifest")
    p.add_argument("ground_truth", help="JSON listing of ground-truth items")
    p.add_argument("-o", "--out", required=True, help="report output directory")

    p = sub.add_parser("phantom", help="write a synthetic aging phantom series")
    p.add_argument("--ages", type=float, nargs="+", required=True)
    p.add_argument("-o", "--out", required=True)
    p.add_argument("--dims", type=int, nargs=3, default=(64, 64, 64))
    p.add_argument("--cavity-radius", type=float, default=5.0)
    p.add_argument("--growth", type=float, default=0.3, help="cavity growth, voxels/year")
    p.add_argument("--base-age", type=float, default=60.0)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("metrics", help="pairwise similarity between two volumes")
    p.add_argument("a")
    p.add_argument("b")
    p.add_argument("--labels", nargs=2, metavar=("LA", "LB"),
                   help="label volumes for the Dice score")
    p.add_argument("--metric", choices=(*M.ALL_METRICS, "all"), default="all")

    p = sub.add_parser("exp", help="exponentiate a velocity field to a displacement field")
    p.add_argument("field", help="velocity field (.nii/.nii.gz)")
    p.add_argument("-t", "--time", type=float, required=True)
    p.add_argument("-o", "--out", required=True)
    p.add_argument("--steps-per-unit", type=int, default=32)
    p.add_argument("--method", choices=(EULER, SCALING_SQUARING), default=EULER)
    return parser


# ---------------------------------------------------------------------------
# generate

def _subject_config(entry: dict, defaults: dict, cfg_dir: Path) -> dict:
    merged = dict(defaults)
    merged.update(entry)
    for key in ("subject_id", "moving", "fixed", "age_moving", "age_fixed"):
        if key not in merged:
            raise DataError(f"run config is missing the {key!r} field")
    merged["_dir"] = cfg_dir
    return merged


def _load_run_config(path: Path) -> list[dict]:
    if not path.exists():
        raise DataError(f"file not found: {path}")
    try:
        cfg = json.loads(path.read_text())
    except json.JSONDecodeError as e:
        raise DataError(f"{path}: parse error at line {e.lineno}: {e.msg}") from e
    defaults = cfg.get("defaults", {})
    if "subjects" in cfg:
        entries = cfg["subjects"]
        if not entries:
            raise DataError(f"{path}: empty subject list")
    else:
        entries = [cfg]
    return [_subject_config(e, defaults, path.parent) for e in entries]


def _pipeline_params(cfg: dict) -> PipelineParams:
    try:
        integration = IntegrationParams(steps_per_unit=int(cfg.get("steps_per_unit", 32)))
        demons = DemonsParams(**cfg.get("demons", {}))
    except TypeError as e:
        raise DataError(f"invalid parameter in run config: {e}") from e
    return PipelineParams(
        integration=integration,
        stopping_metric=str(cfg.get("stopping_metric", MEAN_COMBINATION)),
        demons=demons,
    )


def _run_one_subject(cfg: dict, outroot: Path) -> dict:
    base = cfg["_dir"]
    moving = asio.read_volume(base / cfg["moving"])
    fixed = asio.read_volume(base / cfg["fixed"])
    if cfg.get("normalize"):
        moving = normalize_intensity(moving)
        fixed = normalize_intensity(fixed)
    labels = None
    if cfg.get("labels_moving"):
        labels = asio.read_label_volume(base / cfg["labels_moving"])
    pair = SubjectPair(
        subject_id=str(cfg["subject_id"]),
        moving=moving,
        age_moving=float(cfg["age_moving"]),
        fixed=fixed,
        age_fixed=float(cfg["age_fixed"]),
        labels_moving=labels,
    )
    initial_s = float(cfg.get("initial_s", DEFAULT_INITIAL_S))
    plan = plan_generation(pair, initial_s)
    params = _pipeline_params(cfg)
    velocity = None
    if cfg.get("velocity"):
        velocity = base / cfg["velocity"]
    curves: list = []
    frames, report = run_subject(pair, plan, velocity=velocity, params=params,
                                 curves_out=curves)
    s_adj = (report.mean_s if params.stopping_metric == MEAN_COMBINATION
             else report.best_t[params.stopping_metric])
    hashable = {k: v for k, v in cfg.items() if k != "_dir"}
    subject_dir = outroot / pair.subject_id
    emit_manifest(frames, report, subject_dir, pair.subject_id, s_adj,
                  config=hashable, curves=curves)
    return {
        "subject_id": pair.subject_id,
        "adjusted_s": s_adj,
        "n_frames": len(frames),
        "outdir": str(subject_dir),
    }


def cmd_generate(args) -> int:
    configs = _load_run_config(Path(args.config))
    outroot = Path(args.out) if args.out else None
    if outroot is None:
        declared = {c.get("output") for c in configs}
        if len(declared) != 1 or None in declared:
            raise DataError("no output directory: pass --out or set 'output' in the config")
        outroot = configs[0]["_dir"] / declared.pop()
    jobs = max(1, args.jobs)
    if jobs == 1 or len(configs) == 1:
        results = [_run_one_subject(cfg, outroot) for cfg in configs]
    else:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(lambda c: _run_one_subject(c, outroot), configs))
    for r in results:
        print(f"{r['subject_id']}: adjusted s = {r['adjusted_s']:.4f}, "
              f"{r['n_frames']} frames -> {r['outdir']}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# other commands

def cmd_register(args) -> int:
    moving = asio.read_volume(Path(args.moving))
    fixed = asio.read_volume(Path(args.fixed))
    if args.normalize:
        moving = normalize_intensity(moving)
        fixed = normalize_intensity(fixed)
    params = DemonsParams(
        iterations=args.iterations,
        update_smoothing_sigma=args.update_sigma,
        field_smoothing_sigma=args.field_sigma,
        step_scale=args.step_scale,
        multiresolution_levels=args.levels,
    )
    field = estimate_svf(moving, fixed, params)
    asio.write_vector_field(field, Path(args.out))
    print(f"velocity field written to {args.out}")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    from .evaluation import evaluate_manifest, write_report

    report = evaluate_manifest(Path(args.manifest), Path(args.ground_truth))
    json_path, csv_path = write_report(report, Path(args.out))
    for metric, rmse in sorted(report.age_rmse.items()):
        print(f"age RMSE [{metric}]: {rmse:.4f} years")
    print(f"report written to {json_path} and {csv_path}")
    return EXIT_OK


def cmd_phantom(args) -> int:
    spec = PhantomSpec(
        dims=tuple(args.dims),
        cavity_radius=args.cavity_radius,
        growth_per_year=args.growth,
        base_age=args.base_age,
        seed=args.seed,
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    items = []
    for age in args.ages:
        vol, lab = make_phantom(spec, age)
        img_name = f"phantom_{age:g}.nii.gz"
        lab_name = f"phantom_{age:g}_labels.nii.gz"
        asio.write_volume(vol, out / img_name)
        asio.write_label_volume(lab, out / lab_name)
        items.append({"path": img_name, "labels": lab_name, "true_age": age,
                      "tag": "phantom"})
    (out / "listing.json").write_text(
        json.dumps({"items": items}, indent=2, sort_keys=True) + "\n"
    )
    print(f"{len(items)} phantom(s) written to {out}")
    return EXIT_OK


def cmd_metrics(args) -> int:
    a = asio.read_volume(Path(args.a))
    b = asio.read_volume(Path(args.b))
    labels_a = labels_b = None
    if args.labels:
        labels_a = asio.read_label_volume(Path(args.labels[0]))
        labels_b = asio.read_label_volume(Path(args.labels[1]))
    wanted = M.ALL_METRICS if args.metric == "all" else (args.metric,)
    for metric in wanted:
        if metric == M.DSC and labels_a is None:
            if args.metric == M.DSC:
                raise DataError("dsc requires --labels")
            continue
        try:
            value = M.compute(metric, a, b, labels_a, labels_b).value
        except NumericError as e:
            if metric == M.PSNR and "unbounded" in str(e):
                value = math.inf
            else:
                raise
        print(f"{metric}: {value:.10g}")
    return EXIT_OK


def cmd_exp(args) -> int:
    field = asio.read_vector_field(Path(args.field), kind=VELOCITY)
    params = IntegrationParams(steps_per_unit=args.steps_per_unit, method=args.method)
    disp = exp_field(field, args.time, params)
    asio.write_vector_field(disp, Path(args.out))
    print(f"displacement at t={args.time:g} written to {args.out}")
    return EXIT_OK


_COMMANDS = {
    "register": cmd_register,
    "generate": cmd_generate,
    "evaluate": cmd_evaluate,
    "phantom": cmd_phantom,
    "metrics": cmd_metrics,
    "exp": cmd_exp,
}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        # argparse uses status 2 for usage problems; remap per our contract
        return EXIT_USAGE if e.code == 2 else (e.code or EXIT_OK)
    try:
        return _COMMANDS[args.command](args)
    except NumericError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    except DataError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DATA
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
