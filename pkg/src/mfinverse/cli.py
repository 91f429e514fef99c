"""Command-line runner: dataset -> train -> refine -> optimize -> report,
plus an analytic-solution dump for solver checks.

Every pipeline subcommand reads one TOML experiment file (schema_version 1);
the working directory can be overridden with MFINVERSE_WORKDIR. Errors leave
a machine-readable JSON object on stderr and a nonzero exit code.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from pathlib import Path

import numpy as np
import tomli

from . import diffusion
from .core import Bounds
from .dataset import load_dataset, save_dataset
from .harness import (
    ExperimentConfig,
    build_problem_dataset,
    emit_report,
    execute_runs,
    load_report,
    make_targets,
    plot_table,
    refine_bounds,
    sfr_hf_evaluator,
    airfoil_baseline,
    train_surrogate,
    SCHEMA_VERSION,
)
from .refine import RefinedBounds
from .surrogate import SurrogateModel
from . import airfoil


def load_config(path) -> tuple[ExperimentConfig, Path]:
    with open(path, "rb") as fh:
        doc = tomli.load(fh)
    version = doc.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ValueError(f"unsupported schema_version {version!r}")
    exp = doc.get("experiment", {})
    cfg = ExperimentConfig(**exp)
    workdir = os.environ.get("MFINVERSE_WORKDIR") or doc.get("paths", {}).get(
        "workdir", "."
    )
    return cfg, Path(workdir)


def dataset_path(workdir: Path, cfg: ExperimentConfig) -> Path:
    return workdir / f"dataset_{cfg.problem}_n{cfg.dataset_size}.csv"


def model_path(workdir: Path, cfg: ExperimentConfig) -> Path:
    return workdir / f"model_{cfg.problem}_n{cfg.dataset_size}.json"


def refine_path(workdir: Path, cfg: ExperimentConfig) -> Path:
    name = f"refine_{cfg.problem}_{cfg.target}_n{cfg.dataset_size}"
    if cfg.problem == "AID":
        name += f"_eta{cfg.eta:g}"
    return workdir / (name + ".json")


def cmd_dataset(args) -> int:
    cfg, workdir = load_config(args.config)
    workdir.mkdir(parents=True, exist_ok=True)
    data = build_problem_dataset(cfg.problem, cfg.dataset_size, cfg.seed)
    out = dataset_path(workdir, cfg)
    save_dataset(data, out)
    print(out)
    return 0


def cmd_train(args) -> int:
    cfg, workdir = load_config(args.config)
    data = load_dataset(dataset_path(workdir, cfg))
    model = train_surrogate(data, cfg.problem, seed=cfg.seed)
    out = model_path(workdir, cfg)
    model.save(out)
    print(out, f"cv_rmse={model.cv_rmse:.6g}")
    return 0


def cmd_refine(args) -> int:
    cfg, workdir = load_config(args.config)
    model = SurrogateModel.load(model_path(workdir, cfg))
    bundle = make_targets(cfg.problem, cfg.target)
    refined = refine_bounds(
        cfg.problem, model, bundle, n_runs=cfg.refine_runs, seed=cfg.seed, eta=cfg.eta
    )
    from .harness import optimization_bounds

    out = refine_path(workdir, cfg)
    refined.save(out, optimization_bounds(cfg.problem))
    print(out)
    return 0


def load_refined(path) -> RefinedBounds:
    doc = json.loads(Path(path).read_text())
    bounds = Bounds(np.asarray(doc["lb_R"]), np.asarray(doc["ub_R"]))
    meta = {k: v for k, v in doc.items() if k not in ("lb_R", "ub_R", "strategy")}
    return RefinedBounds(bounds=bounds, strategy=doc["strategy"], meta=meta)


def cmd_optimize(args) -> int:
    cfg, workdir = load_config(args.config)
    bundle = make_targets(cfg.problem, cfg.target)
    if cfg.problem == "SFR":
        hf = sfr_hf_evaluator()
    else:
        basis, _, _ = airfoil_baseline()
        hf = airfoil.AirfoilEvaluator(basis, "HF", target_s=bundle.target_s)

    model = refined = None
    if cfg.enhanced:
        model = SurrogateModel.load(model_path(workdir, cfg))
        if not cfg.use_original_bounds:
            refined = load_refined(refine_path(workdir, cfg))

    traces_dir = workdir / f"traces_{cfg.stem}"
    report = execute_runs(cfg, bundle, hf, model, refined, traces_dir=traces_dir)
    csv_path, json_path = emit_report(report, workdir / f"summary_{cfg.stem}")
    print(csv_path)
    print(json_path)
    return 0


def cmd_report(args) -> int:
    workdir = Path(os.environ.get("MFINVERSE_WORKDIR") or args.workdir)
    prefixes = sorted(p.with_suffix("") for p in workdir.glob("summary_*.json"))
    if not prefixes:
        raise FileNotFoundError(f"no summaries under {workdir}")
    reports = [load_report(p) for p in prefixes]
    table = plot_table(reports)
    out = workdir / "report_table.csv"
    with open(out, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(table[0].keys()))
        writer.writeheader()
        writer.writerows(table)
    print(out)
    return 0


def cmd_oracle(args) -> int:
    grid_rows = args.points
    y = np.linspace(0.0, args.height, grid_rows)
    s = diffusion.slab_profile(y, args.t, args.value, height=args.height,
                               diffusivity=args.diffusivity)
    out = Path(args.out)
    with open(out, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["y", "s"])
        for yi, si in zip(y, s):
            writer.writerow([repr(float(yi)), repr(float(si))])
    print(out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mfinverse", description="multi-fidelity inverse design experiments"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    for name, fn, help_text in [
        ("dataset", cmd_dataset, "generate low-fidelity training data"),
        ("train", cmd_train, "cross-validate and train the surrogate"),
        ("refine", cmd_refine, "compress the optimization bounds"),
        ("optimize", cmd_optimize, "run the budgeted experiment repeats"),
    ]:
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="experiment TOML file")
        p.set_defaults(fn=fn)

    p = sub.add_parser("report", help="aggregate summaries into a plot table")
    p.add_argument("--workdir", default=".", help="directory holding summaries")
    p.set_defaults(fn=cmd_report)

    p = sub.add_parser("oracle", help="dump the analytic slab profile")
    p.add_argument("--t", type=float, default=0.1)
    p.add_argument("--value", type=float, default=10.0, help="held boundary value")
    p.add_argument("--height", type=float, default=diffusion.DOMAIN_HEIGHT)
    p.add_argument("--diffusivity", type=float, default=1.0)
    p.add_argument("--points", type=int, default=101)
    p.add_argument("--out", default="oracle.csv")
    p.set_defaults(fn=cmd_oracle)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except Exception as exc:  # surface a machine-readable error object
        json.dump({"error": str(exc), "type": type(exc).__name__}, sys.stderr)
        sys.stderr.write("\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
