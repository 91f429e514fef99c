"""Experiment harness: targets, artifact wiring, budgeted runs, summaries.

An experiment compares a budgeted optimizer against the target of one demo
problem, either plain (original bounds, every evaluation expensive) or
ML-enhanced (refined bounds plus the surrogate gate). Repeats run with paired
per-repeat seeds so enhanced and plain variants are directly comparable.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field, asdict
from functools import lru_cache
from pathlib import Path

import numpy as np

from . import airfoil, diffusion
from .core import Array, Bounds, EvaluationBudget, TargetSpec, rng_from
from .dataset import Dataset, build_dataset, generate_bc
from .gate import GateConfig, make_gated_hook, make_hf_hook
from .optimizers import (
    OptimizeResult,
    PsoConfig,
    ShadeConfig,
    pso_run,
    shade_run,
    trace_to_csv,
)
from .refine import RefinedBounds, aid_refine, collect_solutions, sfr_refine
from .surrogate import MlpConfig, SurrogateModel, fit_with_cv

SCHEMA_VERSION = 1

SFR_TARGET_PARAMS = {
    # branch id and coefficients of the boundary-profile family
    "sinusoidal": (2, (4.0, 4.0, 5.5)),
    "linear": (0, (10.0, 0.5)),
}
AID_TARGET_SCALES = {
    # (lower-surface, upper-surface) multipliers of the baseline coefficients
    "cambered": (0.9, 1.8),
    "thick": (1.6, 1.6),
}


@lru_cache(maxsize=1)
def airfoil_baseline():
    """Basis and baseline coefficients shared by every AID component."""
    basis, c_lower, c_upper = airfoil.fit_baseline(airfoil.naca0012_points())
    return basis, c_lower, c_upper


def optimization_bounds(problem: str) -> Bounds:
    """Original (unrefined) bounds of the budgeted search."""
    problem = problem.upper()
    if problem == "SFR":
        hf_nx = diffusion.Grid.hf().nx
        return Bounds(np.zeros(hf_nx), np.full(hf_nx, diffusion.BC_UPPER))
    if problem == "AID":
        basis, c_lower, c_upper = airfoil_baseline()
        return airfoil.original_bounds(c_lower, c_upper)
    raise ValueError(f"unknown problem {problem!r}")


def surrogate_bounds(problem: str) -> Bounds:
    """Bounds of the surrogate's input space (the refinement search space)."""
    problem = problem.upper()
    if problem == "SFR":
        lf_nx = diffusion.Grid.lf().nx
        return Bounds(np.zeros(lf_nx), np.full(lf_nx, diffusion.BC_UPPER))
    return optimization_bounds(problem)


def sfr_hf_evaluator(precompute: bool = True) -> diffusion.DiffusionEvaluator:
    return diffusion.DiffusionEvaluator(
        diffusion.Grid.hf(), diffusion.DiffusionConfig(), precompute=precompute
    )


def sfr_lf_evaluator(precompute: bool = True) -> diffusion.DiffusionEvaluator:
    return diffusion.DiffusionEvaluator(
        diffusion.Grid.lf(), diffusion.DiffusionConfig(), precompute=precompute
    )


@dataclass
class TargetBundle:
    """Target spec plus the ground truth it was generated from."""

    problem: str
    kind: str
    target: TargetSpec
    truth: Array  # boundary profile (SFR) or design coefficients (AID)
    target_s: Array | None = None  # pressure sample locations (AID)


def make_targets(problem: str, kind: str, hf_evaluator=None) -> TargetBundle:
    """Build a demo target and keep its ground truth for containment checks.

    SFR: a named boundary-profile family member is solved at high fidelity and
    probe-sampled (reduction max). AID: a scaled-baseline reference design is
    evaluated and its negated pressure distribution becomes the target, so the
    summary of interest (minimum pressure) is again the vector maximum.
    """
    problem = problem.upper()
    if problem == "SFR":
        if kind not in SFR_TARGET_PARAMS:
            raise ValueError(f"unknown SFR target {kind!r}")
        branch, coeffs = SFR_TARGET_PARAMS[kind]
        truth = generate_bc(
            lf_n=diffusion.Grid.hf().nx,
            rng=rng_from(0, "target", kind),
            branch=branch,
            coeffs=coeffs,
            sigma=0.0,
            reverse=False,
        )
        evaluator = hf_evaluator if hf_evaluator is not None else sfr_hf_evaluator()
        t_vec = evaluator.evaluate(truth)
        return TargetBundle(problem, kind, TargetSpec(t_vec, "max"), truth)

    if problem == "AID":
        if kind not in AID_TARGET_SCALES:
            raise ValueError(f"unknown AID target {kind!r}")
        basis, c_lower, c_upper = airfoil_baseline()
        lo_scale, up_scale = AID_TARGET_SCALES[kind]
        truth = np.concatenate([lo_scale * c_lower, up_scale * c_upper])
        evaluator = hf_evaluator if hf_evaluator is not None else airfoil.AirfoilEvaluator(basis, "HF")
        dist = evaluator.cp_distribution(truth)
        return TargetBundle(
            problem, kind, TargetSpec(-dist.cp, "max"), truth, target_s=dist.s
        )
    raise ValueError(f"unknown problem {problem!r}")


def surrogate_config(problem: str) -> MlpConfig:
    return MlpConfig.sfr_default() if problem.upper() == "SFR" else MlpConfig.aid_default()


def build_problem_dataset(problem: str, n: int, seed: int) -> Dataset:
    """Low-fidelity training data for one problem at the requested size."""
    problem = problem.upper()
    if problem == "SFR":
        labeler = sfr_lf_evaluator().peak
        return build_dataset("SFR", n, labeler, seed)
    basis, c_lower, c_upper = airfoil_baseline()
    lf = airfoil.AirfoilEvaluator(basis, "LF")
    return build_dataset("AID", n, lf.peak, seed, bounds=optimization_bounds("AID"))


def refine_bounds(
    problem: str,
    model: SurrogateModel,
    bundle: TargetBundle,
    n_runs: int = 150,
    seed: int = 0,
    eta: float = 1.3,
) -> RefinedBounds:
    """Surrogate-only boundary refinement for one target."""
    problem = problem.upper()
    solutions = collect_solutions(
        model, bundle.target, surrogate_bounds(problem), n_runs=n_runs, seed=seed
    )
    if problem == "SFR":
        return sfr_refine(solutions, hf_dim=optimization_bounds("SFR").dim)
    return aid_refine(solutions, eta, optimization_bounds("AID"))


@dataclass(frozen=True)
class ExperimentConfig:
    """One experiment row: problem, target, optimizer, enhancement settings."""

    problem: str = "SFR"
    target: str = "sinusoidal"
    optimizer: str = "PSO"  # or "DE"
    enhanced: bool = False
    dataset_size: int = 1000
    c: float = 1.0
    eta: float = 1.3
    budget: int = 200
    repeats: int = 30
    seed: int = 0
    refine_runs: int = 150
    use_original_bounds: bool = False  # enhanced degeneracy checks

    def __post_init__(self):
        object.__setattr__(self, "problem", self.problem.upper())
        object.__setattr__(self, "optimizer", self.optimizer.upper())
        if self.problem not in ("SFR", "AID"):
            raise ValueError(f"unknown problem {self.problem!r}")
        if self.optimizer not in ("PSO", "DE"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")
        if self.budget < 1 or self.repeats < 1:
            raise ValueError("budget and repeats must be positive")

    @property
    def stem(self) -> str:
        parts = [
            self.problem,
            self.target,
            self.optimizer,
            "ml" if self.enhanced else "plain",
            f"n{self.dataset_size}",
            f"c{self.c:g}",
        ]
        if self.problem == "AID":
            parts.append(f"eta{self.eta:g}")
        parts.append(f"s{self.seed}")
        return "_".join(parts)


@dataclass
class RunRow:
    repeat: int
    seed: int
    final_fitness: float  # best expensive-evaluation fitness; nan if degenerate
    rb: int
    hf_count: int
    consumed: int
    degenerate: bool


@dataclass
class SummaryReport:
    config: dict
    rows: list[RunRow]
    aggregate: dict = field(default_factory=dict)

    def recompute_aggregate(self) -> dict:
        fits = [r.final_fitness for r in self.rows if not r.degenerate]
        self.aggregate = {
            "runs": len(self.rows),
            "degenerate_runs": sum(r.degenerate for r in self.rows),
            "mean_fitness": float(np.mean(fits)) if fits else float("nan"),
            "std_fitness": float(np.std(fits)) if fits else float("nan"),
            "median_fitness": float(np.median(fits)) if fits else float("nan"),
            "mean_rb": float(np.mean([r.rb for r in self.rows])),
            "mean_hf": float(np.mean([r.hf_count for r in self.rows])),
        }
        return self.aggregate


def final_hf_fitness(trace) -> tuple[float, bool]:
    """Best expensive-evaluation fitness in a trace; degenerate if none exist."""
    hf_values = [row.fitness for row in trace if row.hf]
    if not hf_values:
        return float("nan"), True
    return min(hf_values), False


def execute_runs(
    cfg: ExperimentConfig,
    bundle: TargetBundle,
    hf_evaluator,
    model: SurrogateModel | None = None,
    refined: RefinedBounds | None = None,
    traces_dir: Path | None = None,
) -> SummaryReport:
    """Run the repeats of one experiment with everything already resolved."""
    if cfg.enhanced and model is None:
        raise ValueError("enhanced experiments need a trained surrogate")
    if cfg.enhanced and refined is None and not cfg.use_original_bounds:
        raise ValueError("enhanced experiments need refined bounds")

    original = optimization_bounds(cfg.problem)
    bounds = original
    if cfg.enhanced and not cfg.use_original_bounds:
        bounds = refined.bounds
    adapter = "downsample_80_to_20" if cfg.problem == "SFR" else "identity"

    if traces_dir is not None:
        traces_dir.mkdir(parents=True, exist_ok=True)

    rows = []
    for repeat in range(cfg.repeats):
        run_seed = int(rng_from(cfg.seed, "run", repeat).integers(2**31))
        budget = EvaluationBudget(total=cfg.budget)
        if cfg.enhanced:
            gate = GateConfig(
                model=model, target=bundle.target, c=cfg.c, adapter=adapter
            )
            hook = make_gated_hook(gate, hf_evaluator, budget)
        else:
            hook = make_hf_hook(bundle.target, hf_evaluator, budget)

        if cfg.optimizer == "PSO":
            result: OptimizeResult = pso_run(hook, bounds, PsoConfig(), budget, run_seed)
        else:
            result = shade_run(hook, bounds, ShadeConfig(), budget, run_seed)

        assert budget.hf_count + budget.rb == budget.consumed <= cfg.budget
        fitness, degenerate = final_hf_fitness(result.trace)
        rows.append(
            RunRow(
                repeat=repeat,
                seed=run_seed,
                final_fitness=fitness,
                rb=budget.rb,
                hf_count=budget.hf_count,
                consumed=budget.consumed,
                degenerate=degenerate,
            )
        )
        if traces_dir is not None:
            trace_to_csv(traces_dir / f"run_{repeat:03d}.csv", result.trace)

    report = SummaryReport(config=asdict(cfg), rows=rows)
    report.recompute_aggregate()
    return report


def emit_report(report: SummaryReport, out_prefix) -> tuple[Path, Path]:
    """Write per-run rows as CSV and the aggregate (plus config echo) as JSON."""
    if not report.rows:
        raise ValueError("report has no runs")
    out_prefix = Path(out_prefix)
    csv_path = out_prefix.with_suffix(".csv")
    json_path = out_prefix.with_suffix(".json")
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["repeat", "seed", "final_fitness", "rb", "hf_count", "consumed", "degenerate"]
        )
        for r in report.rows:
            writer.writerow(
                [r.repeat, r.seed, repr(r.final_fitness), r.rb, r.hf_count,
                 r.consumed, int(r.degenerate)]
            )
    with open(json_path, "w") as fh:
        json.dump(
            {"config": report.config, "aggregate": report.aggregate,
             "schema_version": SCHEMA_VERSION},
            fh, sort_keys=True, indent=2,
        )
        fh.write("\n")
    return csv_path, json_path


def load_report(out_prefix) -> SummaryReport:
    out_prefix = Path(out_prefix)
    doc = json.loads(out_prefix.with_suffix(".json").read_text())
    rows = []
    with open(out_prefix.with_suffix(".csv"), newline="") as fh:
        for rec in csv.DictReader(fh):
            rows.append(
                RunRow(
                    repeat=int(rec["repeat"]),
                    seed=int(rec["seed"]),
                    final_fitness=float(rec["final_fitness"]),
                    rb=int(rec["rb"]),
                    hf_count=int(rec["hf_count"]),
                    consumed=int(rec["consumed"]),
                    degenerate=bool(int(rec["degenerate"])),
                )
            )
    report = SummaryReport(config=doc["config"], rows=rows, aggregate=doc["aggregate"])
    return report


def train_surrogate(data: Dataset, problem: str, seed: int, k: int = 5) -> SurrogateModel:
    """K-fold CV for the attached model error, then a final fit on all rows."""
    return fit_with_cv(data, surrogate_config(problem), k=k, seed=seed)


def plot_table(reports: list[SummaryReport]) -> list[dict]:
    """Plot-ready rows: fitness against the threshold scale per dataset size."""
    table = []
    for rep in reports:
        cfg = rep.config
        table.append(
            {
                "problem": cfg["problem"],
                "target": cfg["target"],
                "optimizer": cfg["optimizer"],
                "enhanced": cfg["enhanced"],
                "dataset_size": cfg["dataset_size"],
                "c": cfg["c"],
                "eta": cfg["eta"],
                "mean_fitness": rep.aggregate["mean_fitness"],
                "std_fitness": rep.aggregate["std_fitness"],
                "mean_rb": rep.aggregate["mean_rb"],
            }
        )
    table.sort(
        key=lambda r: (
            r["problem"], r["target"], r["optimizer"],
            not r["enhanced"], r["dataset_size"], r["c"], r["eta"],
        )
    )
    return table
