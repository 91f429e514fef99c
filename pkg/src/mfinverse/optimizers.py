"""Bounded population metaheuristics: global-best PSO and SHADE differential
evolution. Objective hooks own the budget tick, so the surrogate gate plugs in
without the optimizers knowing about fidelity."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import Array, Bounds, EvaluationBudget, EvalResult, ObjectiveHook, rng_from
from .dataset import lhs_sample


@dataclass(frozen=True)
class PsoConfig:
    swarm_size: int = 10
    inertia: float = 0.8
    cognitive: float = 1.0
    social: float = 1.0
    velocity_clamp: float = 0.5  # fraction of the bound range
    init: str = "uniform"  # or "lhs"

    def __post_init__(self):
        if self.swarm_size < 2:
            raise ValueError("swarm size must be >= 2")
        if min(self.inertia, self.cognitive, self.social) < 0:
            raise ValueError("PSO coefficients must be non-negative")
        if self.init not in ("uniform", "lhs"):
            raise ValueError(f"unknown init {self.init!r}")


@dataclass(frozen=True)
class ShadeConfig:
    population: int = 10
    archive_factor: float = 2.6
    memory_size: int = 4
    p_best_rate: float = 0.11
    init: str = "uniform"

    def __post_init__(self):
        if self.population < 4:
            raise ValueError("population must be >= 4")
        if self.memory_size < 1:
            raise ValueError("memory size must be >= 1")
        if self.init not in ("uniform", "lhs"):
            raise ValueError(f"unknown init {self.init!r}")


@dataclass
class TraceRow:
    eval_index: int
    fitness: float
    hf: bool
    best_so_far: float


@dataclass
class OptimizeResult:
    x: Array
    fitness: float
    trace: list[TraceRow]

    @property
    def evaluations(self) -> int:
        return len(self.trace)


def trace_to_csv(path, trace: list[TraceRow]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["eval_index", "fitness", "hf_flag", "best_so_far"])
        for row in trace:
            writer.writerow(
                [row.eval_index, repr(row.fitness), int(row.hf), repr(row.best_so_far)]
            )


class _Recorder:
    """Funnels every evaluation through the budget and the trace (single writer)."""

    def __init__(self, objective: ObjectiveHook, budget: EvaluationBudget):
        self.objective = objective
        self.budget = budget
        self.trace: list[TraceRow] = []
        self.best_x: Array | None = None
        self.best_f = math.inf

    def exhausted(self) -> bool:
        return self.budget.exhausted

    def __call__(self, x: Array) -> EvalResult:
        before = self.budget.consumed
        result = self.objective(x)
        if self.budget.consumed != before + 1:
            raise RuntimeError("objective hook must tick the budget exactly once")
        if result.fitness < self.best_f:
            self.best_f = result.fitness
            self.best_x = np.array(x, dtype=float)
        self.trace.append(
            TraceRow(
                eval_index=self.budget.consumed,
                fitness=result.fitness,
                hf=not result.penalized,
                best_so_far=self.best_f,
            )
        )
        return result


def _initial_positions(
    bounds: Bounds, n: int, init: str, rng: np.random.Generator, x0: Array | None
) -> Array:
    if x0 is not None:
        pos = np.atleast_2d(np.asarray(x0, dtype=float)).copy()
        if pos.shape != (n, bounds.dim):
            raise ValueError(f"x0 must have shape ({n}, {bounds.dim})")
        return pos
    if init == "lhs":
        return lhs_sample(bounds, n, rng)
    return bounds.sample(rng, n)


def pso_run(
    objective: ObjectiveHook,
    bounds: Bounds,
    cfg: PsoConfig,
    budget: EvaluationBudget,
    seed: int,
    x0: Array | None = None,
) -> OptimizeResult:
    """Global-best particle swarm within box bounds.

    Velocity update v <- w v + c1 r1 (pbest - x) + c2 r2 (gbest - x) with
    per-dimension uniform factors; positions are clamped to the bounds and the
    velocity of a violated dimension is zeroed. Terminates when the budget is
    consumed (possibly mid-sweep).
    """
    rng = rng_from(seed, "pso")
    rec = _Recorder(objective, budget)
    n, dim = cfg.swarm_size, bounds.dim
    if budget.total < n:
        raise ValueError("budget smaller than the swarm size")
    v_max = cfg.velocity_clamp * bounds.width

    pos = _initial_positions(bounds, n, cfg.init, rng, x0)
    vel = np.zeros_like(pos)
    fit = np.full(n, math.inf)
    for i in range(n):
        if rec.exhausted():
            break
        fit[i] = rec(pos[i]).fitness
    pbest = pos.copy()
    pbest_f = fit.copy()
    g = int(np.argmin(pbest_f))

    while not rec.exhausted():
        for i in range(n):
            if rec.exhausted():
                break
            r1 = rng.random(dim)
            r2 = rng.random(dim)
            vel[i] = (
                cfg.inertia * vel[i]
                + cfg.cognitive * r1 * (pbest[i] - pos[i])
                + cfg.social * r2 * (pbest[g] - pos[i])
            )
            vel[i] = np.clip(vel[i], -v_max, v_max)
            pos[i] = pos[i] + vel[i]
            low = pos[i] < bounds.lower
            high = pos[i] > bounds.upper
            vel[i][low | high] = 0.0
            pos[i] = bounds.clip(pos[i])

            f = rec(pos[i]).fitness
            if f < pbest_f[i]:
                pbest_f[i] = f
                pbest[i] = pos[i].copy()
                if f < pbest_f[g]:
                    g = i

    return OptimizeResult(x=rec.best_x, fitness=rec.best_f, trace=rec.trace)


def binomial_crossover(
    x: Array, mutant: Array, cr: float, rng: np.random.Generator
) -> Array:
    """Binomial crossover with one forced mutant component."""
    dim = x.size
    take = rng.random(dim) <= cr
    take[rng.integers(dim)] = True
    return np.where(take, mutant, x)


def _sample_f(loc: float, rng: np.random.Generator) -> float:
    """Cauchy(loc, 0.1) truncated to (0, 1]: negative draws are retried."""
    while True:
        f = loc + 0.1 * math.tan(math.pi * (rng.random() - 0.5))
        if f > 0.0:
            return min(f, 1.0)


def shade_run(
    objective: ObjectiveHook,
    bounds: Bounds,
    cfg: ShadeConfig,
    budget: EvaluationBudget,
    seed: int,
    x0: Array | None = None,
) -> OptimizeResult:
    """Success-history adaptive differential evolution (current-to-pbest/1).

    Per-individual F and CR are sampled around a slot of the historical
    memory; the memory is refreshed with weighted Lehmer means of the
    parameters that produced strict improvements. Parents displaced by their
    trial enter an external archive that mutation may draw from. Bound
    violations are repaired to the midpoint between the parent and the bound.
    """
    rng = rng_from(seed, "shade")
    rec = _Recorder(objective, budget)
    n, dim = cfg.population, bounds.dim
    if budget.total < n:
        raise ValueError("budget smaller than the population")
    archive_cap = max(1, int(round(cfg.archive_factor * n)))
    p_num = max(2, int(round(cfg.p_best_rate * n)))

    pos = _initial_positions(bounds, n, cfg.init, rng, x0)
    fit = np.full(n, math.inf)
    for i in range(n):
        if rec.exhausted():
            break
        fit[i] = rec(pos[i]).fitness

    memory_f = np.full(cfg.memory_size, 0.5)
    memory_cr = np.full(cfg.memory_size, 0.5)
    mem_pos = 0
    archive: list[Array] = []

    while not rec.exhausted():
        order = np.argsort(fit, kind="stable")
        trials, trial_fit, trial_params = [], [], []
        for i in range(n):
            if rec.exhausted():
                break
            slot = int(rng.integers(cfg.memory_size))
            cr = float(np.clip(rng.normal(memory_cr[slot], 0.1), 0.0, 1.0))
            f = _sample_f(float(memory_f[slot]), rng)

            pbest = pos[order[int(rng.integers(p_num))]]
            r1 = i
            while r1 == i:
                r1 = int(rng.integers(n))
            pool = n + len(archive)
            r2 = i
            while r2 == i or r2 == r1:
                r2 = int(rng.integers(pool))
            other = pos[r2] if r2 < n else archive[r2 - n]

            mutant = pos[i] + f * (pbest - pos[i]) + f * (pos[r1] - other)
            low = mutant < bounds.lower
            high = mutant > bounds.upper
            mutant[low] = (bounds.lower[low] + pos[i][low]) / 2.0
            mutant[high] = (bounds.upper[high] + pos[i][high]) / 2.0

            trial = binomial_crossover(pos[i], mutant, cr, rng)
            trials.append((i, trial))
            trial_fit.append(rec(trial).fitness)
            trial_params.append((cr, f))

        s_cr, s_f, s_gain = [], [], []
        for (i, trial), tf, (cr, f) in zip(trials, trial_fit, trial_params):
            if tf <= fit[i]:
                if tf < fit[i]:
                    s_cr.append(cr)
                    s_f.append(f)
                    s_gain.append(fit[i] - tf)
                archive.append(pos[i].copy())
                pos[i] = trial
                fit[i] = tf
        while len(archive) > archive_cap:
            archive.pop(int(rng.integers(len(archive))))

        if s_gain:
            w = np.asarray(s_gain) / np.sum(s_gain)
            sf = np.asarray(s_f)
            memory_f[mem_pos] = float(np.sum(w * sf**2) / np.sum(w * sf))
            scr = np.asarray(s_cr)
            if np.sum(w * scr) > 0:
                memory_cr[mem_pos] = float(np.sum(w * scr**2) / np.sum(w * scr))
            mem_pos = (mem_pos + 1) % cfg.memory_size

    return OptimizeResult(x=rec.best_x, fitness=rec.best_f, trace=rec.trace)


def refinement_inner_run(
    scalar_objective,
    bounds: Bounds,
    seed: int,
    max_evals: int = 800,
) -> Array:
    """One surrogate-only search: SHADE with population equal to the problem
    dimension and its own local evaluation budget. The objective is a plain
    scalar function; its calls are booked as gated (no expensive evaluations)."""
    cfg = ShadeConfig(population=bounds.dim)
    budget = EvaluationBudget(total=max_evals)

    def hook(x: Array) -> EvalResult:
        value = float(scalar_objective(x))
        budget.tick(gated=True)
        return EvalResult(fitness=value, penalized=True)

    result = shade_run(hook, bounds, cfg, budget, seed)
    return result.x
