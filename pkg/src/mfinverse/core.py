"""Shared domain types: bounds, targets, budget accounting, objectives."""

from __future__ import annotations

import zlib
from dataclasses import dataclass, field
from typing import Callable, Protocol

import numpy as np

Array = np.ndarray


def rng_from(seed: int, *tags: str | int) -> np.random.Generator:
    """Deterministic per-component RNG stream derived from one 64-bit seed.

    Tags name the component (and optionally a repeat index) so that every
    consumer of randomness in a run draws from its own independent stream.
    """
    entropy = [int(seed) & 0xFFFFFFFFFFFFFFFF]
    for tag in tags:
        if isinstance(tag, str):
            entropy.append(zlib.crc32(tag.encode("utf-8")))
        else:
            entropy.append(int(tag) & 0xFFFFFFFFFFFFFFFF)
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy)))


def as_vector(values, name: str = "vector") -> Array:
    x = np.asarray(values, dtype=float)
    if x.ndim != 1 or x.size == 0:
        raise ValueError(f"{name} must be a non-empty 1-D vector, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError(f"{name} contains non-finite entries")
    return x


@dataclass(frozen=True)
class Bounds:
    """Per-dimension box bounds for a real design vector."""

    lower: Array
    upper: Array

    def __post_init__(self):
        lo = as_vector(self.lower, "lower")
        hi = as_vector(self.upper, "upper")
        if lo.shape != hi.shape:
            raise ValueError("lower/upper length mismatch")
        if np.any(lo > hi):
            raise ValueError("lower bound exceeds upper bound")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @property
    def dim(self) -> int:
        return self.lower.size

    @property
    def width(self) -> Array:
        return self.upper - self.lower

    def contains(self, x: Array, atol: float = 0.0) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(
            np.all(x >= self.lower - atol) and np.all(x <= self.upper + atol)
        )

    def clip(self, x: Array) -> Array:
        return np.clip(np.asarray(x, dtype=float), self.lower, self.upper)

    def nested_in(self, outer: "Bounds", atol: float = 1e-12) -> bool:
        return bool(
            np.all(self.lower >= outer.lower - atol)
            and np.all(self.upper <= outer.upper + atol)
        )

    def sample(self, rng: np.random.Generator, n: int = 1) -> Array:
        u = rng.random((n, self.dim))
        return self.lower + u * self.width


@dataclass(frozen=True)
class TargetSpec:
    """Target performance vector plus its scalar reduction."""

    values: Array
    reduction: str  # "mean" or "max"

    def __post_init__(self):
        object.__setattr__(self, "values", as_vector(self.values, "target"))
        if self.reduction not in ("mean", "max"):
            raise ValueError(f"unknown reduction {self.reduction!r}")

    @property
    def info(self) -> float:
        return derive_target_info(self.values, self.reduction)

    @property
    def q(self) -> int:
        return self.values.size


def derive_target_info(values, reduction: str) -> float:
    """Scalar summary of a performance vector: its mean or its maximum."""
    v = as_vector(values, "target")
    if reduction == "mean":
        return float(np.mean(v))
    if reduction == "max":
        return float(np.max(v))
    raise ValueError(f"unknown reduction {reduction!r}")


def rmse_objective(computed, target) -> float:
    """Root mean square discrepancy between computed and target vectors."""
    c = as_vector(computed, "computed")
    t = as_vector(target, "target")
    if c.shape != t.shape:
        raise ValueError(f"length mismatch: {c.size} vs {t.size}")
    return float(np.sqrt(np.mean((c - t) ** 2)))


class BudgetExhaustedError(RuntimeError):
    pass


@dataclass
class EvaluationBudget:
    """Evaluation counter: every objective call is either gated or high-fidelity.

    `rb` counts gated (surrogate-penalized) evaluations, i.e. high-fidelity
    simulations saved. The invariant hf_count + rb == consumed holds after
    every tick, and consumed never exceeds total.
    """

    total: int
    consumed: int = 0
    hf_count: int = 0
    rb: int = 0

    def __post_init__(self):
        if self.total < 1:
            raise ValueError("budget total must be >= 1")
        if self.hf_count + self.rb != self.consumed:
            raise ValueError("inconsistent budget counters")

    @property
    def remaining(self) -> int:
        return self.total - self.consumed

    @property
    def exhausted(self) -> bool:
        return self.consumed >= self.total

    def tick(self, gated: bool) -> None:
        if self.exhausted:
            raise BudgetExhaustedError(f"budget of {self.total} evaluations exhausted")
        self.consumed += 1
        if gated:
            self.rb += 1
        else:
            self.hf_count += 1


def budget_tick(budget: EvaluationBudget, gated: bool) -> EvaluationBudget:
    """Functional form of EvaluationBudget.tick (mutates and returns budget)."""
    budget.tick(gated)
    return budget


class HFEvaluator(Protocol):
    """Computes the performance vector of a design (deterministic per config)."""

    def evaluate(self, x: Array) -> Array: ...


class EvaluationFailure(RuntimeError):
    """Raised by evaluators when a simulation fails; callers score a penalty."""


@dataclass
class EvalResult:
    """Outcome of one objective call, as logged in optimization traces."""

    fitness: float
    penalized: bool = False
    m_info: float = float("nan")
    delta: float = float("nan")
    hf_failed: bool = False


ObjectiveHook = Callable[[Array], EvalResult]


def plain_objective(f: Callable[[Array], float], budget: EvaluationBudget) -> ObjectiveHook:
    """Wrap a scalar function as an always-HF objective hook that ticks budget."""

    def hook(x: Array) -> EvalResult:
        value = float(f(x))
        budget.tick(gated=False)
        return EvalResult(fitness=value)

    return hook
