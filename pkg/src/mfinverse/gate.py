"""Surrogate-gated objective: screen each candidate with the trained model and
run the expensive evaluation only when the predicted summary is close enough
to the target summary."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import (
    Array,
    EvaluationBudget,
    EvaluationFailure,
    EvalResult,
    HFEvaluator,
    ObjectiveHook,
    TargetSpec,
    rmse_objective,
)
from .diffusion import downsample_bc
from .surrogate import SurrogateModel

PENALTY_LAMBDA = 2.0
_EXP_CAP = 700.0  # keeps the penalty finite for absurd discrepancies


def adapt_input(x: Array, adapter: str) -> Array:
    """Map an optimization vector to the surrogate's native input space."""
    if adapter == "identity":
        return np.asarray(x, dtype=float)
    if adapter == "downsample_80_to_20":
        return downsample_bc(x)
    raise ValueError(f"unknown adapter {adapter!r}")


@dataclass
class GateConfig:
    """Threshold and penalty settings for the gated objective."""

    model: SurrogateModel
    target: TargetSpec
    c: float
    penalty_lambda: float = PENALTY_LAMBDA
    adapter: str = "identity"

    def __post_init__(self):
        if self.c <= 0:
            raise ValueError("scaling factor c must be positive")
        if not (self.model.cv_rmse > 0):
            raise ValueError("gate needs a model with a positive attached cv_rmse")
        if self.adapter not in ("identity", "downsample_80_to_20"):
            raise ValueError(f"unknown adapter {self.adapter!r}")

    @property
    def omega(self) -> float:
        return self.c * self.model.cv_rmse


@dataclass
class GatedResult(EvalResult):
    """EvalResult plus the gate's bookkeeping fields."""

    @property
    def path(self) -> str:
        return "penalized" if self.penalized else "hf"


def gated_objective(
    x: Array, cfg: GateConfig, hf: HFEvaluator, budget: EvaluationBudget
) -> GatedResult:
    """One gated evaluation.

    The model predicts the candidate's scalar summary; if its absolute
    discrepancy from the target summary exceeds omega = c * cv_rmse the
    candidate is scored with the exponential penalty and the expensive
    evaluation is skipped (counted in rb). Otherwise the high-fidelity result
    is scored against the target vector. A failing evaluator falls back to the
    penalty at the threshold discrepancy.
    """
    m_info = float(cfg.model.predict(adapt_input(x, cfg.adapter)))
    delta = abs(m_info - cfg.target.info)
    omega = cfg.omega

    if delta > omega:
        fitness = cfg.penalty_lambda * math.exp(min(delta, _EXP_CAP))
        budget.tick(gated=True)
        return GatedResult(fitness=fitness, penalized=True, m_info=m_info, delta=delta)

    try:
        computed = hf.evaluate(x)
    except EvaluationFailure:
        fitness = cfg.penalty_lambda * math.exp(min(omega, _EXP_CAP))
        budget.tick(gated=True)
        return GatedResult(
            fitness=fitness, penalized=True, m_info=m_info, delta=omega, hf_failed=True
        )
    fitness = rmse_objective(computed, cfg.target.values)
    budget.tick(gated=False)
    return GatedResult(fitness=fitness, penalized=False, m_info=m_info, delta=delta)


def make_gated_hook(
    cfg: GateConfig, hf: HFEvaluator, budget: EvaluationBudget
) -> ObjectiveHook:
    def hook(x: Array) -> GatedResult:
        return gated_objective(x, cfg, hf, budget)

    return hook


def make_hf_hook(
    target: TargetSpec, hf: HFEvaluator, budget: EvaluationBudget,
    failure_fitness: float = 1e9,
) -> ObjectiveHook:
    """Ungated objective: always runs the expensive evaluation; evaluator
    failures score a large constant penalty."""

    def hook(x: Array) -> EvalResult:
        try:
            computed = hf.evaluate(x)
        except EvaluationFailure:
            budget.tick(gated=False)
            return EvalResult(fitness=failure_fitness, hf_failed=True)
        fitness = rmse_objective(computed, target.values)
        budget.tick(gated=False)
        return EvalResult(fitness=fitness)

    return hook
