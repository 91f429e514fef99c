"""Surrogate-driven boundary refinement.

Many independent surrogate-only searches minimize the discrepancy between the
predicted summary and the target summary; the resulting solution matrix is
post-processed per problem into compressed bounds that the budgeted search
then runs inside. No expensive evaluations are spent here.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .core import Array, Bounds, TargetSpec, rng_from
from .optimizers import refinement_inner_run
from .surrogate import SurrogateModel

DEFAULT_RUNS = 150
SFR_DEGREES = (1, 2, 3, 4)
MIN_BOUND_GAP = 1e-9  # keeps degenerate dimensions searchable


@dataclass
class RefinedBounds:
    """Compressed bounds plus the recipe that produced them."""

    bounds: Bounds
    strategy: str
    meta: dict = field(default_factory=dict)

    def pruning_fraction(self, original: Bounds) -> float:
        width = original.width.copy()
        width[width == 0] = 1.0
        kept = self.bounds.width / width
        return float(1.0 - np.mean(kept))

    def report(self, original: Bounds) -> dict:
        doc = {
            "strategy": self.strategy,
            "lb_R": self.bounds.lower.tolist(),
            "ub_R": self.bounds.upper.tolist(),
            "pruning_fraction": self.pruning_fraction(original),
        }
        doc.update(self.meta)
        return doc

    def save(self, path, original: Bounds) -> None:
        with open(path, "w") as fh:
            json.dump(self.report(original), fh, sort_keys=True, indent=2)
            fh.write("\n")


def collect_solutions(
    model: SurrogateModel,
    target: TargetSpec,
    bounds: Bounds,
    n_runs: int = DEFAULT_RUNS,
    seed: int = 0,
    max_evals: int = 800,
) -> Array:
    """Solution matrix: one surrogate-only optimum per row.

    Each run minimizes |predicted summary - target summary| over the original
    bounds with its own seed; the multimodal landscape makes the rows spread.
    """
    if n_runs < 1:
        raise ValueError("need at least one run")
    t_info = target.info

    def discrepancy(x: Array) -> float:
        return abs(float(model.predict(x)) - t_info)

    rows = []
    for run in range(n_runs):
        run_seed = int(rng_from(seed, "refine-run", run).integers(2**31))
        rows.append(refinement_inner_run(discrepancy, bounds, run_seed, max_evals))
    return np.stack(rows)


def _widen_degenerate(lower: Array, upper: Array) -> tuple[Array, Array]:
    gap = upper - lower
    upper = np.where(gap < MIN_BOUND_GAP, upper + MIN_BOUND_GAP, upper)
    return lower, upper


def aid_refine(solutions: Array, eta: float, original: Bounds) -> RefinedBounds:
    """Column-average the solution matrix, scale by the safety factor, and
    rebuild the split-sign coefficient box around the scaled shape.

    Lower-surface dimensions span [scaled average, 0], upper-surface ones
    [0, scaled average]; everything is clamped into the original box.
    """
    s = np.atleast_2d(np.asarray(solutions, dtype=float))
    m = s.shape[1]
    if m % 2 != 0 or m != original.dim:
        raise ValueError("solution matrix does not match the coefficient layout")
    if eta <= 0:
        raise ValueError("eta must be positive")
    half = m // 2

    scaled = eta * s.mean(axis=0)
    scaled = original.clip(scaled)
    lower = np.concatenate([scaled[:half], np.zeros(half)])
    upper = np.concatenate([np.zeros(half), scaled[half:]])
    # widen degenerate dimensions into their allowed half-axis
    gap = upper - lower
    lower[:half] = np.where(gap[:half] < MIN_BOUND_GAP, -MIN_BOUND_GAP, lower[:half])
    upper[half:] = np.where(gap[half:] < MIN_BOUND_GAP, MIN_BOUND_GAP, upper[half:])
    return RefinedBounds(
        bounds=Bounds(lower, upper),
        strategy="aid_column_average",
        meta={"eta": eta, "n_solutions": int(s.shape[0])},
    )


def sfr_refine(
    solutions: Array,
    degrees: tuple[int, ...] = SFR_DEGREES,
    hf_dim: int = 80,
    s_ub: float = 30.0,
) -> RefinedBounds:
    """Polynomial-envelope upper bound for the boundary-scalar problem.

    Every solution row (coarse boundary profile) is least-squares fitted with
    polynomials of each degree over equally spaced abscissae on [0, 1]; all
    fits are evaluated on the fine abscissae and the overall maximum becomes
    the flat upper bound (capped at s_ub). The lower bound stays zero.
    """
    s = np.atleast_2d(np.asarray(solutions, dtype=float))
    n, m = s.shape
    x_fit = np.linspace(0.0, 1.0, m)
    x_eval = np.linspace(0.0, 1.0, hf_dim)

    envelope = -np.inf
    for row in s:
        for d in degrees:
            poly = np.polynomial.Polynomial.fit(x_fit, row, deg=d)
            envelope = max(envelope, float(np.max(poly(x_eval))))
    ub_value = min(envelope, s_ub)

    lower = np.zeros(hf_dim)
    upper = np.full(hf_dim, ub_value)
    lower, upper = _widen_degenerate(lower, upper)
    return RefinedBounds(
        bounds=Bounds(lower, upper),
        strategy="sfr_polynomial_envelope",
        meta={"degrees": list(degrees), "n_solutions": int(n), "ub_value": ub_value},
    )
