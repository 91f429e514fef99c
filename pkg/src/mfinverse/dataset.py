"""Surrogate training data: space-filling sampling, boundary-profile
generation, low-fidelity batch labeling, and on-disk persistence."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .core import Array, Bounds, EvaluationFailure, rng_from


def lhs_sample(bounds: Bounds, n: int, rng: np.random.Generator) -> Array:
    """Latin hypercube sample: one point per equal-probability stratum and
    dimension, uniform jitter inside the stratum, strata permuted per dimension."""
    if n < 1:
        raise ValueError("need at least one sample")
    out = np.empty((n, bounds.dim))
    for j in range(bounds.dim):
        strata = rng.permutation(n)
        jitter = rng.random(n)
        unit = (strata + jitter) / n
        out[:, j] = bounds.lower[j] + unit * bounds.width[j]
    return out


def generate_bc(
    lf_n: int = 20,
    s_top: float = 30.0,
    rng: np.random.Generator | None = None,
    *,
    branch: int | None = None,
    coeffs: tuple[float, ...] | None = None,
    sigma: float | None = None,
    reverse: bool | None = None,
) -> Array:
    """Random boundary profile: a noisy linear, parabolic, or sinusoidal base.

    The base abscissa is lf_n equally spaced points on [0, 1]. Entries above
    s_top are replaced by fresh uniform draws in [0, s_top], the profile is
    reversed with probability 0.5, and the absolute value is returned. The
    keyword overrides pin individual random choices for testing.
    """
    if lf_n < 2:
        raise ValueError("lf_n must be >= 2")
    if rng is None:
        rng = np.random.default_rng()

    base = np.linspace(0.0, 1.0, lf_n)
    r = int(rng.integers(0, 3)) if branch is None else int(branch)
    sd = float(rng.uniform(0.0, 100.0)) if sigma is None else float(sigma)
    noise = rng.normal(0.0, sd, lf_n) if sd > 0 else np.zeros(lf_n)

    n_coeff = 2 if r == 0 else 3
    if coeffs is None:
        c = rng.uniform(0.0, 10.0, n_coeff)
    else:
        c = np.asarray(coeffs, dtype=float)
        if c.size != n_coeff:
            raise ValueError(f"branch {r} takes {n_coeff} coefficients")

    if r == 0:
        bc = c[0] * base + c[1]
    elif r == 1:
        bc = c[0] * base**2 + c[1] * base + c[2]
    else:
        bc = c[0] * np.sin(c[2] * base) + c[1]

    bc = bc + noise
    # entries whose magnitude escapes the boundary cap are replaced, so the
    # final absolute value stays within [0, s_top]
    over = np.abs(bc) > s_top
    if np.any(over):
        bc[over] = rng.uniform(0.0, s_top, int(np.sum(over)))
    if (rng.uniform(0.0, 1.0) < 0.5) if reverse is None else reverse:
        bc = bc[::-1]
    return np.abs(bc)


@dataclass
class Dataset:
    """Design rows with their scalar performance labels."""

    inputs: Array  # (n, m)
    labels: Array  # (n,)
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.inputs = np.atleast_2d(np.asarray(self.inputs, dtype=float))
        self.labels = np.asarray(self.labels, dtype=float).reshape(-1)
        if self.inputs.shape[0] != self.labels.shape[0]:
            raise ValueError("inputs/labels row mismatch")
        if not (np.all(np.isfinite(self.inputs)) and np.all(np.isfinite(self.labels))):
            raise ValueError("dataset contains non-finite values")

    @property
    def n(self) -> int:
        return self.inputs.shape[0]

    @property
    def dim(self) -> int:
        return self.inputs.shape[1]


def build_dataset(
    problem: str,
    n: int,
    labeler: Callable[[Array], float],
    seed: int,
    *,
    bounds: Bounds | None = None,
    lf_n: int = 20,
    s_top: float = 30.0,
) -> Dataset:
    """Sample n designs and label each with the low-fidelity scalar summary.

    AID rows come from a Latin hypercube over `bounds`; SFR rows come from the
    random boundary-profile generator. Rows whose labeler fails are dropped
    and counted in the metadata.
    """
    problem = problem.upper()
    rng = rng_from(seed, "dataset", problem)
    if problem == "AID":
        if bounds is None:
            raise ValueError("AID dataset needs design bounds")
        inputs = lhs_sample(bounds, n, rng)
    elif problem == "SFR":
        inputs = np.stack([generate_bc(lf_n, s_top, rng) for _ in range(n)])
    else:
        raise ValueError(f"unknown problem {problem!r}")

    rows, labels, dropped = [], [], 0
    for x in inputs:
        try:
            labels.append(float(labeler(x)))
            rows.append(x)
        except EvaluationFailure:
            dropped += 1
    meta = {
        "problem": problem,
        "seed": int(seed),
        "n_requested": int(n),
        "n_rows": len(rows),
        "dropped": dropped,
        "fidelity": "LF",
    }
    return Dataset(np.array(rows), np.array(labels), meta)


def save_dataset(dataset: Dataset, path) -> None:
    """Write rows as CSV (x_0..x_{m-1}, label) plus a .meta.json sidecar."""
    path = Path(path)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"x_{j}" for j in range(dataset.dim)] + ["label"])
        for x, y in zip(dataset.inputs, dataset.labels):
            writer.writerow([repr(float(v)) for v in x] + [repr(float(y))])
    meta_path = path.with_suffix(path.suffix + ".meta.json")
    with open(meta_path, "w") as fh:
        json.dump(dataset.meta, fh, sort_keys=True, indent=2)
        fh.write("\n")


def load_dataset(path) -> Dataset:
    path = Path(path)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [[float(v) for v in row] for row in reader]
    data = np.asarray(rows, dtype=float)
    if data.shape[1] != len(header):
        raise ValueError("malformed dataset file")
    meta_path = path.with_suffix(path.suffix + ".meta.json")
    meta = {}
    if meta_path.exists():
        meta = json.loads(meta_path.read_text())
    return Dataset(data[:, :-1], data[:, -1], meta)
