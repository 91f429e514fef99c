"""Shared fixtures. The expensive artifacts (trained surrogates, refined
bounds) are session-scoped so the acceptance suite builds each of them once."""

from __future__ import annotations

import numpy as np
import pytest

from mfinverse.harness import (
    build_problem_dataset,
    make_targets,
    refine_bounds,
    sfr_hf_evaluator,
    sfr_lf_evaluator,
    train_surrogate,
    airfoil_baseline,
)
from mfinverse import airfoil

ACCEPTANCE_SEED = 1234


@pytest.fixture(scope="session")
def sfr_hf():
    return sfr_hf_evaluator()


@pytest.fixture(scope="session")
def sfr_lf():
    return sfr_lf_evaluator()


@pytest.fixture(scope="session")
def sfr_bundles(sfr_hf):
    return {
        kind: make_targets("SFR", kind, hf_evaluator=sfr_hf)
        for kind in ("sinusoidal", "linear")
    }


@pytest.fixture(scope="session")
def sfr_datasets():
    return {
        n: build_problem_dataset("SFR", n, seed=ACCEPTANCE_SEED)
        for n in (500, 1000, 5000)
    }


@pytest.fixture(scope="session")
def sfr_models(sfr_datasets):
    return {
        n: train_surrogate(data, "SFR", seed=ACCEPTANCE_SEED)
        for n, data in sfr_datasets.items()
    }


@pytest.fixture(scope="session")
def sfr_refinements(sfr_models, sfr_bundles):
    out = {}
    for kind, bundle in sfr_bundles.items():
        for n in (1000, 5000):
            out[(kind, n)] = refine_bounds(
                "SFR", sfr_models[n], bundle, n_runs=150, seed=ACCEPTANCE_SEED
            )
    return out


@pytest.fixture(scope="session")
def aid_basis():
    return airfoil_baseline()


@pytest.fixture(scope="session")
def aid_bundle(aid_basis):
    basis, _, _ = aid_basis
    evaluator = airfoil.AirfoilEvaluator(basis, "HF")
    return make_targets("AID", "cambered", hf_evaluator=evaluator)


@pytest.fixture(scope="session")
def aid_model():
    data = build_problem_dataset("AID", 1000, seed=ACCEPTANCE_SEED)
    return train_surrogate(data, "AID", seed=ACCEPTANCE_SEED)
