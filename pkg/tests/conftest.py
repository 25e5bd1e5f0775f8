from pathlib import Path

import numpy as np
import pytest

from app.core.design import DesignSpec
from app.core.prob import category_probs, check_feasible_X
from app.core.structure import ModelSpec
from app.services.data import ingest

ROOT = Path(__file__).resolve().parent.parent
DATA_DIR = ROOT / "data"
CONFIG_DIR = ROOT / "configs"

# 3 x 3 grid of two covariates in [-1, 1]
GRID = np.array([[a, b] for a in (-1.0, 0.0, 1.0) for b in (-1.0, 0.0, 1.0)])


def random_feasible_theta(spec, design, x, rng, scale=0.3, tries=5000, margin=0.0):
    """
    Draw theta with increasing intercepts in [-1.2, 1.2] and N(0, scale^2)
    for every other coordinate, rejecting draws that are infeasible at x or
    give some category probability below margin
    """
    X_all = design.build_X_all(x)
    intercepts = design.intercept_columns()
    for _ in range(tries):
        theta = rng.normal(0.0, scale, design.p)
        levels = np.sort(rng.uniform(-1.2, 1.2, spec.J - 1))
        for j, col in intercepts.items():
            theta[col] = levels[j - 1]
        if not check_feasible_X(spec, X_all, theta).feasible:
            continue
        if margin <= 0.0 or category_probs(spec, X_all, theta).min() >= margin:
            return theta
    raise AssertionError(f"No feasible theta found for {spec.label}")


@pytest.fixture
def feasible_theta():
    return random_feasible_theta


@pytest.fixture
def rng():
    return np.random.default_rng(20240229)


@pytest.fixture
def house_flies():
    return ingest(DATA_DIR / "house_flies.csv")


@pytest.fixture
def house_flies_model():
    spec = ModelSpec.create(3, "continuation")
    design = DesignSpec.create(3, ["dose"], "npo", per_category=[["1", "dose", "dose^2"], ["1", "dose"]])
    return spec, design


@pytest.fixture
def trauma_like():
    return ingest(DATA_DIR / "trauma_like.csv")


@pytest.fixture
def trauma_like_model():
    spec = ModelSpec.create(5, "cumulative")
    design = DesignSpec.main_effects(5, ["dose", "age"], "po")
    return spec, design
