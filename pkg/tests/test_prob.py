import numpy as np
import pytest

from app.core.design import DesignSpec
from app.core.exceptions import InfeasibleParameterError, SpecError
from app.core.links import parse_links
from app.core.prob import (
    NONPOSITIVE,
    CategoryProbs,
    category_probs,
    check_feasible,
    check_feasible_X,
    cumulative_po_intercept_order_ok,
    pi_from_rho,
    rho_from_pi,
)
from app.core.structure import BASE_FAMILIES, TWO_GROUP_FAMILIES, ModelSpec

from .conftest import GRID


def round_trip_specs():
    specs = [ModelSpec.create(4, family.value) for family in BASE_FAMILIES]
    specs += [ModelSpec.create(5, family.value, k=1, s=s) for family in TWO_GROUP_FAMILIES for s in (3, 5)]
    return specs


@pytest.mark.parametrize("spec", round_trip_specs(), ids=lambda s: f"{s.label}-J{s.J}")
def test_pi_rho_round_trip(spec, rng):
    worst = 0.0
    for _ in range(1000):
        pi = rng.dirichlet(np.full(spec.J, 2.0))
        back = pi_from_rho(spec, rho_from_pi(spec, pi)).values
        worst = max(worst, float(np.max(np.abs(back - pi))))
    assert worst <= 1e-12


def test_cumulative_rho_is_cumulative_sum():
    spec = ModelSpec.create(4, "cumulative")
    np.testing.assert_allclose(rho_from_pi(spec, [0.1, 0.2, 0.3, 0.4]), [0.1, 0.3, 0.6])


def test_continuation_rho():
    spec = ModelSpec.create(4, "continuation")
    np.testing.assert_allclose(rho_from_pi(spec, [0.1, 0.2, 0.3, 0.4]), [0.1, 0.2 / 0.9, 0.3 / 0.7])


def test_cumulative_decreasing_rho_is_infeasible():
    spec = ModelSpec.create(4, "cumulative")
    with pytest.raises(InfeasibleParameterError) as info:
        pi_from_rho(spec, [0.5, 0.4, 0.8])
    assert info.value.failures == [(0, NONPOSITIVE)]


def test_category_probs_validation():
    with pytest.raises(ValueError):
        CategoryProbs(np.array([0.5, 0.6]))
    with pytest.raises(ValueError):
        CategoryProbs(np.array([1.0, 0.0]))
    assert CategoryProbs(np.array([0.25, 0.75])).J == 2


def test_theta_length_is_checked():
    spec = ModelSpec.create(3, "baseline")
    design = DesignSpec.main_effects(3, ["x1", "x2"])
    with pytest.raises(SpecError):
        check_feasible(spec, design, np.zeros(5), GRID)


@pytest.mark.parametrize("family", ["baseline", "adjacent", "continuation"])
def test_always_feasible_families(family, rng):
    spec = ModelSpec.create(4, family, parse_links(["cauchit", "loglog", "probit"]))
    design = DesignSpec.main_effects(4, ["x1", "x2"])
    X_all = design.build_X_all(GRID)
    for _ in range(50):
        theta = rng.normal(0.0, 1.0, design.p)
        assert check_feasible_X(spec, X_all, theta).feasible
        assert check_feasible_X(spec, X_all, theta, generic=True).feasible
        pi = category_probs(spec, X_all, theta)
        assert np.all(pi > 0.0)
        np.testing.assert_allclose(pi.sum(axis=1), 1.0, atol=1e-12)


def test_cumulative_fast_path_agrees_with_generic(rng):
    spec = ModelSpec.create(4, "cumulative", parse_links(["logit", "probit", "cloglog"]))
    design = DesignSpec.main_effects(4, ["x1", "x2"])
    X_all = design.build_X_all(GRID)
    verdicts = []
    for _ in range(1000):
        theta = rng.normal(0.0, 1.0, design.p)
        fast = check_feasible_X(spec, X_all, theta)
        generic = check_feasible_X(spec, X_all, theta, generic=True)
        assert fast.failures == generic.failures
        verdicts.append(fast.feasible)
    assert any(verdicts) and not all(verdicts)


def test_intercept_order_matches_generic_for_po(rng):
    spec = ModelSpec.create(5, "cumulative", parse_links(["probit"] * 4))
    design = DesignSpec.main_effects(5, ["x1", "x2"], "po")
    X_all = design.build_X_all(GRID)
    for _ in range(200):
        theta = rng.normal(0.0, 1.0, design.p)
        expected = check_feasible_X(spec, X_all, theta, generic=True).feasible
        assert cumulative_po_intercept_order_ok(spec, design, theta, GRID) == expected


def test_intercept_order_preconditions():
    design = DesignSpec.main_effects(4, ["x"], "po")
    with pytest.raises(SpecError):
        cumulative_po_intercept_order_ok(ModelSpec.create(4, "adjacent"), design, np.zeros(4), GRID[:, :1])
    mixed = ModelSpec.create(4, "cumulative", parse_links(["logit", "probit", "logit"]))
    with pytest.raises(SpecError):
        cumulative_po_intercept_order_ok(mixed, design, np.zeros(4), GRID[:, :1])


def test_infeasible_settings_are_listed():
    spec = ModelSpec.create(3, "cumulative")
    design = DesignSpec.create(3, ["x"], "npo", per_category=[["1", "x"], ["1"]])
    x = np.array([[-2.0], [0.0], [2.0]])
    # eta_1 = x crosses eta_2 = 1 at x = 1
    theta = np.array([0.0, 1.0, 1.0])
    report = check_feasible(spec, design, theta, x)
    assert report.failures == ((2, NONPOSITIVE),)
    assert report.to_dict() == {"feasible": False, "failures": [{"setting": 2, "cause": "nonpositive"}]}
    with pytest.raises(InfeasibleParameterError) as info:
        category_probs(spec, design.build_X_all(x), theta)
    assert [i for i, _ in info.value.failures] == [2]


def test_two_group_feasibility_uses_positivity(rng):
    spec = ModelSpec.create(5, "baseline-cumulative", k=1)
    design = DesignSpec.main_effects(5, ["x1", "x2"])
    X_all = design.build_X_all(GRID)
    for _ in range(200):
        theta = rng.normal(0.0, 1.0, design.p)
        report = check_feasible_X(spec, X_all, theta)
        assert report.failures == check_feasible_X(spec, X_all, theta, generic=True).failures
        if report.feasible:
            pi = category_probs(spec, X_all, theta)
            assert np.all((pi > 0.0) & (pi < 1.0))
