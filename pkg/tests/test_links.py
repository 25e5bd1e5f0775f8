import math

import numpy as np
import pytest
from scipy.special import expit

from app.core.config import settings
from app.core.exceptions import LinkDomainError, SpecError
from app.core.links import (
    LOGIT,
    LinkFunction,
    LinkKind,
    eval_g,
    eval_ginv,
    eval_ginv_prime,
    parse_link,
    parse_links,
    supported_link_names,
)

LINK_NAMES = ["logit", "probit", "loglog", "cloglog", "cauchit", "t:1", "t:7"]
ETA_GRID = np.linspace(-30.0, 30.0, 601)

# ranges where g^-1 stays clear of the clamp and double precision keeps g(g^-1(eta)) within 1e-8
ROUND_TRIP_RANGES = {
    "logit": (-10.0, 10.0),
    "probit": (-5.0, 5.0),
    "loglog": (-3.0, 10.0),
    "cloglog": (-10.0, 3.0),
    "cauchit": (-10.0, 10.0),
    "t:1": (-5.0, 5.0),
    "t:7": (-5.0, 5.0),
}


def test_documented_values():
    assert eval_g(parse_link("logit"), 0.5) == pytest.approx(0.0, abs=1e-15)
    assert eval_g(parse_link("cloglog"), 1.0 - math.exp(-1.0)) == pytest.approx(0.0, abs=1e-12)
    assert eval_g(parse_link("cauchit"), 0.75) == pytest.approx(1.0, rel=1e-12)

    assert eval_ginv(parse_link("probit"), 0.0) == pytest.approx(0.5, abs=1e-15)
    assert eval_ginv(parse_link("loglog"), 0.0) == pytest.approx(math.exp(-1.0), rel=1e-14)
    assert eval_ginv(parse_link("t:1"), 0.0) == pytest.approx(0.5, abs=1e-15)

    assert eval_ginv_prime(LOGIT, 0.0) == pytest.approx(0.25, rel=1e-14)
    assert eval_ginv_prime(parse_link("cauchit"), 0.0) == pytest.approx(1.0 / math.pi, rel=1e-14)
    phi_1 = math.exp(-0.5) / math.sqrt(2.0 * math.pi)
    assert eval_ginv_prime(parse_link("probit"), 1.0) == pytest.approx(phi_1, rel=1e-12)
    assert phi_1 == pytest.approx(0.24197, abs=1e-5)


def test_t_with_one_degree_of_freedom_matches_cauchit():
    eta = np.linspace(-20.0, 20.0, 81)
    np.testing.assert_allclose(parse_link("t:1").ginv(eta), parse_link("cauchit").ginv(eta), rtol=1e-10)
    np.testing.assert_allclose(parse_link("t:1").ginv_prime(eta), parse_link("cauchit").ginv_prime(eta), rtol=1e-10)


@pytest.mark.parametrize("name", LINK_NAMES)
def test_inverse_stays_inside_unit_interval(name):
    link = parse_link(name)
    rho = link.ginv(ETA_GRID)
    assert np.all(rho >= settings.PROB_CLAMP)
    assert np.all(rho <= 1.0 - settings.PROB_CLAMP)
    assert np.all(link.ginv_prime(ETA_GRID) > 0.0)
    assert np.all(link.ginv_prime(np.array([-1e4, -800.0, 800.0, 1e4])) > 0.0)


@pytest.mark.parametrize("name", LINK_NAMES)
def test_inverse_is_monotone(name):
    rho = parse_link(name).ginv(ETA_GRID)
    assert np.all(np.diff(rho) >= 0.0)
    inside = (rho[:-1] > settings.PROB_CLAMP) & (rho[1:] < 1.0 - settings.PROB_CLAMP)
    assert np.all(np.diff(rho)[inside] > 0.0)


@pytest.mark.parametrize("name", LINK_NAMES)
def test_derivative_matches_finite_differences(name):
    link = parse_link(name)
    rho = link.ginv(ETA_GRID)
    eta = ETA_GRID[(rho >= 1e-4) & (rho <= 1.0 - 1e-4)]
    assert eta.size > 20
    h = 1e-3
    # five-point stencil
    numeric = (
        -link.ginv(eta + 2 * h) + 8 * link.ginv(eta + h) - 8 * link.ginv(eta - h) + link.ginv(eta - 2 * h)
    ) / (12 * h)
    np.testing.assert_allclose(numeric, link.ginv_prime(eta), rtol=1e-6)


@pytest.mark.parametrize("name", LINK_NAMES)
def test_round_trip(name):
    link = parse_link(name)
    lo, hi = ROUND_TRIP_RANGES[name]
    eta = np.linspace(lo, hi, 201)
    np.testing.assert_allclose(link.g(link.ginv(eta)), eta, atol=1e-8)


@pytest.mark.parametrize("name", LINK_NAMES)
def test_g_is_increasing(name):
    rho = np.linspace(0.001, 0.999, 999)
    assert np.all(np.diff(parse_link(name).g(rho)) > 0.0)


def test_t7_approximates_scaled_logit():
    eta = np.linspace(-5.0, 5.0, 1001)
    t7 = parse_link("t:7").ginv(eta)
    best = min(np.max(np.abs(t7 - expit(eta * s))) for s in np.linspace(1.0, 2.5, 1501))
    assert best < 0.02


@pytest.mark.parametrize("rho", [0.0, 1.0, -0.2, 1.5, float("nan")])
def test_g_rejects_probabilities_outside_open_interval(rho):
    with pytest.raises(LinkDomainError):
        eval_g(LOGIT, rho)


def test_extreme_predictors_stay_finite():
    for name in LINK_NAMES:
        link = parse_link(name)
        values = link.ginv(np.array([-1e6, 1e6]))
        assert np.all(np.isfinite(values))
        assert np.all(np.isfinite(link.ginv_prime(np.array([-1e6, 1e6]))))


def test_parse_link_names():
    assert parse_link(" Logit ") == LOGIT
    assert parse_link("t:7") == LinkFunction(LinkKind.T, 7.0)
    assert parse_link("t:7").name == "t:7"
    assert [l.name for l in parse_links(["probit", "cloglog"])] == ["probit", "cloglog"]
    assert "t:<nu>" in supported_link_names()


@pytest.mark.parametrize("name", ["pregibon", "t", "t:abc", "t:-1", "t:0", ""])
def test_parse_link_rejects_unknown_names(name):
    with pytest.raises(SpecError):
        parse_link(name)


def test_degrees_of_freedom_only_for_t():
    with pytest.raises(SpecError):
        LinkFunction(LinkKind.LOGIT, 3.0)
    with pytest.raises(SpecError):
        LinkFunction(LinkKind.T)


def test_gumbel_tail_derivatives_are_computed_in_log_space():
    cloglog = LinkFunction(LinkKind.CLOGLOG)
    loglog = LinkFunction(LinkKind.LOGLOG)
    assert cloglog.log_ginv_prime(-800.0) == pytest.approx(-800.0)
    assert loglog.log_ginv_prime(800.0) == pytest.approx(-800.0)
    # underflows to the floor rather than to a clipped exp(-700)
    assert cloglog.ginv_prime(-800.0) == np.finfo(float).tiny
    assert cloglog.ginv_prime(-35.0) == pytest.approx(math.exp(-35.0 - math.exp(-35.0)), rel=1e-12)
    assert loglog.ginv_prime(35.0) == pytest.approx(math.exp(-35.0 - math.exp(-35.0)), rel=1e-12)


@pytest.mark.parametrize("name", LINK_NAMES)
def test_log_derivative_agrees_with_derivative(name):
    link = parse_link(name)
    eta = np.linspace(-4.0, 4.0, 81)
    np.testing.assert_allclose(link.log_ginv_prime(eta), np.log(link.ginv_prime(eta)), rtol=1e-10, atol=1e-12)
