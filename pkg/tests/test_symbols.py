import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from addkit import symbols as sym
from addkit.errors import (
    ConfigError,
    DegenerateFamilyError,
    DomainError,
    MissingDerivativeError,
    ReferenceNotPositiveError,
    ReversedTimeError,
)


@pytest.mark.parametrize(
    "family, profile, t, xi, expected",
    [
        ("gaussian", sym.linear_profile(), 1.0, 2.0, 4.0),
        ("poisson", sym.quadratic_profile(), 2.0, 3.0, 12.0),
        ("coshlog", sym.linear_profile(), 0.7, 0.0, 0.0),
    ],
)
def test_eval_q_values(family, profile, t, xi, expected):
    fam = sym.make_family(family, profile=profile)
    assert sym.eval_q(fam, t, xi) == pytest.approx(expected, rel=1e-14, abs=1e-15)


def test_eval_Q_values():
    assert sym.eval_Q(sym.gaussian(), 0.0, 1.0, 2.0) == pytest.approx(4.0)
    assert sym.eval_Q(sym.coshlog(), 0.0, 2.0, 1.0) == pytest.approx(2 * math.log(math.cosh(1.0)), rel=1e-14)
    assert sym.eval_Q(sym.coshlog(), 0.0, 2.0, 1.0) == pytest.approx(0.8675616, abs=1e-7)
    assert sym.eval_Q(sym.poisson(), 1.3, 1.3, 5.0) == 0.0


def test_reversed_time():
    with pytest.raises(ReversedTimeError):
        sym.eval_Q(sym.gaussian(), 2.0, 1.0, 1.0)


def test_dimension_mismatch():
    with pytest.raises(DomainError):
        sym.eval_q(sym.gaussian(dimension=2), 1.0, [1.0, 2.0, 3.0])


def test_missing_derivative():
    prof = sym.TimeProfile(h=lambda t: t ** 3)
    fam = sym.gaussian(profile=prof)
    with pytest.raises(MissingDerivativeError):
        sym.eval_q(fam, 1.0, 1.0)
    # Q stays available
    assert sym.eval_Q(fam, 0.0, 2.0, 1.0) == pytest.approx(8.0)


@pytest.mark.parametrize("kind", ["gaussian", "poisson", "coshlog"])
def test_Q_additive_and_even(kind):
    fam = sym.make_family(kind, profile=sym.poly_profile([0.0, 1.0, 0.5]))
    rng = np.random.default_rng(3)
    xi = rng.normal(scale=5.0, size=200)
    for _ in range(20):
        s, r, t = np.sort(rng.uniform(0, 5, 3))
        lhs = sym.eval_Q(fam, r, t, xi) + sym.eval_Q(fam, s, r, xi)
        full = sym.eval_Q(fam, s, t, xi)
        assert np.all(np.abs(lhs - full) <= 1e-12 * (1 + full))
    assert np.array_equal(sym.eval_Q(fam, 0, 2.0, xi), sym.eval_Q(fam, 0, 2.0, -xi))


def test_custom_family_quadrature_matches_product_form():
    q = lambda t, xi: (1 + 2 * t) * np.asarray(xi) ** 2
    fam = sym.general_family(q)
    xi = np.array([0.3, 1.0, 4.0])
    expected = (1.5 + 1.5 ** 2 - 0.5 - 0.25) * xi ** 2
    assert np.allclose(sym.eval_Q(fam, 0.5, 1.5, xi), expected, rtol=1e-10, atol=0)


@pytest.mark.parametrize(
    "profile, expected",
    [
        (sym.linear_profile(), (1.0, 1.0)),
        (sym.poly_profile([0.0, 1.0, 1.0]), (1.0, 3.0)),
    ],
)
def test_comparability_bounds_gaussian(profile, expected):
    fam = sym.gaussian(profile=profile)
    xi = np.linspace(0.1, 10.0, 50)
    res = sym.comparability_bounds(fam, lambda x: np.asarray(x) ** 2, xi, np.linspace(0, 1, 101))
    assert (res.kappa0, res.kappa1) == pytest.approx(expected, rel=1e-12)
    assert res.passed


def test_comparability_non_comparable_pair():
    xi = np.logspace(-8, 0, 40)
    res = sym.comparability_bounds(sym.poisson(), lambda x: np.asarray(x) ** 2, xi, [0.5, 1.0])
    assert not res.passed
    assert res.kappa0 <= res.kappa1


def test_comparability_reference_zero():
    with pytest.raises(ReferenceNotPositiveError):
        sym.comparability_bounds(sym.gaussian(), lambda x: 0.0 * np.asarray(x), [1.0], [1.0])


def test_direct_sum_Q():
    fam = sym.direct_sum(sym.gaussian(), sym.poisson())
    assert fam.dimension == 2
    assert sym.eval_Q(fam, 0.0, 1.0, [1.0, 1.0]) == pytest.approx(2.0)


def test_direct_sum_density_factorizes():
    from addkit.density import density_point

    fam = sym.direct_sum(sym.gaussian(), sym.gaussian())
    pts = np.array([[0.0, 0.0], [0.5, -1.0], [1.5, 0.7]])
    joint = density_point(fam, 0.0, 1.0, pts)
    marg = lambda x: np.exp(-x ** 2 / 4) / math.sqrt(4 * math.pi)
    assert np.max(np.abs(joint - marg(pts[:, 0]) * marg(pts[:, 1]))) < 1e-8


def test_direct_sum_rejects_degenerate():
    zero = sym.general_family(lambda t, xi: 0.0 * np.asarray(xi))
    with pytest.raises(DegenerateFamilyError):
        sym.direct_sum(sym.gaussian(), zero)


@pytest.mark.parametrize(
    "cfg, kind, dim",
    [
        ({"kind": "gaussian", "dimension": 2, "profile": {"form": "t"}}, "gaussian", 2),
        ({"kind": "poisson", "dimension": 1, "profile": {"form": "t^2"}}, "poisson", 1),
        ({"kind": "coshlog", "profile": {"form": "poly", "coeffs": [0, 1, 2]}}, "coshlog", 1),
        ("builtin:gaussian", "gaussian", 1),
    ],
)
def test_family_from_config(cfg, kind, dim):
    fam = sym.family_from_config(cfg)
    assert fam.kind == kind and fam.dimension == dim


@pytest.mark.parametrize(
    "cfg",
    [
        {"kind": "nope"},
        {"kind": "coshlog", "dimension": 2},
        {"kind": "gaussian", "profile": {"form": "cubic"}},
        "builtin:unknown",
    ],
)
def test_family_from_config_rejects(cfg):
    with pytest.raises((ConfigError, DomainError)):
        sym.family_from_config(cfg)


def test_profile_round_trip():
    fam = sym.poisson(profile=sym.sqrt_profile())
    again = sym.family_from_config(fam.config)
    xi = np.linspace(-3, 3, 13)
    assert np.array_equal(sym.eval_Q(fam, 0.2, 1.7, xi), sym.eval_Q(again, 0.2, 1.7, xi))


def test_profile_validation_rejects_non_increasing():
    prof = sym.TimeProfile(h=lambda t: np.sin(t))
    with pytest.raises((ConfigError, DomainError)):
        prof.validate()


def test_symbol_from_expression():
    f = sym.symbol_from_expression("abs(x)**3")
    assert f(np.array([-2.0, 0.0, 1.0])) == pytest.approx([8.0, 0.0, 1.0])


times = st.floats(0.0, 50.0, allow_nan=False)
points = st.floats(-1e3, 1e3, allow_nan=False)


@settings(max_examples=200, deadline=None)
@given(kind=st.sampled_from(["gaussian", "poisson", "coshlog"]), a=times, b=times, c=times, xi=points)
def test_Q_additivity_property(kind, a, b, c, xi):
    s, r, t = sorted((a, b, c))
    fam = sym.make_family(kind, profile=sym.quadratic_profile())
    full = float(sym.eval_Q(fam, s, t, xi))
    parts = float(sym.eval_Q(fam, r, t, xi) + sym.eval_Q(fam, s, r, xi))
    assert full >= 0
    assert abs(parts - full) <= 1e-12 * (1 + full)
    assert sym.eval_Q(fam, s, t, -xi) == full
