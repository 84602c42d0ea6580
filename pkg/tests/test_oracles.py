import math

import numpy as np
import pytest
from scipy import integrate, special

from addkit import coshlog, gaussian, poisson
from addkit import density as dens
from addkit import oracles as orc
from addkit.errors import DomainError


@pytest.mark.parametrize("z", [0.5 + 0.0j, 1.0 + 1.0j, 3.2 - 7.5j, 0.1 + 40.0j, 25.0 + 0.3j])
def test_loggamma_matches_scipy(z):
    assert complex(orc.loggamma(z)).real == pytest.approx(special.loggamma(z).real, abs=1e-12)


def test_abs_gamma_identity():
    # |Gamma(1 + ib)|^2 = pi b / sinh(pi b)
    for b in (0.3, 1.0, 4.0):
        assert math.exp(orc.log_abs_gamma_sq(1.0, b)) == pytest.approx(math.pi * b / math.sinh(math.pi * b), rel=1e-12)


def test_gaussian_pair_values():
    pair = orc.gaussian_pair()
    assert pair.p(1.0, 0.0) == pytest.approx(0.2820948, abs=1e-7)
    assert pair.phi(1.0, 0.0) == pytest.approx(0.5641896, abs=1e-7)
    mass, _ = integrate.quad(lambda x: pair.p(1.0, x), -np.inf, np.inf)
    assert abs(mass - 1) < 1e-10


@pytest.mark.parametrize(
    "attr, x, expected",
    [("p", 0.0, 1 / math.pi), ("phi", 0.0, 0.5), ("p", 1.0, 1 / (2 * math.pi))],
)
def test_poisson_pair_values(attr, x, expected):
    pair = orc.poisson_laplace_pair()
    assert getattr(pair, attr)(1.0, x) == pytest.approx(expected, rel=1e-12)


def test_poisson_pair_planar_normalized():
    pair = orc.poisson_laplace_pair(n=2)
    mass, _ = integrate.quad(lambda r: 2 * math.pi * r * pair.phi(0.7, np.array([r, 0.0])), 0, np.inf)
    assert abs(mass - 1) < 1e-8


@pytest.mark.parametrize("make, pair", [(gaussian, orc.gaussian_pair()), (poisson, orc.poisson_laplace_pair()),
                                        (coshlog, orc.coshlog_pair())])
def test_pairs_match_numeric_inversion(make, pair):
    fam = make()
    x = np.array([0.0, 0.4, 1.3, 3.0])
    for t in (0.5, 2.0):
        assert np.allclose(dens.density_point(fam, 0.0, t, x), pair.p(t, x), rtol=1e-8, atol=0)
        assert np.allclose(dens.adjoint_density(fam, t, x), pair.phi(t, x), rtol=1e-8, atol=0)


@pytest.mark.parametrize("x, expected", [(0.0, 1 / math.pi), (2.0, 1 / math.sinh(math.pi))])
def test_coshlog_density_values(x, expected):
    assert abs(orc.coshlog_density(2.0, x) - expected) < 1e-10


@pytest.mark.parametrize("h", [1.0, 2.0, 3.0])
def test_coshlog_density_mass(h):
    mass, _ = integrate.quad(lambda x: orc.coshlog_density(h, x), -np.inf, np.inf, limit=200)
    assert abs(mass - 1) < 1e-8


def test_coshlog_density_bad_h():
    with pytest.raises(DomainError):
        orc.coshlog_density(0.0, 1.0)


def test_coshlog_delta_squared_value():
    assert orc.coshlog_delta_squared(2.0, 2.0) == pytest.approx(-math.log(math.pi / math.sinh(math.pi)), abs=1e-12)
    assert orc.coshlog_delta_squared(1.7, 0.0) == 0.0


def test_coshlog_series_vs_loggamma():
    worst = max(abs(orc.coshlog_delta_squared(h, x) - float(orc.coshlog_delta_squared_loggamma(h, x)))
                for h in (1.0, 2.0, 3.0) for x in (0.5, 1.0, 2.0, 5.0))
    assert worst < 1e-8


def test_coshlog_series_truncation_converges():
    exact = float(orc.coshlog_delta_squared_loggamma(2.0, 5.0))
    errs = [abs(orc.coshlog_delta_squared(2.0, 5.0, J=J, tail=False) - exact) for J in (10, 100, 1000)]
    assert errs[0] > errs[1] > errs[2]


@pytest.mark.parametrize("make", [gaussian, poisson, coshlog])
def test_closed_forms_match_numeric(make):
    fam = make()
    xi = np.array([0.0, 0.5, 2.0])
    assert np.allclose(orc.log_sigma_closed(fam, 1.3, xi), dens.log_sigma(fam, 1.3, xi, mode="numeric"), atol=1e-8)
    assert np.allclose(orc.adjoint_exponent_closed(fam, 1.3, xi),
                       dens.adjoint_exponent(fam, 1.3, xi, mode="numeric"), rtol=1e-6, atol=1e-9)


def _fixture(name):
    return next(f for f in orc.lewis_fixtures() if f.name == name)


def test_sinc_fixture():
    fx = _fixture("sinc^2")
    assert fx.check(tol=1e-5)["passed"]
    outside = fx.transform(np.array([2.0, 2.5, 3.0, 4.0]))
    assert np.max(np.abs(outside)) < 1e-6


def test_sech_fixture_self_adjoint():
    fx = _fixture("sech")
    assert fx.self_adjoint
    assert fx.check(tol=1e-6)["sup_error"] < 1e-6


def test_x_over_sinh_fixture():
    fx = _fixture("x/sinh")
    assert float(fx.p(0.0)) == pytest.approx(2 / math.pi ** 2, rel=1e-12)
    assert fx.check(tol=1e-5)["passed"]


def test_x_over_sinh_sech_adjoint_differs():
    fx = _fixture("x/sinh")
    res = fx.check(fx.sech_phi, tol=1e-5)
    assert not res["passed"]
    assert res["sup_error"] > 0.2
