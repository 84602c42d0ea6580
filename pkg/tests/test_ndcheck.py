import math

import numpy as np
import pytest

from addkit import coshlog, gaussian, poisson
from addkit.errors import EvaluationError, WeightSumError
from addkit.ndcheck import (
    NdConfig,
    PointSet,
    constrained_nd_form,
    is_negative_definite,
    lattice_point_set,
    pd_min_eigenvalue,
    random_point_set,
    validate_basic_assumption_I,
)

P012 = PointSet(np.array([0.0, 1.0, 2.0]))


def test_gaussian_kernel_positive():
    lam = pd_min_eigenvalue(lambda x: np.exp(-np.asarray(x) ** 2), P012)
    M = np.exp(-np.subtract.outer([0, 1, 2], [0, 1, 2]) ** 2.0)
    assert lam > 0
    assert lam == pytest.approx(np.linalg.eigvalsh(M)[0], rel=1e-12)


@pytest.mark.parametrize("m", [2, 5, 17])
def test_constant_kernel_rank_one(m):
    ps = lattice_point_set(m)
    assert pd_min_eigenvalue(lambda x: np.ones_like(np.asarray(x, dtype=float)), ps) == pytest.approx(0.0, abs=1e-12)


def test_cosine_pair():
    ps = PointSet(np.array([0.0, math.pi]))
    assert pd_min_eigenvalue(lambda x: np.cos(x), ps) == pytest.approx(0.0, abs=1e-12)


def test_nonfinite_kernel():
    with pytest.raises(EvaluationError):
        with np.errstate(divide="ignore"):
            pd_min_eigenvalue(lambda x: 1.0 / np.asarray(x), P012)


@pytest.mark.parametrize(
    "psi, expected",
    [
        (lambda x: np.asarray(x) ** 2, 0.0),
        (lambda x: np.abs(x) ** 3, 8.0),
        (lambda x: 0.0 * np.asarray(x), 0.0),
    ],
)
def test_constrained_form_values(psi, expected):
    assert constrained_nd_form(psi, P012, [1, -2, 1]) == pytest.approx(expected, abs=1e-13)


def test_weights_must_sum_to_zero():
    with pytest.raises(WeightSumError):
        constrained_nd_form(lambda x: np.abs(x), P012, [1, 1, 1])


@pytest.mark.parametrize(
    "psi",
    [
        lambda x: np.asarray(x) ** 2,
        lambda x: np.abs(x),
        lambda x: np.log1p(np.asarray(x) ** 2),
        lambda x: np.log(np.cosh(x)),
    ],
    ids=["square", "abs", "log1p-square", "logcosh"],
)
def test_sweep_passes(psi):
    rep = is_negative_definite(psi)
    assert rep.passed
    assert rep.summary == "no violation found"


def test_sweep_finds_cubic_witness():
    rep = is_negative_definite(lambda x: np.abs(x) ** 3)
    assert not rep.passed
    w = rep.witness
    assert np.allclose(np.ravel(w["points"]), [0, 1, 2])
    assert np.allclose(np.real(w["weights"]), [1, -2, 1])
    assert w["form_value"] == pytest.approx(8.0)


def test_brute_force_log1p():
    psi = lambda x: np.log1p(np.asarray(x) ** 2)
    rng = np.random.default_rng(0)
    worst = -np.inf
    for _ in range(10_000):
        ps = PointSet(rng.uniform(-10, 10, 4))
        c = rng.normal(size=4)
        c -= c.mean()
        worst = max(worst, constrained_nd_form(psi, ps, c))
    assert worst <= 1e-12


def test_translation_invariance():
    f = lambda x: np.exp(-np.abs(x))
    ps = random_point_set(20, 5.0, seed=1)
    shifted = PointSet(ps.points + 3.7)
    assert abs(pd_min_eigenvalue(f, ps) - pd_min_eigenvalue(f, shifted)) <= 1e-10


def test_cone_and_scaling():
    cfg = NdConfig(num_point_sets=2, set_size=16)
    a, b = (lambda x: np.asarray(x) ** 2), (lambda x: np.abs(x))
    assert is_negative_definite(lambda x: 0.3 * a(x) + 2.0 * b(x), cfg).passed
    for c in (0.5, 2.0):
        assert is_negative_definite(lambda x: b(c * np.asarray(x)), cfg).passed


def test_two_dimensional_sweep():
    rep = is_negative_definite(lambda x: np.sum(np.asarray(x) ** 2, axis=-1), dimension=2)
    assert rep.passed


def test_point_sets_contain_origin():
    ps = random_point_set(16, 10.0, dimension=2, seed=4)
    assert ps.has_origin
    assert len(np.unique(ps.points, axis=0)) == len(ps.points)


@pytest.mark.parametrize("make", [gaussian, poisson, coshlog], ids=["gaussian", "poisson", "coshlog"])
def test_basic_assumption_builtins(make):
    reports = validate_basic_assumption_I(make(), [0.5, 1.0, 2.0], NdConfig(num_point_sets=2, set_size=16))
    assert [r.t for r in reports] == [0.5, 1.0, 2.0]
    assert all(r.passed for r in reports)
    assert all(r.as_dict()["summary"].startswith("no violation found") for r in reports)
