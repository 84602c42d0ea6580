"""Acceptance criteria, one test per criterion (criterion 11 has three parts)."""

import math
import time

import numpy as np
import pytest
from scipy import special

from addkit import coshlog, gaussian, poisson
from addkit import density as dens
from addkit import evolution as ev
from addkit import geometry as geo
from addkit import oracles as orc
from addkit import simulate as sim
from addkit.ndcheck import is_negative_definite

FAMILIES = {"gaussian": gaussian, "poisson": poisson, "coshlog": coshlog}


def test_criterion_01_gaussian_master(verdict):
    start = time.perf_counter()
    fam = gaussian()
    table = dens.density_grid(fam, 0.0, 1.0, dens.GridSpec(1, 4096))
    x = table.x
    err_p = float(np.max(np.abs(table.values - np.exp(-x ** 2 / 4) / math.sqrt(4 * math.pi))))
    err_phi = float(np.max(np.abs(dens.adjoint_density(fam, 1.0, x) - np.exp(-x ** 2) / math.sqrt(math.pi))))
    elapsed = time.perf_counter() - start
    ok = err_p < 1e-8 and err_phi < 1e-8 and elapsed < 1.0
    assert verdict("criterion 1", ok, f"p err {err_p:.2e}, Phi err {err_phi:.2e}, {elapsed:.2f}s")


def test_criterion_02_dual_density(verdict):
    errs = {name: geo.dual_formula_check(FAMILIES[name](), t).p_sup_rel_error
            for name, t in (("gaussian", 1.0), ("poisson", 1.0), ("coshlog", 2.0))}
    peak_g = geo.peak_via_ball_integral(geo.metric_dQ(gaussian(), 0.0, 1.0))
    peak_p = geo.peak_via_ball_integral(geo.metric_dQ(poisson(), 0.0, 1.0))
    peaks_ok = (abs(peak_g / (0.5 / math.sqrt(math.pi)) - 1) < 1e-5
                and abs(peak_p * math.pi - 1) < 1e-5
                and abs(peak_g - 0.2820948) < 1e-7 and abs(peak_p - 0.3183099) < 1e-7)
    ok = max(errs.values()) < 1e-5 and peaks_ok
    detail = ", ".join(f"{k} {v:.2e}" for k, v in errs.items()) + f", peaks {peak_g:.7f}/{peak_p:.7f}"
    assert verdict("criterion 2", ok, detail)


def test_criterion_03_dual_adjoint(verdict):
    errs = {name: geo.dual_formula_check(make(), 1.0).phi_sup_rel_error for name, make in FAMILIES.items()}
    peak = geo.peak_via_ball_integral(geo.metric_deltaQ(gaussian(), 1.0))
    ok = max(errs.values()) < 1e-5 and abs(peak * math.sqrt(math.pi) - 1) < 1e-5
    detail = ", ".join(f"{k} {v:.2e}" for k, v in errs.items()) + f", peak {peak:.7f}"
    assert verdict("criterion 3", ok, detail)


def test_criterion_04_adjointness(verdict):
    tols = {"gaussian": 1e-6, "poisson": 1e-5, "coshlog": 1e-5}
    worst = {}
    for name, make in FAMILIES.items():
        worst[name] = max(dens.adjointness_check(make(), t)["sup_error"] for t in (0.5, 1.0, 2.0))
    ok = all(worst[k] < tols[k] for k in tols)
    assert verdict("criterion 4", ok, ", ".join(f"{k} {v:.2e}" for k, v in worst.items()))


def test_criterion_05_nd_falsifier(verdict):
    start = time.perf_counter()
    good = [lambda x, a=a: np.abs(x) ** a for a in (0.5, 1.0, 1.5, 2.0)] + [lambda x: np.log(np.cosh(x))]
    passes = [is_negative_definite(f).passed for f in good]
    bad = is_negative_definite(lambda x: np.abs(x) ** 3)
    w = bad.witness or {}
    witness_ok = (not bad.passed
                  and np.allclose(np.ravel(w.get("points", [])), [0, 1, 2])
                  and np.allclose(np.real(w.get("weights", [])), [1, -2, 1])
                  and abs(w.get("form_value", 0) - 8.0) < 1e-12)
    elapsed = time.perf_counter() - start
    ok = all(passes) and witness_ok and elapsed < 5.0
    assert verdict("criterion 5", ok, f"passes {passes}, witness form {w.get('form_value')}, {elapsed:.2f}s")


def test_criterion_06_fundamental_solution(verdict):
    results = {name: ev.fundamental_solution_check(FAMILIES[name](), (0.2, 0.5, 1.0), tol=tol)
               for name, tol in (("gaussian", 1e-5), ("poisson", 1e-4))}
    failed = [f"{k}:{c.name}" for k, r in results.items() for c in r.checks if not c.passed]
    contraction = [c for r in results.values() for c in r.checks if "contraction" in c.name]
    ok = not failed and contraction and all(c.passed for c in contraction)
    assert verdict("criterion 6", ok, f"{sum(len(r.checks) for r in results.values())} checks, failed {failed}")


def test_criterion_07_chapman_kolmogorov(verdict):
    worst = {}
    for name, make in FAMILIES.items():
        res = ev.chapman_kolmogorov_check(make(), 0.0, 0.5, 1.0, tol=1e-6)
        vals = [c.value for c in res.checks if c.value is not None]
        worst[name] = (max(vals), res.passed)
    ok = all(p and v < 1e-6 for v, p in worst.values())
    assert verdict("criterion 7", ok, ", ".join(f"{k} {v:.2e}" for k, (v, _) in worst.items()))


def test_criterion_08_tail_limit(verdict):
    fam = gaussian()
    vals = {t: dens.tail_ratio(fam, 1.0, t) for t in (1.0, 4.0, 9.0)}
    errs = [abs(v - special.erfc(math.sqrt(t))) for t, v in vals.items()]
    expected = {1.0: 0.1572992, 4.0: 0.0046777, 9.0: 2.209e-5}
    digits_ok = all(abs(vals[t] - e) <= 5e-8 + 5e-4 * e for t, e in expected.items())
    grid = np.linspace(0.5, 5.0, 10)
    mono = {name: bool(np.all(np.diff([dens.tail_ratio(make(), 1.0, t) for t in grid]) < 0))
            for name, make in FAMILIES.items()}
    ok = max(errs) < 1e-8 and digits_ok and all(mono.values())
    assert verdict("criterion 8", ok, f"max erfc err {max(errs):.2e}, decreasing {mono}")


def test_criterion_09_mollifier(verdict):
    errs = ev.mollifier_errors(gaussian(), ev.bump(ev.default_grid()), (1.0, 0.1, 0.01))
    ok = errs[0] > errs[1] > errs[2] and errs[2] < 1e-3
    assert verdict("criterion 9", ok, ", ".join(f"{e:.2e}" for e in errs))


def test_criterion_10_coshlog_special_functions(verdict):
    e0 = abs(orc.coshlog_density(2.0, 0.0) - 1 / math.pi)
    e2 = abs(orc.coshlog_density(2.0, 2.0) - 1 / math.sinh(math.pi))
    sweep = max(abs(orc.coshlog_delta_squared(h, x) - float(orc.coshlog_delta_squared_loggamma(h, x)))
                for h in (1.0, 2.0, 3.0) for x in (0.5, 1.0, 2.0, 5.0))
    ok = e0 < 1e-10 and e2 < 1e-10 and sweep < 1e-8
    assert verdict("criterion 10", ok, f"x=0 err {e0:.1e}, x=2 err {e2:.1e}, sweep {sweep:.1e}")


def _lewis(name):
    return next(f for f in orc.lewis_fixtures() if f.name == name)


def test_criterion_11a_sinc_triangle(verdict):
    fx = _lewis("sinc^2")
    xi = np.linspace(-4.0, 4.0, 161)
    err = fx.check(tol=1e-5)["sup_error"]  # shapes normalized at 0
    outside = float(np.max(np.abs(fx.transform(xi[np.abs(xi) >= 2.0]))))
    ok = err < 1e-5 and outside < 1e-6
    assert verdict("criterion 11(a)", ok, f"sup err {err:.2e}, |xi|>=2 max {outside:.2e}")


def test_criterion_11b_sech_self_adjoint(verdict):
    fx = _lewis("sech")
    xi = np.linspace(-4.0, 4.0, 161)
    err = float(np.max(np.abs(fx.transform(xi) - fx.p(xi))))
    assert verdict("criterion 11(b)", err < 1e-6, f"sup err {err:.2e}")


def test_criterion_11c_x_over_sinh_pair(verdict):
    # 2x/(pi^2 sinh x) paired with pi/(4 cosh(pi x/2)), first power of sech
    fx = _lewis("x/sinh")
    res = fx.check(fx.sech_phi, tol=1e-5)
    assert verdict("criterion 11(c)", res["passed"], f"sup shape err {res['sup_error']:.4f}")


def test_criterion_12_simulation(verdict):
    start = time.perf_counter()
    N = 100_000
    a = sim.simulate_paths(gaussian(), [0.0, 1.0], N, seed=2024)
    b = sim.simulate_paths(gaussian(), [0.0, 1.0], N, seed=2024)
    Z = a.at(1.0)
    cf = float(np.mean(np.cos(Z)))
    se_cf = math.sqrt((1 - math.exp(-2)) / N)
    var = float(np.var(Z, ddof=1))
    se_var = 2.0 * math.sqrt(2.0 / (N - 1))
    same = a.positions.tobytes() == b.positions.tobytes()
    elapsed = time.perf_counter() - start
    z_cf, z_var = abs(cf - math.exp(-1)) / se_cf, abs(var - 2.0) / se_var
    ok = z_cf <= 4 and z_var <= 4 and same and elapsed < 30
    assert verdict("criterion 12", ok, f"cf z={z_cf:.2f}, var z={z_var:.2f}, identical={same}, {elapsed:.1f}s")


def test_criterion_13_metric_geometry(verdict):
    failed = []
    for name, make in FAMILIES.items():
        fam = make()
        for label, m in (("dQ", geo.metric_dQ(fam, 0.0, 1.0)), ("deltaQ", geo.metric_deltaQ(fam, 1.0))):
            if not geo.metric_axioms_check(m, num_triples=100_000, seed=0).passed:
                failed.append(f"{name}.{label}")
    c_g = geo.doubling_estimate(geo.metric_dQ(gaussian(), 0.0, 1.0)).c0
    c_p = geo.doubling_estimate(geo.metric_dQ(poisson(), 0.0, 1.0)).c0
    ok = not failed and abs(c_g - 2.0) <= 1e-6 and abs(c_p - 4.0) <= 1e-4
    assert verdict("criterion 13", ok, f"axiom failures {failed}, doubling {c_g:.8f}/{c_p:.6f}")
