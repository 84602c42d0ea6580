"""Command-line interface: ``addkit <command> ...``.

Exit codes: 0 all checks pass, 1 a check failed, 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import time
import warnings
from typing import Callable, Optional, Sequence

import numpy as np

from . import __version__
from . import density as dens
from . import evolution as evo
from . import geometry as geo
from . import ndcheck as nd
from . import oracles
from . import simulate as sim
from .errors import AddkitError, AssumptionViolationError, ConfigError
from .report import Check, Report, check_le, emit_report, write_atomic
from .symbols import (
    SymbolFamily,
    comparability_bounds,
    eval_Q,
    family_from_config,
    symbol_from_expression,
)

EXIT_PASS, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# argument helpers


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def _positive(text: str) -> float:
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError(f"expected a positive number, got {text}")
    return v


def _load_family(spec: Optional[str]) -> SymbolFamily:
    if spec is None:
        raise UsageError("--family is required")
    if spec.startswith("builtin:"):
        return family_from_config(spec)
    try:
        with open(spec, encoding="utf-8") as fh:
            cfg = json.load(fh)
    except OSError as exc:
        raise UsageError(f"cannot read family config {spec}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise UsageError(f"{spec}: invalid JSON ({exc})") from exc
    return family_from_config(cfg)


def _parse_grid(text: Optional[str], dimension: int) -> dens.GridSpec:
    """``N=4096,L=auto`` style grid specification."""
    if not text:
        return dens.GridSpec(dimension)
    fields = dict(kv.split("=", 1) for kv in text.split(",") if "=" in kv)
    try:
        N = int(fields.get("N", 4096 if dimension == 1 else 512))
        L = fields.get("L", "auto")
        L = None if L == "auto" else float(L)
    except ValueError as exc:
        raise UsageError(f"bad grid spec {text!r}") from exc
    if N < 16 or (L is not None and L <= 0):
        raise UsageError(f"bad grid spec {text!r}")
    return dens.GridSpec(dimension, N, L)


def _check_time(t: float, name: str = "--t"):
    if not (t > 0 and math.isfinite(t)):
        raise UsageError(f"{name} must be positive, got {t}")


def _write_table_csv(path: str, columns: Sequence[str], rows: np.ndarray) -> int:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in np.atleast_2d(rows):
        w.writerow([f"{v:.17g}" for v in row])
    return write_atomic(path, buf.getvalue())


def _table_rows(table: dens.DensityTable) -> tuple[list[str], np.ndarray]:
    g = table.grid
    if g.dimension == 1:
        return ["x", "value"], np.column_stack([g.axis(), table.values])
    pts = g.points().reshape(-1, 2)
    return ["x", "y", "value"], np.column_stack([pts, table.values.ravel()])


def _family_echo(fam: SymbolFamily) -> dict:
    return {"id": fam.family_id, "config": fam.config}


# ---------------------------------------------------------------------------
# commands; each returns (checks, results)


def cmd_density(a) -> tuple[list, dict]:
    fam = _load_family(a.family)
    _check_time(a.t)
    if a.s < 0 or a.s >= a.t:
        raise UsageError(f"need 0 <= s < t, got s={a.s}, t={a.t}")
    table = dens.density_grid(fam, a.s, a.t, _parse_grid(a.grid, fam.dimension))
    if a.out:
        cols, rows = _table_rows(table)
        _write_table_csv(a.out, cols, rows)
    checks = [check_le("mass_error", abs(table.total_mass - 1.0), a.tol),
              check_le("clipped_mass", table.clipped_mass, a.tol)]
    return checks, {"family": _family_echo(fam), "num_points": table.grid.num_points,
                    "half_width": table.grid.half_width, "total_mass": table.total_mass,
                    "min_raw": table.min_raw, "out": a.out}


def _phi_grid(fam: SymbolFamily, t: float, text: Optional[str]) -> dens.GridSpec:
    g = _parse_grid(text, fam.dimension)
    if g.half_width is None:
        X = dens.exponent_cutoff(lambda x: eval_Q(fam, 0.0, 1.0 / t, x), fam.dimension, math.log(1e16))
        g = dens.GridSpec(fam.dimension, g.num_points, X)
    return g


def cmd_adjoint(a) -> tuple[list, dict]:
    fam = _load_family(a.family)
    _check_time(a.t)
    g = _phi_grid(fam, a.t, a.grid)
    vals = np.asarray(dens.adjoint_density(fam, a.t, g.points()))
    table = dens.DensityTable(g, vals, a.t, 0.0, fam.family_id)
    if a.out:
        cols, rows = _table_rows(table)
        _write_table_csv(a.out, cols, rows)
    return [check_le("mass_error", abs(table.total_mass - 1.0), a.tol)], {
        "family": _family_echo(fam), "phi_at_0": float(dens.adjoint_density(fam, a.t, dens._zero(fam))),
        "half_width": g.half_width, "num_points": g.num_points, "out": a.out}


def cmd_check_adjoint(a) -> tuple[list, dict]:
    fam = _load_family(a.family)
    checks, res = [], {}
    for t in a.t:
        _check_time(t)
        r = dens.adjointness_check(fam, t, _parse_grid(a.grid, fam.dimension), a.tol)
        checks.append(check_le(f"adjointness[t={t:g}]", r["sup_error"], a.tol))
        res[f"t={t:g}"] = r
    return checks, {"family": _family_echo(fam), "runs": res}


def cmd_verify_cndf(a) -> tuple[list, dict]:
    cfg = nd.NdConfig(tol=a.tol, seed=a.seed)
    if a.symbol:
        psi = symbol_from_expression(a.symbol, a.dimension)
        rep = nd.is_negative_definite(psi, cfg, a.dimension)
        note = rep.summary
        if rep.witness:
            w = rep.witness
            note += f"; witness points={w['points']} weights={w['weights']} form={w['form_value']:.6g}"
        return [Check("negative_definite", rep.worst_form, rep.tol, rep.passed, note)], {
            "symbol": a.symbol, "report": rep.as_dict()}
    fam = _load_family(a.family)
    for t in a.t:
        _check_time(t)
    reps = nd.validate_basic_assumption_I(fam, a.t, cfg)
    checks = [Check(f"basic_assumption_I[t={r.t:g}]", r.worst_form, r.tol, r.passed, r.summary) for r in reps]
    return checks, {"family": _family_echo(fam), "reports": [r.as_dict() for r in reps]}


def cmd_verify_dual(a) -> tuple[list, dict]:
    fam = _load_family(a.family)
    _check_time(a.t)
    r = geo.dual_formula_check(fam, a.t, tol=a.tol)
    return [check_le("dual.p_t", r.p_sup_rel_error, a.tol), check_le("dual.phi_t", r.phi_sup_rel_error, a.tol)], {
        "family": _family_echo(fam), "report": r.as_dict()}


def _radii(text: str) -> np.ndarray:
    try:
        lo, hi, num = text.split(":")
        return np.logspace(math.log10(float(lo)), math.log10(float(hi)), int(num))
    except ValueError as exc:
        raise UsageError(f"--radii expects lo:hi:count, got {text!r}") from exc


def cmd_geometry(a) -> tuple[list, dict]:
    fam = _load_family(a.family)
    _check_time(a.t)
    handles = {"dQ": geo.metric_dQ(fam, 0.0, a.t), "deltaQ": geo.metric_deltaQ(fam, a.t)}
    radii = _radii(a.radii)
    checks, res, rows = [], {}, []
    for name, m in handles.items():
        ax = geo.metric_axioms_check(m, a.triples, a.seed)
        checks.append(Check(f"{name}.metric_axioms", ax.worst_triangle, ax.tol, ax.passed))
        d = geo.doubling_estimate(m, radii)
        checks.append(Check(f"{name}.doubling", d.c0, 1.1 * d.c_inner, d.passed))
        curve = geo.ball_volume_curve(m, radii)
        checks.append(Check(f"{name}.volume_monotone", None, None, curve.monotone))
        res[name] = {"axioms": ax.as_dict(), "c0": d.c0, "c_inner": d.c_inner, "method": curve.method,
                     "peak": geo.peak_via_ball_integral(m)}
        rows += [[name == "deltaQ", r, v] for r, v in zip(curve.radii, curve.volumes)]
    if a.curve:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["metric", "radius", "volume"])
        for is_delta, r, v in rows:
            w.writerow(["deltaQ" if is_delta else "dQ", f"{r:.17g}", f"{v:.17g}"])
        write_atomic(a.curve, buf.getvalue())
    return checks, {"family": _family_echo(fam), "metrics": res, "curve": a.curve}


def cmd_operator_check(a) -> tuple[list, dict]:
    fam = _load_family(a.family)
    if len(a.times) != 3:
        raise UsageError("--times needs exactly three values s,r,t")
    r = evo.fundamental_solution_check(fam, a.times, tol=a.tol)
    return list(r.checks), {"family": _family_echo(fam), "times": a.times}


def cmd_ck(a) -> tuple[list, dict]:
    fam = _load_family(a.family)
    if len(a.times) != 3:
        raise UsageError("--times needs exactly three values s,r,t")
    r = evo.chapman_kolmogorov_check(fam, *a.times, tol=a.tol)
    return list(r.checks), {"family": _family_echo(fam), "times": a.times}


def cmd_simulate(a) -> tuple[list, dict]:
    fam = _load_family(a.family)
    if a.paths <= 0:
        raise UsageError("--paths must be positive")
    bundle = sim.simulate_paths(fam, a.times, a.paths, a.seed, a.process)
    if a.out:
        sim.write_paths_csv(bundle, a.out)
    final = bundle.positions[:, -1]
    return [Check("paths_finite", None, None, bool(np.all(np.isfinite(bundle.positions))))], {
        "family": _family_echo(fam), "process": a.process, "paths": a.paths, "seed": a.seed,
        "times": list(bundle.times), "final_mean": np.mean(final, axis=0), "final_var": np.var(final, axis=0),
        "out": a.out}


def cmd_cf_check(a) -> tuple[list, dict]:
    bundle = sim.read_paths_csv(a.inp)
    fam = _load_family(a.family) if a.family else None
    t = a.t if a.t is not None else float(bundle.times[-1])
    probes = a.probes if (fam or family_from_config(bundle.family_config)).dimension == 1 else \
        [[p, 0.0] for p in a.probes]
    r = sim.empirical_cf_check(bundle, t, probes, a.sigmas, fam)
    return list(r.checks), {"in": a.inp, "t": t, "paths": len(bundle), "tag": bundle.tag}


def _oracle_rows(name: str, t: float) -> tuple[list[str], np.ndarray, list]:
    checks = []
    if name == "lewis":
        xs = np.linspace(-8.0, 8.0, 321)
        rows = []
        for k, fx in enumerate(oracles.lewis_fixtures()):
            rows.append(np.column_stack([np.full(xs.size, k), xs, fx.p(xs), fx.phi(xs)]))
        return ["fixture", "x", "p", "phi"], np.vstack(rows), checks
    pair = {"gaussian": oracles.gaussian_pair, "poisson": oracles.poisson_laplace_pair,
            "coshlog": oracles.coshlog_pair}[name]()
    from scipy import integrate

    for label, f in (("p", pair.p), ("phi", pair.phi)):
        mass = integrate.quad(lambda x: float(f(t, x)), -np.inf, np.inf, epsabs=0, epsrel=1e-11, limit=400)[0]
        checks.append(check_le(f"{label}.mass_error", abs(mass - 1.0), 1e-8))
    xs = np.linspace(-10.0, 10.0, 401)
    return ["x", "p", "phi"], np.column_stack([xs, pair.p(t, xs), pair.phi(t, xs)]), checks


def cmd_oracle(a) -> tuple[list, dict]:
    _check_time(a.t)
    cols, rows, checks = _oracle_rows(a.name, a.t)
    if a.out:
        _write_table_csv(a.out, cols, rows)
    if a.name == "lewis":
        for fx in oracles.lewis_fixtures():
            r = fx.check()
            checks.append(check_le(f"{fx.name}.transform", r["sup_error"], r["tol"]))
    return checks, {"name": a.name, "t": a.t, "rows": int(len(rows)), "out": a.out}


# ---------------------------------------------------------------------------
# suite


def _oracle_for(fam: SymbolFamily):
    if not fam.product_form or fam.dimension != 1:
        return None
    return {"gaussian": oracles.gaussian_pair, "poisson": oracles.poisson_laplace_pair,
            "coshlog": oracles.coshlog_pair}.get(fam.kind, lambda p: None)(fam.profile)


def suite_checks(fam: SymbolFamily, t: float = 1.0, triples: int = 100_000, seed: int = 0) -> tuple[list, dict]:
    """The full pipeline for one family."""
    heavy = fam.kind in ("poisson", "coshlog")
    tol_adj = 1e-5 if heavy else 1e-6
    tol_op = 1e-4 if heavy else 1e-5
    checks, res = [], {}
    pre = fam.family_id + "."

    xs = np.logspace(-3, 3, 61)
    xs = xs if fam.dimension == 1 else np.stack([xs, 0.5 * xs], axis=1)
    cb = comparability_bounds(fam, None, xs, np.logspace(-1, 1, 9))
    checks.append(Check(pre + "comparability", cb.kappa1 / cb.kappa0, 1e6, cb.passed,
                        f"kappa0={cb.kappa0:.6g} kappa1={cb.kappa1:.6g}"))
    for r in nd.validate_basic_assumption_I(fam, [0.5, 1.0, 2.0], nd.NdConfig(seed=seed)):
        checks.append(Check(pre + f"basic_assumption_I[t={r.t:g}]", r.worst_form, r.tol, r.passed, r.summary))

    for name, m in (("dQ", geo.metric_dQ(fam, 0.0, t)), ("deltaQ", geo.metric_deltaQ(fam, t))):
        ax = geo.metric_axioms_check(m, triples, seed)
        checks.append(Check(pre + f"{name}.metric_axioms", ax.worst_triangle, ax.tol, ax.passed))
    d = geo.doubling_estimate(geo.metric_dQ(fam, 0.0, t))
    checks.append(Check(pre + "dQ.doubling", d.c0, 1.1 * d.c_inner, d.passed))

    dual = geo.dual_formula_check(fam, t if fam.kind != "coshlog" else 2.0, tol=1e-5)
    checks.append(check_le(pre + "dual.p_t", dual.p_sup_rel_error, 1e-5))
    checks.append(check_le(pre + "dual.phi_t", dual.phi_sup_rel_error, 1e-5))
    res["dual"] = dual.as_dict()

    for tt in (0.5, 1.0, 2.0):
        r = dens.adjointness_check(fam, tt, tol=tol_adj)
        checks.append(check_le(pre + f"adjointness[t={tt:g}]", r["sup_error"], tol_adj))

    fs = evo.fundamental_solution_check(fam, (0.2, 0.5, 1.0), tol=tol_op)
    checks += [Check(pre + c.name, c.value, c.threshold, c.passed, c.note) for c in fs.checks]
    ck = evo.chapman_kolmogorov_check(fam, 0.0, 0.5, 1.0, tol=1e-6)
    checks += [Check(pre + "ck." + c.name, c.value, c.threshold, c.passed, c.note) for c in ck.checks]

    pair = _oracle_for(fam)
    if pair is not None:
        # 16384 points keep the periodization error of heavy tails below 1e-6
        table = dens.density_grid(fam, 0.0, t, dens.GridSpec(1, 16384))
        err = float(np.max(np.abs(table.values - pair.p(t, table.x))))
        checks.append(check_le(pre + "oracle.density", err, 1e-6))
        xs = np.linspace(-20.0, 20.0, 401)
        err = float(np.max(np.abs(dens.adjoint_density(fam, t, xs) - pair.phi(t, xs))))
        checks.append(check_le(pre + "oracle.adjoint_density", err, 1e-6))
    return checks, res


def cmd_suite(a) -> tuple[list, dict]:
    specs = [a.family] if a.family else ["builtin:gaussian", "builtin:poisson", "builtin:coshlog"]
    checks, res = [], {}
    for spec in specs:
        fam = _load_family(spec)
        c, r = suite_checks(fam, a.t, a.triples, a.seed)
        checks += c
        res[fam.family_id] = r
    return checks, res


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="addkit", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"addkit {__version__}")
    sub = p.add_subparsers(dest="command", metavar="command")

    def add(name: str, fn: Callable, help_: str, family: bool = True) -> argparse.ArgumentParser:
        sp = sub.add_parser(name, help=help_)
        sp.set_defaults(func=fn)
        if family:
            sp.add_argument("--family", help="family JSON file or builtin:<gaussian|poisson|coshlog>")
        sp.add_argument("--format", choices=("json", "text", "csv"), default="json")
        sp.add_argument("--report", help="write the report here instead of stdout")
        return sp

    sp = add("density", cmd_density, "tabulate p_{t,s}")
    sp.add_argument("--t", type=float, required=True)
    sp.add_argument("--s", type=float, default=0.0)
    sp.add_argument("--grid", default="N=4096,L=auto")
    sp.add_argument("--out")
    sp.add_argument("--tol", type=_positive, default=1e-6)

    sp = add("adjoint", cmd_adjoint, "tabulate the adjoint density Phi_t")
    sp.add_argument("--t", type=float, required=True)
    sp.add_argument("--grid", default="N=4096,L=auto")
    sp.add_argument("--out")
    sp.add_argument("--tol", type=_positive, default=1e-6)

    sp = add("check-adjoint", cmd_check_adjoint, "normalized transform of p_t against Phi_{1/t}")
    sp.add_argument("--t", type=_floats, default=[1.0])
    sp.add_argument("--grid")
    sp.add_argument("--tol", type=_positive, default=1e-6)

    sp = add("verify-cndf", cmd_verify_cndf, "negative definiteness sweep")
    sp.add_argument("--symbol", help='expression such as "abs(x)^3"')
    sp.add_argument("--dimension", type=int, default=1, choices=(1, 2))
    sp.add_argument("--t", type=_floats, default=[0.5, 1.0, 2.0])
    sp.add_argument("--tol", type=_positive, default=None)
    sp.add_argument("--seed", type=int, default=0)

    sp = add("verify-dual", cmd_verify_dual, "ball-volume reconstruction of p_t and Phi_t")
    sp.add_argument("--t", type=float, default=1.0)
    sp.add_argument("--tol", type=_positive, default=1e-5)

    sp = add("geometry", cmd_geometry, "metric axioms, ball volumes, doubling")
    sp.add_argument("--t", type=float, default=1.0)
    sp.add_argument("--radii", default="1e-3:1e3:61")
    sp.add_argument("--triples", type=int, default=100_000)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--curve")

    sp = add("operator-check", cmd_operator_check, "evolution axioms for H and V")
    sp.add_argument("--times", type=_floats, default=[0.2, 0.5, 1.0])
    sp.add_argument("--tol", type=_positive, default=1e-5)

    sp = add("ck-check", cmd_ck, "Chapman-Kolmogorov for mu and gamma")
    sp.add_argument("--times", type=_floats, default=[0.0, 0.5, 1.0])
    sp.add_argument("--tol", type=_positive, default=1e-6)

    sp = add("simulate", cmd_simulate, "sample skeleton paths of Y or X")
    sp.add_argument("--process", choices=("Y", "X"), default="Y")
    sp.add_argument("--times", type=_floats, required=True)
    sp.add_argument("--paths", type=int, default=100_000)
    sp.add_argument("--seed", type=int, required=True)
    sp.add_argument("--out")

    sp = add("cf-check", cmd_cf_check, "empirical characteristic function of simulated paths")
    sp.add_argument("--in", dest="inp", required=True)
    sp.add_argument("--probes", type=_floats, default=[0.5, 1.0, 2.0])
    sp.add_argument("--sigmas", type=_positive, default=4.0)
    sp.add_argument("--t", type=float, default=None)

    sp = add("oracle", cmd_oracle, "closed-form reference tables", family=False)
    sp.add_argument("--name", choices=("gaussian", "poisson", "coshlog", "lewis"), required=True)
    sp.add_argument("--t", type=float, default=1.0)
    sp.add_argument("--out")

    sp = add("suite", cmd_suite, "full verification pipeline per family")
    sp.add_argument("--t", type=float, default=1.0)
    sp.add_argument("--triples", type=int, default=100_000)
    sp.add_argument("--seed", type=int, default=0)
    return p


def _config_of(args) -> dict:
    skip = {"func", "format", "report"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def run(argv: Sequence[str] | None = None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_PASS
    if not getattr(args, "func", None):
        parser.print_usage(stderr)
        return EXIT_CONFIG
    start = time.perf_counter()
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            checks, results = args.func(args)
    except (UsageError, ConfigError, AddkitError, ValueError) as exc:
        if isinstance(exc, AssumptionViolationError):
            print(f"addkit {args.command}: assumption violated: {exc}", file=stderr)
            return EXIT_FAIL
        print(f"addkit {args.command}: error: {exc}", file=stderr)
        return EXIT_CONFIG
    report = Report(command=args.command, config=_config_of(args), checks=checks, results=results,
                    wall_time=time.perf_counter() - start, version=__version__)
    try:
        emit_report(report, args.format, args.report, stdout)
    except OSError as exc:
        print(f"addkit {args.command}: error: {exc}", file=stderr)
        return EXIT_CONFIG
    return EXIT_PASS if report.passed else EXIT_FAIL


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
