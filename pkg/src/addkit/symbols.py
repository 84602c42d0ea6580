"""
Time-dependent negative definite symbols.

A family describes q(t, xi) and its accumulated exponent
Q_{t,s}(xi) = int_s^t q(tau, xi) dtau. The built-in families are all of
product form q(t, xi) = h'(t) psi0(xi), so Q_{t,s} = (h(t) - h(s)) psi0(xi).
Families with a general q(t, xi) ("custom" with a ``q`` expression) fall back
to adaptive quadrature in time.

Points are passed as arrays. For one-dimensional families any array shape is
accepted and evaluated elementwise; for n >= 2 the last axis must have
length n.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from typing import Any, Callable, NamedTuple, Optional, Sequence

import numpy as np
from scipy import integrate

from .errors import (
    ConfigError,
    DegenerateFamilyError,
    DomainError,
    MissingDerivativeError,
    ReferenceNotPositiveError,
    ReversedTimeError,
)

ArrayFunc = Callable[[np.ndarray], np.ndarray]

QUAD_RTOL = 1e-10


# ---------------------------------------------------------------------------
# time profiles


@dataclass(frozen=True)
class TimeProfile:
    """Monotone time change h with h(0) = 0.

    ``hprime`` may be None, in which case only Q-based operations work.
    """

    h: Callable[[Any], Any]
    hprime: Optional[Callable[[Any], Any]] = None
    name: str = "custom"
    config: dict = field(default_factory=dict, compare=False)

    def __call__(self, t):
        return self.h(t)

    def derivative(self, t):
        if self.hprime is None:
            raise MissingDerivativeError(f"profile {self.name!r} has no derivative")
        return self.hprime(t)

    def validate(self, t_min=1e-4, t_max=1e4, per_decade=64):
        """Check h(0) = 0, positivity and strict increase on log-spaced samples."""
        if abs(float(self.h(0.0))) > 0.0:
            raise ConfigError(f"profile {self.name!r}: h(0) = {self.h(0.0)} != 0")
        decades = math.log10(t_max / t_min)
        ts = np.logspace(math.log10(t_min), math.log10(t_max), int(per_decade * decades) + 1)
        hs = np.asarray(self.h(ts), dtype=float)
        if not np.all(np.isfinite(hs)):
            raise ConfigError(f"profile {self.name!r}: non-finite values")
        if np.any(hs <= 0):
            raise ConfigError(f"profile {self.name!r}: h(t) <= 0 for some t > 0")
        if np.any(np.diff(hs) <= 0):
            i = int(np.argmin(np.diff(hs)))
            raise ConfigError(
                f"profile {self.name!r} not strictly increasing near t={ts[i]:.4g}"
            )
        return self


def linear_profile(scale: float = 1.0) -> TimeProfile:
    return TimeProfile(
        h=lambda t: scale * np.asarray(t, dtype=float),
        hprime=lambda t: scale * np.ones_like(np.asarray(t, dtype=float)),
        name="t" if scale == 1.0 else f"{scale:g}*t",
        config={"form": "t", "scale": scale},
    )


def quadratic_profile(scale: float = 1.0) -> TimeProfile:
    return TimeProfile(
        h=lambda t: scale * np.asarray(t, dtype=float) ** 2,
        hprime=lambda t: 2.0 * scale * np.asarray(t, dtype=float),
        name="t^2",
        config={"form": "t^2", "scale": scale},
    )


def sqrt_profile(scale: float = 1.0) -> TimeProfile:
    def hprime(t):
        t = np.asarray(t, dtype=float)
        with np.errstate(divide="ignore"):
            return scale * 0.5 / np.sqrt(t)

    return TimeProfile(
        h=lambda t: scale * np.sqrt(np.asarray(t, dtype=float)),
        hprime=hprime,
        name="sqrt(t)",
        config={"form": "sqrt(t)", "scale": scale},
    )


def poly_profile(coeffs: Sequence[float]) -> TimeProfile:
    """h(t) = sum_k coeffs[k] t**k; coeffs[0] must vanish."""
    c = np.asarray(coeffs, dtype=float)
    if c.ndim != 1 or c.size < 2:
        raise ConfigError("poly profile needs at least two coefficients")
    poly = np.polynomial.Polynomial(c)
    dpoly = poly.deriv()
    return TimeProfile(
        h=lambda t: poly(np.asarray(t, dtype=float)),
        hprime=lambda t: dpoly(np.asarray(t, dtype=float)) + 0.0 * np.asarray(t, dtype=float),
        name="poly" + str(list(c)),
        config={"form": "poly", "coeffs": [float(x) for x in c]},
    )


def profile_from_config(cfg: dict | None) -> TimeProfile:
    if cfg is None:
        return linear_profile()
    form = cfg.get("form", "t")
    scale = float(cfg.get("scale", 1.0))
    if form == "t":
        prof = linear_profile(scale)
    elif form in ("t^2", "t**2"):
        prof = quadratic_profile(scale)
    elif form == "sqrt(t)":
        prof = sqrt_profile(scale)
    elif form == "poly":
        if "coeffs" not in cfg:
            raise ConfigError("poly profile requires 'coeffs'")
        prof = poly_profile(cfg["coeffs"])
    else:
        raise ConfigError(f"unknown profile form {form!r}")
    return prof.validate()


# ---------------------------------------------------------------------------
# base exponents


def _abs_norm(xi: np.ndarray, n: int) -> np.ndarray:
    if n == 1:
        return np.abs(xi)
    return np.sqrt(np.sum(xi * xi, axis=-1))


def log_cosh(x):
    """ln cosh x without overflow."""
    a = np.abs(np.asarray(x, dtype=float))
    return a + np.log1p(np.exp(-2.0 * a)) - math.log(2.0)


def gaussian_base(n: int) -> ArrayFunc:
    if n == 1:
        return lambda xi: xi * xi
    return lambda xi: np.sum(xi * xi, axis=-1)


def poisson_base(n: int) -> ArrayFunc:
    return lambda xi: _abs_norm(xi, n)


# ---------------------------------------------------------------------------
# families


@dataclass(frozen=True)
class SymbolFamily:
    """Evaluable description of q(t, xi) and Q(t, xi).

    Product-form families carry ``profile`` and ``base``. Direct sums carry
    their constituents in ``parts``. General custom families carry ``q``,
    a function of (t, xi).
    """

    kind: str
    dimension: int
    profile: Optional[TimeProfile]
    base: Optional[ArrayFunc]
    reference: Optional[ArrayFunc] = None
    kappa0: float = 1.0
    kappa1: float = 1.0
    parts: tuple = ()
    q: Optional[Callable[[float, np.ndarray], np.ndarray]] = None
    radial: bool = False
    label: str = ""
    config: dict = field(default_factory=dict, compare=False)

    @property
    def product_form(self) -> bool:
        return self.profile is not None and self.base is not None

    @property
    def family_id(self) -> str:
        return self.label or self.kind

    def psi(self, xi) -> np.ndarray:
        """Reference exponent; defaults to the base exponent."""
        ref = self.reference or self.base
        if ref is None:
            raise DegenerateFamilyError(f"{self.family_id}: no reference exponent")
        return ref(check_point(self, xi))

    def with_profile(self, profile: TimeProfile) -> "SymbolFamily":
        return dataclasses.replace(self, profile=profile)


def check_point(family: SymbolFamily, xi) -> np.ndarray:
    xi = np.asarray(xi, dtype=float)
    n = family.dimension
    if n >= 2 and (xi.ndim == 0 or xi.shape[-1] != n):
        raise DomainError(f"{family.family_id}: expected points with last axis {n}, got shape {xi.shape}")
    return xi


def _check_base(base: ArrayFunc, n: int, label: str) -> None:
    rng = np.random.default_rng(12345)
    pts = rng.uniform(-3.0, 3.0, size=(16,) if n == 1 else (16, n))
    vals = np.asarray(base(pts), dtype=float)
    origin = np.zeros(()) if n == 1 else np.zeros(n)
    if abs(float(base(origin))) > 1e-14:
        raise DegenerateFamilyError(f"{label}: psi0(0) != 0")
    if not np.allclose(vals, base(-pts), rtol=1e-12, atol=1e-14):
        raise DegenerateFamilyError(f"{label}: psi0 is not symmetric")
    if np.any(vals <= 0):
        raise DegenerateFamilyError(f"{label}: psi0 vanishes away from the origin")


def make_family(kind: str, dimension: int = 1, profile: TimeProfile | None = None,
                base: ArrayFunc | None = None, label: str | None = None, **kw) -> SymbolFamily:
    profile = profile or linear_profile()
    if kind == "gaussian":
        base = gaussian_base(dimension)
        radial = True
    elif kind == "poisson":
        base = poisson_base(dimension)
        radial = True
    elif kind == "coshlog":
        if dimension != 1:
            raise ConfigError("coshlog family is one-dimensional only")
        base = log_cosh
        radial = True
    elif kind == "custom":
        if base is None:
            raise ConfigError("custom product family needs a base exponent")
        radial = kw.pop("radial", False)
    else:
        raise ConfigError(f"unknown family kind {kind!r}")
    if dimension not in (1, 2) and kind != "custom":
        raise ConfigError("built-in families support dimension 1 or 2")
    label = label or f"{kind}[n={dimension},h={profile.name}]"
    _check_base(base, dimension, label)
    if kind != "custom" and "config" not in kw:
        kw["config"] = {"kind": kind, "dimension": dimension, "profile": dict(profile.config)}
    return SymbolFamily(kind=kind, dimension=dimension, profile=profile, base=base,
                        radial=radial, label=label, **kw)


def gaussian(profile=None, dimension=1) -> SymbolFamily:
    return make_family("gaussian", dimension, profile)


def poisson(profile=None, dimension=1) -> SymbolFamily:
    return make_family("poisson", dimension, profile)


def coshlog(profile=None) -> SymbolFamily:
    return make_family("coshlog", 1, profile)


def general_family(q: Callable[[float, np.ndarray], np.ndarray], dimension: int = 1,
                   reference: ArrayFunc | None = None, label: str = "custom-q") -> SymbolFamily:
    """Family given only through q(t, xi); Q is obtained by time quadrature."""
    return SymbolFamily(kind="custom", dimension=dimension, profile=None, base=None,
                        reference=reference, q=q, label=label)


# ---------------------------------------------------------------------------
# evaluation


def eval_q(family: SymbolFamily, t: float, xi) -> np.ndarray:
    """q(t, xi) = h'(t) psi0(xi) for product families."""
    xi = check_point(family, xi)
    if t < 0:
        raise ReversedTimeError(f"negative time t={t}")
    if family.parts:
        return sum(eval_q(f, t, x) for f, x in zip(family.parts, split_point(family, xi)))
    if family.q is not None:
        return np.asarray(family.q(t, xi), dtype=float)
    return family.profile.derivative(t) * family.base(xi)


def eval_Q(family: SymbolFamily, s: float, t: float, xi) -> np.ndarray:
    """Accumulated exponent Q_{t,s}(xi) = int_s^t q(tau, xi) dtau."""
    if s > t:
        raise ReversedTimeError(f"s={s} > t={t}")
    if s < 0:
        raise ReversedTimeError(f"negative time s={s}")
    xi = check_point(family, xi)
    if family.parts:
        return sum(eval_Q(f, s, t, x) for f, x in zip(family.parts, split_point(family, xi)))
    if family.product_form:
        dh = float(family.profile(t)) - float(family.profile(s))
        return dh * family.base(xi)
    if s == t:
        return np.zeros(xi.shape if family.dimension == 1 else xi.shape[:-1])
    val, _ = integrate.quad_vec(lambda tau: np.asarray(family.q(tau, xi), dtype=float),
                                s, t, epsrel=QUAD_RTOL, epsabs=0.0)
    return val


def split_point(family: SymbolFamily, xi: np.ndarray) -> list[np.ndarray]:
    """Split a point of a direct sum into the constituents' coordinates."""
    out, k = [], 0
    for f in family.parts:
        n = f.dimension
        chunk = xi[..., k:k + n]
        out.append(chunk[..., 0] if n == 1 else chunk)
        k += n
    return out


def direct_sum(f1: SymbolFamily, f2: SymbolFamily) -> SymbolFamily:
    """Family on R^{n1+n2} with Q(xi, eta) = Q1(xi) + Q2(eta)."""
    for f in (f1, f2):
        if f.base is not None:
            _check_base(f.base, f.dimension, f.family_id)
        elif f.q is not None:
            _check_base(lambda xi, f=f: eval_Q(f, 0.0, 1.0, xi), f.dimension, f.family_id)
    n = f1.dimension + f2.dimension
    parts = tuple(list(f1.parts or (f1,)) + list(f2.parts or (f2,)))
    return SymbolFamily(kind="direct_sum", dimension=n, profile=None, base=None,
                        parts=parts, label=f"({f1.family_id})+({f2.family_id})",
                        config={"kind": "direct_sum", "parts": [f1.config, f2.config]})


class ComparabilityBounds(NamedTuple):
    kappa0: float
    kappa1: float
    passed: bool


def comparability_bounds(family: SymbolFamily, psi: ArrayFunc | None, xi_samples,
                         t_samples, kappa_floor: float = 1e-6,
                         max_spread: float = 1e6) -> ComparabilityBounds:
    """Estimate kappa0 <= q(t, xi)/psi(xi) <= kappa1 over samples.

    The estimate fails when kappa0 is not bounded away from zero or when the
    ratio spreads over more than ``max_spread``, which is how a non-comparable
    pair shows up on a finite sample.
    """
    psi = psi or family.psi
    xs = check_point(family, np.asarray(xi_samples, dtype=float))
    ts = np.asarray(t_samples, dtype=float).ravel()
    if xs.size == 0 or ts.size == 0:
        raise ValueError("empty samples")
    ref = np.asarray(psi(xs), dtype=float)
    norm = _abs_norm(xs, family.dimension)
    if np.any(norm == 0):
        raise ValueError("samples must avoid the origin")
    if np.any(ref <= 0):
        raise ReferenceNotPositiveError("reference not locally positive: psi(xi) = 0 at xi != 0")
    lo, hi = math.inf, -math.inf
    for t in ts:
        r = np.asarray(eval_q(family, float(t), xs), dtype=float) / ref
        lo, hi = min(lo, float(np.min(r))), max(hi, float(np.max(r)))
    passed = bool(np.isfinite(hi) and lo > kappa_floor and hi / lo <= max_spread)
    return ComparabilityBounds(lo, hi, passed)


# ---------------------------------------------------------------------------
# configuration


def _sympy_function(expr: str, names: Sequence[str]):
    import sympy
    from sympy.parsing.sympy_parser import (convert_xor, parse_expr,
                                            standard_transformations)

    syms = sympy.symbols(" ".join(names))
    if len(names) == 1:
        syms = (syms,)
    local = {n: s for n, s in zip(names, syms)}
    local["abs"] = sympy.Abs
    try:
        parsed = parse_expr(expr, local_dict=local,
                            transformations=standard_transformations + (convert_xor,))
    except Exception as exc:  # sympy raises a zoo of types
        raise ConfigError(f"cannot parse expression {expr!r}: {exc}") from exc
    extra = parsed.free_symbols - set(syms)
    if extra:
        raise ConfigError(f"unknown symbols {sorted(map(str, extra))} in {expr!r}")
    return sympy.lambdify(syms, parsed, modules="numpy")


def symbol_from_expression(expr: str, dimension: int = 1) -> ArrayFunc:
    """Compile an exponent such as ``"abs(x)^3"`` into a vectorized function.

    One-dimensional expressions use the variable ``x`` (alias ``xi``); planar
    ones use ``x1`` and ``x2``.
    """
    if dimension == 1:
        fn = _sympy_function(expr.replace("xi", "x"), ["x"])
        return lambda xi: np.asarray(fn(np.asarray(xi, dtype=float)), dtype=float) + 0.0 * np.asarray(xi, dtype=float)
    fn = _sympy_function(expr.replace("xi", "x"), [f"x{i + 1}" for i in range(dimension)])

    def f(xi):
        xi = np.asarray(xi, dtype=float)
        return np.asarray(fn(*np.moveaxis(xi, -1, 0)), dtype=float) + 0.0 * xi[..., 0]

    return f


def family_from_config(cfg: dict | str) -> SymbolFamily:
    """Build a family from a JSON-style dict or a ``builtin:<kind>`` URI."""
    if isinstance(cfg, str):
        if not cfg.startswith("builtin:"):
            raise ConfigError(f"expected builtin:<kind>, got {cfg!r}")
        cfg = {"kind": cfg.split(":", 1)[1]}
    if not isinstance(cfg, dict):
        raise ConfigError("family config must be an object")
    kind = cfg.get("kind")
    n = int(cfg.get("dimension", 1))
    if kind == "direct_sum":
        parts = cfg.get("parts")
        if not parts or len(parts) != 2:
            raise ConfigError("direct_sum needs exactly two 'parts'")
        fam = direct_sum(family_from_config(parts[0]), family_from_config(parts[1]))
        return dataclasses.replace(fam, config=cfg)
    if kind == "custom" and "q" in cfg:
        if n != 1:
            raise ConfigError("custom q(t, x) families are one-dimensional")
        fn = _sympy_function(cfg["q"].replace("xi", "x"), ["t", "x"])
        q = lambda t, xi: np.asarray(fn(t, np.asarray(xi, dtype=float)), dtype=float) + 0.0 * np.asarray(xi)
        ref = symbol_from_expression(cfg["psi"], n) if "psi" in cfg else None
        return dataclasses.replace(general_family(q, n, ref, label=f"custom[q={cfg['q']}]"), config=cfg)
    profile = profile_from_config(cfg.get("profile"))
    if kind == "custom":
        if "psi0" not in cfg:
            raise ConfigError("custom family needs 'psi0' or 'q'")
        base = symbol_from_expression(cfg["psi0"], n)
        fam = make_family("custom", n, profile, base=base, label=f"custom[psi0={cfg['psi0']},h={profile.name}]")
    elif kind in ("gaussian", "poisson", "coshlog"):
        fam = make_family(kind, n, profile)
    else:
        raise ConfigError(f"unknown family kind {kind!r}")
    full = {"kind": kind, "dimension": n, "profile": profile.config}
    full.update({k: v for k, v in cfg.items() if k not in full})
    return dataclasses.replace(fam, config=full)
