"""
Closed-form reference densities.

These are the ground truth the numerical engine is tested against: the
Gaussian, Cauchy/Laplace and ln cosh families with a time profile h, the
Lewis adjoint pairs, and the closed forms of ln sigma_t and A(t, xi) for the
built-in families.
"""

from __future__ import annotations

import cmath
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import integrate, special

from .errors import DomainError
from .symbols import SymbolFamily, TimeProfile, check_point, linear_profile, split_point

# Lanczos coefficients for g = 7, nine terms (Godfrey).
_LANCZOS_G = 7.0
_LANCZOS_COEF = (
    0.99999999999980993,
    676.5203681218851,
    -1259.1392167224028,
    771.32342877765313,
    -176.61502916214059,
    12.507343278686905,
    -0.13857109526572012,
    9.9843695780195716e-6,
    1.5056327351493116e-7,
)
_HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)


def _log_sin(w: complex) -> complex:
    # sin overflows for |Im w| > ~710; factor out the dominant exponential
    if w.imag > 20.0:
        return -1j * w - complex(math.log(2.0), -math.pi / 2) + cmath.log(1.0 - cmath.exp(2j * w))
    if w.imag < -20.0:
        return 1j * w - complex(math.log(2.0), math.pi / 2) + cmath.log(1.0 - cmath.exp(-2j * w))
    return cmath.log(cmath.sin(w))


def _loggamma_scalar(z: complex) -> complex:
    if z.real < 0.5:
        # reflection: Gamma(z) Gamma(1-z) = pi / sin(pi z)
        return cmath.log(math.pi) - _log_sin(math.pi * z) - _loggamma_scalar(1.0 - z)
    z = z - 1.0
    x = _LANCZOS_COEF[0]
    for i in range(1, len(_LANCZOS_COEF)):
        x += _LANCZOS_COEF[i] / (z + i)
    t = z + _LANCZOS_G + 0.5
    return _HALF_LOG_2PI + (z + 0.5) * cmath.log(t) - t + cmath.log(x)


def loggamma(z):
    """Complex log-gamma by the Lanczos approximation.

    Evaluated in log space throughout so that |Gamma(a + ib)| for large b,
    which underflows long before ln|Gamma| does, stays representable. The
    imaginary part is not reduced to the principal branch; only the real
    part (the log-modulus) is used by callers.
    """
    z = np.asarray(z, dtype=complex)
    out = np.empty(z.shape, dtype=complex)
    for idx, v in np.ndenumerate(z):
        out[idx] = _loggamma_scalar(complex(v))
    return out if out.ndim else complex(out)


def log_abs_gamma_sq(a, b):
    """ln |Gamma(a + ib)|^2 for real a > 0."""
    return 2.0 * np.real(loggamma(np.asarray(a, dtype=float) + 1j * np.asarray(b, dtype=float)))


# ---------------------------------------------------------------------------
# oracle pairs


@dataclass(frozen=True)
class OraclePair:
    """Forward density p(t, x) and its adjoint Phi(t, x) in closed form."""

    tag: str
    dimension: int
    p: Callable
    phi: Callable
    notes: str = ""


def _positive_time(t):
    if np.any(np.asarray(t) <= 0):
        raise DomainError("closed forms are singular at t = 0")


def _sq_norm(x, n):
    x = np.asarray(x, dtype=float)
    with np.errstate(over="ignore"):
        return x * x if n == 1 else np.sum(x * x, axis=-1)


def gaussian_pair(profile: TimeProfile | None = None, n: int = 1) -> OraclePair:
    h = profile or linear_profile()

    def p(t, x):
        _positive_time(t)
        ht = float(h(t))
        return (4 * math.pi * ht) ** (-n / 2) * np.exp(-_sq_norm(x, n) / (4 * ht))

    def phi(t, x):
        _positive_time(t)
        hinv = float(h(1.0 / t))
        return math.pi ** (-n / 2) * hinv ** (n / 2) * np.exp(-_sq_norm(x, n) * hinv)

    return OraclePair("gaussian", n, p, phi)


def poisson_laplace_pair(profile: TimeProfile | None = None, n: int = 1) -> OraclePair:
    """Cauchy-type density and its Laplace-type adjoint.

    The forward density uses |x|^2 in the denominator; the |x/h(t)|^2 variant
    does not integrate e^{-h|xi|} back correctly.
    """
    if n not in (1, 2):
        raise DomainError("poisson oracle supports n = 1, 2")
    h = profile or linear_profile()
    c = math.pi ** (-(n + 1) / 2) * math.gamma((n + 1) / 2)

    def p(t, x):
        _positive_time(t)
        ht = float(h(t))
        return c * ht / (ht * ht + _sq_norm(x, n)) ** ((n + 1) / 2)

    def phi(t, x):
        _positive_time(t)
        hinv = float(h(1.0 / t))
        const = (2 ** (-n / 2) * (2 * math.pi) ** (-n / 2) * math.sqrt(math.pi)
                 * hinv ** n / math.gamma((n + 1) / 2))
        return const * np.exp(-hinv * np.sqrt(_sq_norm(x, n)))

    return OraclePair("poisson", n, p, phi, notes="|x|^2 form; Laplace adjoint")


def coshlog_density(h: float, x):
    """2^{h-2}/(pi Gamma(h)) |Gamma((h + ix)/2)|^2, the density for Q = h ln cosh.

    The 1/Gamma(h) factor is 1 at h = 1, 2 and restores unit mass elsewhere.
    """
    if h <= 0:
        raise DomainError("h must be positive")
    x = np.asarray(x, dtype=float)
    logv = ((h - 2) * math.log(2.0) - math.log(math.pi) - special.gammaln(h)
            + log_abs_gamma_sq(h / 2.0, x / 2.0))
    return np.exp(logv)


def coshlog_pair(profile: TimeProfile | None = None) -> OraclePair:
    h = profile or linear_profile()

    def p(t, x):
        _positive_time(t)
        return coshlog_density(float(h(t)), x)

    def phi(t, x):
        _positive_time(t)
        hinv = float(h(1.0 / t))
        # int sech^H = B(H/2, 1/2)
        norm = math.exp(special.betaln(hinv / 2, 0.5))
        x = np.abs(np.asarray(x, dtype=float))
        logsech = -(x + np.log1p(np.exp(-2 * x)) - math.log(2.0))
        return np.exp(hinv * logsech) / norm

    return OraclePair("coshlog", 1, p, phi)


def coshlog_delta_squared(h: float, x, J: Optional[int] = None, start: int = 0,
                          tail: bool = True) -> float:
    """Series sum_{j>=start} ln(1 + x^2/(h + 2j)^2).

    With ``J`` given, the first J terms are summed and the remainder is
    replaced by the integral of the summand (midpoint rule). Without ``J``,
    J doubles until two successive values agree to 1e-13.
    """
    x = abs(float(x))
    if x == 0.0:
        return 0.0

    def partial(J):
        j = np.arange(start, start + J, dtype=float)
        s = float(np.sum(np.log1p(x * x / (h + 2 * j) ** 2)))
        if tail:
            v0 = h + 2 * (start + J) - 1.0
            s += 0.5 * (2 * x * math.atan(x / v0) - v0 * math.log1p(x * x / (v0 * v0)))
        return s

    if J is not None:
        return partial(J)
    J, prev = 64, partial(32)
    while True:
        cur = partial(J)
        if abs(cur - prev) <= 1e-13 * max(1.0, abs(cur)) or J > 2 ** 22:
            return cur
        prev, J = cur, 2 * J


def coshlog_delta_squared_loggamma(h: float, x) -> np.ndarray:
    """-ln |Gamma((h + ix)/2) / Gamma(h/2)|^2 via log-gamma."""
    x = np.asarray(x, dtype=float)
    return -(log_abs_gamma_sq(h / 2.0, x / 2.0) - 2.0 * special.gammaln(h / 2.0))


# ---------------------------------------------------------------------------
# closed forms of ln sigma_t and A(t, xi)


def log_sigma_closed(family: SymbolFamily, t: float, x) -> Optional[np.ndarray]:
    """ln sigma_t(x) = ln(p_{1/t}(x)/p_{1/t}(0)) when a closed form is known.

    Returns None for families without one.
    """
    x = check_point(family, x)
    if family.parts:
        vals = [log_sigma_closed(f, t, xx) for f, xx in zip(family.parts, split_point(family, x))]
        return None if any(v is None for v in vals) else sum(vals)
    if not family.product_form or family.kind not in ("gaussian", "poisson", "coshlog"):
        return None
    H = float(family.profile(1.0 / t))
    n = family.dimension
    if family.kind == "gaussian":
        return -_sq_norm(x, n) / (4.0 * H)
    if family.kind == "poisson":
        return -0.5 * (n + 1) * np.log1p(_sq_norm(x, n) / (H * H))
    # same routine for both terms so that ln sigma(0) = 0 exactly
    return log_abs_gamma_sq(H / 2.0, x / 2.0) - log_abs_gamma_sq(H / 2.0, 0.0)


def adjoint_exponent_closed(family: SymbolFamily, t: float, xi) -> Optional[np.ndarray]:
    """A(t, xi) = -d/dt ln sigma_t(xi) in closed form, or None."""
    xi = check_point(family, xi)
    if family.parts:
        vals = [adjoint_exponent_closed(f, t, x) for f, x in zip(family.parts, split_point(family, xi))]
        return None if any(v is None for v in vals) else sum(vals)
    if (not family.product_form or family.profile.hprime is None
            or family.kind not in ("gaussian", "poisson", "coshlog")):
        return None
    H = float(family.profile(1.0 / t))
    dH = float(family.profile.derivative(1.0 / t)) / (t * t)  # = -dH/dt
    n = family.dimension
    r2 = _sq_norm(xi, n)
    if family.kind == "gaussian":
        return r2 / 4.0 * dH / (H * H)
    if family.kind == "poisson":
        return 0.5 * (n + 1) * 2.0 * r2 * dH / (H * (H * H + r2))
    a = H / 2.0
    b = np.asarray(xi, dtype=float) / 2.0
    return (np.real(special.psi(a + 1j * b)) - special.psi(a)) * dH


# ---------------------------------------------------------------------------
# Lewis adjoint pairs


def _fourier_cos(f: Callable[[float], float], xi: float, upper: float) -> float:
    """int_R e^{-i xi x} f(x) dx for even f, by QUADPACK's oscillatory rules."""
    if xi == 0.0:
        val, _ = integrate.quad(f, 0.0, upper, limit=400, epsabs=1e-14, epsrel=1e-12)
    elif math.isinf(upper):
        val, _ = integrate.quad(f, 0.0, np.inf, weight="cos", wvar=abs(xi), limlst=200, epsabs=1e-13)
    else:
        # the roundoff warning fires on long oscillatory heads; the fixture
        # checks measure the actual error against exact transforms
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", integrate.IntegrationWarning)
            val, _ = integrate.quad(f, 0.0, upper, weight="cos", wvar=abs(xi), limit=400,
                                    epsabs=1e-14, epsrel=1e-12)
    return 2.0 * val


@dataclass(frozen=True)
class LewisFixture:
    name: str
    p: Callable
    phi: Callable
    self_adjoint: bool = False
    support: float = math.inf
    upper: float = math.inf
    sech_phi: Optional[Callable] = None
    notes: str = ""
    probes: np.ndarray = field(default_factory=lambda: np.linspace(-4.0, 4.0, 161), compare=False)
    raw_transform: Optional[Callable[[float], float]] = None

    def transform(self, xi) -> np.ndarray:
        """Numeric Fourier transform (2 pi)^{-1/2} int e^{-i xi x} p(x) dx."""
        xi = np.atleast_1d(np.asarray(xi, dtype=float))
        if self.raw_transform is not None:
            vals = [self.raw_transform(float(v)) for v in xi]
        else:
            scalar_p = lambda x: float(self.p(np.asarray(x)))
            vals = [_fourier_cos(scalar_p, float(v), self.upper) for v in xi]
        return np.asarray(vals) / math.sqrt(2.0 * math.pi)

    def check(self, phi: Callable | None = None, tol: float = 1e-5) -> dict:
        """Compare the transform of p with phi.

        Self-adjoint fixtures compare raw values (the normalization of the
        transform matters there); the others compare shapes normalized at 0.
        """
        phi = phi or self.phi
        xi = self.probes
        ft = self.transform(xi)
        target = np.asarray(phi(xi), dtype=float)
        if self.self_adjoint:
            err = float(np.max(np.abs(ft - target)))
        else:
            ft0 = float(self.transform(0.0)[0])
            err = float(np.max(np.abs(ft / ft0 - target / float(phi(np.asarray(0.0))))))
        return {"name": self.name, "sup_error": err, "tol": tol, "passed": err <= tol}


def _x_over_sinh(x):
    x = np.asarray(x, dtype=float)
    ax = np.abs(x)
    with np.errstate(invalid="ignore", divide="ignore", over="ignore"):
        # x / sinh x = 2 x e^{-x} / (1 - e^{-2x})
        r = np.where(ax < 1e-8, 1.0 - ax * ax / 6.0, 2.0 * ax * np.exp(-ax) / -np.expm1(-2.0 * ax))
    return r


def _sinc_sq(x):
    x = np.asarray(x, dtype=float)
    return np.sinc(x / math.pi) ** 2


def _sinc_sq_transform(xi: float, split: float = 40.0 * math.pi) -> float:
    """int_R e^{-i xi x} (sin x / x)^2 dx, numerically.

    On [0, split] the integrand is handled by the finite-interval Fourier
    rule. Beyond it sin^2 x = (1 - cos 2x)/2 turns the tail into three
    Fourier integrals of the smooth envelope 1/(2x^2).
    """
    f = lambda x: float(_sinc_sq(x))
    head = _fourier_cos(f, xi, split) / 2.0
    env = lambda x: 0.5 / (x * x)

    def tail(w):
        if w == 0.0:
            return 0.5 / split
        val, _ = integrate.quad(env, split, np.inf, weight="cos", wvar=abs(w), limlst=200, epsabs=1e-14)
        return val

    t = tail(xi) - 0.5 * (tail(xi + 2.0) + tail(xi - 2.0))
    return 2.0 * (head + t)


def lewis_fixtures() -> list[LewisFixture]:
    """The three Lewis pairs used as adjointness fixtures.

    For the x/sinh pair the transform of p is sech^2(pi xi / 2), so the
    normalized adjoint is (pi/4) sech^2(pi x / 2); the first-power variant
    pi/(4 cosh(pi x/2)) is kept as ``sech_phi`` for comparison.
    """
    a = math.sqrt(math.pi / 2.0)
    sinh_pair = LewisFixture(
        name="x/sinh",
        p=lambda x: 2.0 / math.pi ** 2 * _x_over_sinh(x),
        phi=lambda x: math.pi / 4.0 / np.cosh(math.pi * np.asarray(x) / 2.0) ** 2,
        upper=80.0,
        sech_phi=lambda x: math.pi / (4.0 * np.cosh(math.pi * np.asarray(x) / 2.0)),
        notes="adjoint is sech^2, not sech",
    )
    sinc_pair = LewisFixture(
        name="sinc^2",
        p=lambda x: _sinc_sq(x) / math.pi,
        phi=lambda x: 0.5 * np.maximum(1.0 - np.abs(np.asarray(x, dtype=float)) / 2.0, 0.0),
        support=2.0,
        raw_transform=lambda v: _sinc_sq_transform(v) / math.pi,
    )
    sech_pair = LewisFixture(
        name="sech",
        p=lambda x: 1.0 / (math.sqrt(2 * math.pi) * np.cosh(a * np.asarray(x, dtype=float))),
        phi=lambda x: 1.0 / (math.sqrt(2 * math.pi) * np.cosh(a * np.asarray(x, dtype=float))),
        self_adjoint=True,
        upper=60.0,
    )
    return [sinh_pair, sinc_pair, sech_pair]
