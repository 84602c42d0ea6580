"""
Transition densities by Fourier inversion.

p_{t,s}(x) = (2 pi)^{-n} int e^{i x.xi} e^{-Q_{t,s}(xi)} dxi is evaluated on
a centred uniform grid with the FFT, or pointwise by adaptive oscillatory
quadrature in one dimension. The same machinery yields the normalized shape
sigma_t(xi) = p_{1/t}(xi)/p_{1/t}(0), the adjoint exponent
A(t, xi) = -d/dt ln sigma_t(xi), the adjoint density Phi_t and the
increment laws gamma_{t,s} of the adjoint process.

Grid convention: x_k = (k - N/2) dx and xi_j = (j - N/2) dxi with
dx dxi = 2 pi / N, so the frequency cutoff is Xi = pi N / (2 L).
"""

from __future__ import annotations

import functools
import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np
from scipy import integrate, interpolate, optimize

from . import oracles
from .errors import (
    AssumptionViolationError,
    GridMismatchError,
    InsufficientDecayError,
    ReversedTimeError,
    StepUnderflowError,
    UnimodalityWarning,
)
from .symbols import SymbolFamily, check_point, eval_Q, split_point

TAIL_EPS = 1e-14
# pointwise quadrature truncates where e^{-Q} < 1e-30
QUAD_LEVEL = math.log(1e30)


# ---------------------------------------------------------------------------
# grids


@dataclass(frozen=True)
class GridSpec:
    """Uniform grid on [-L, L)^n with N points per axis.

    ``half_width=None`` means "choose L from the decay of the spectrum".
    """

    dimension: int = 1
    num_points: Optional[int] = None
    half_width: Optional[float] = None

    def __post_init__(self):
        if self.dimension not in (1, 2):
            raise ValueError("grids support n = 1 or 2")
        if self.num_points is None:
            object.__setattr__(self, "num_points", 4096 if self.dimension == 1 else 512)
        N = self.num_points
        if N < 64 or N & (N - 1):
            raise ValueError(f"num_points must be a power of two >= 64, got {N}")
        if self.half_width is not None and not self.half_width > 0:
            raise ValueError("half_width must be positive")

    @property
    def resolved(self) -> bool:
        return self.half_width is not None

    @property
    def dx(self) -> float:
        return 2.0 * self.half_width / self.num_points

    @property
    def dxi(self) -> float:
        return math.pi / self.half_width

    @property
    def cutoff(self) -> float:
        return math.pi * self.num_points / (2.0 * self.half_width)

    def axis(self) -> np.ndarray:
        N = self.num_points
        return (np.arange(N) - N // 2) * self.dx

    def freq_axis(self) -> np.ndarray:
        N = self.num_points
        return (np.arange(N) - N // 2) * self.dxi

    def points(self) -> np.ndarray:
        """Spatial nodes: shape (N,) for n = 1, (N, N, 2) for n = 2."""
        return _mesh(self.axis(), self.dimension)

    def freq_points(self) -> np.ndarray:
        return _mesh(self.freq_axis(), self.dimension)

    @property
    def cell(self) -> float:
        return self.dx ** self.dimension


def _mesh(ax: np.ndarray, n: int) -> np.ndarray:
    if n == 1:
        return ax
    X, Y = np.meshgrid(ax, ax, indexing="ij")
    return np.stack([X, Y], axis=-1)


def _axis_directions(n: int) -> list[np.ndarray]:
    if n == 1:
        return [np.array(1.0)]
    return [np.array([1.0, 0.0]), np.array([0.0, 1.0])]


def exponent_cutoff(exponent: Callable[[np.ndarray], np.ndarray], n: int, level: float,
                    upper: float = 1e12) -> float:
    """Smallest Xi with exponent(Xi e) >= level along every coordinate axis e."""
    out = 0.0
    for e in _axis_directions(n):
        f = lambda r: float(exponent(r * e)) - level
        hi = 1.0
        while f(hi) < 0:
            hi *= 2.0
            if hi > upper:
                raise InsufficientDecayError(
                    f"spectrum exponent stays below {level:.3g} up to |xi| = {upper:.3g}"
                )
        lo = 0.0 if f(hi / 2) >= 0 else hi / 2
        out = max(out, optimize.brentq(f, lo, hi, xtol=1e-12, rtol=1e-12))
    return out


def resolve_grid(exponent: Callable[[np.ndarray], np.ndarray], grid: GridSpec | None,
                 tail_eps: float = TAIL_EPS, dimension: int = 1) -> GridSpec:
    """Fix L for a spectrum e^{-exponent} and check decay at the cutoff."""
    grid = grid or GridSpec(dimension)
    level = math.log(1.0 / tail_eps)
    if not grid.resolved:
        xi_max = exponent_cutoff(exponent, grid.dimension, level)
        return replace(grid, half_width=math.pi * grid.num_points / (2.0 * xi_max))
    for e in _axis_directions(grid.dimension):
        val = float(exponent(grid.cutoff * e))
        if val < level * (1.0 - 1e-9):
            raise InsufficientDecayError(
                f"exponent {val:.3g} < ln(1/tail_eps) = {level:.3g} at cutoff {grid.cutoff:.4g}; "
                "enlarge N or shrink L"
            )
    return grid


def _inverse_transform(spectrum: np.ndarray, grid: GridSpec) -> np.ndarray:
    """(2 pi)^{-n} sum_j e^{i x_k xi_j} S_j dxi^n on the centred grid."""
    N, n = grid.num_points, grid.dimension
    axes = tuple(range(n))
    vals = np.fft.fftshift(np.fft.ifftn(np.fft.ifftshift(spectrum, axes=axes), axes=axes), axes=axes)
    return vals * (N * grid.dxi / (2.0 * math.pi)) ** n


def _forward_transform(values: np.ndarray, grid: GridSpec) -> np.ndarray:
    """sum_k e^{-i x_k xi_j} v_k dx^n on the centred grid."""
    n = grid.dimension
    axes = tuple(range(n))
    out = np.fft.fftshift(np.fft.fftn(np.fft.ifftshift(values, axes=axes), axes=axes), axes=axes)
    return out * grid.dx ** n


# ---------------------------------------------------------------------------
# density tables


@dataclass
class DensityTable:
    """Density values on a resolved grid, plus normalization metadata."""

    grid: GridSpec
    values: np.ndarray
    t: float
    s: float
    family_id: str
    total_mass: float = float("nan")
    clipped_mass: float = 0.0
    min_raw: float = 0.0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if math.isnan(self.total_mass):
            self.total_mass = trapezoid_mass(self.values, self.grid)

    @property
    def x(self) -> np.ndarray:
        return self.grid.axis()

    def interpolator(self):
        if self.grid.dimension == 1:
            return interpolate.CubicSpline(self.x, self.values)
        ax = self.x
        return interpolate.RegularGridInterpolator((ax, ax), self.values, method="cubic",
                                                   bounds_error=False, fill_value=0.0)

    def __call__(self, x) -> np.ndarray:
        """Cubic interpolation; zero outside the grid."""
        x = np.asarray(x, dtype=float)
        f = self.interpolator()
        L = self.grid.half_width
        if self.grid.dimension == 1:
            inside = (x >= self.x[0]) & (x <= self.x[-1])
            return np.where(inside, f(np.clip(x, self.x[0], self.x[-1])), 0.0)
        out = f(x.reshape(-1, 2)).reshape(x.shape[:-1])
        return np.where(np.all(np.abs(x) < L, axis=-1), out, 0.0)


def trapezoid_mass(values: np.ndarray, grid: GridSpec) -> float:
    """Trapezoidal mass over one period of the grid.

    FFT tables are one period of the periodized density, for which the
    trapezoidal rule reduces to dx^n times the plain sum.
    """
    return float(np.sum(values) * grid.cell)


def _table_from_spectrum(spectrum: np.ndarray, grid: GridSpec, s: float, t: float,
                         family_id: str, **meta) -> DensityTable:
    raw = _inverse_transform(spectrum, grid).real
    neg = raw < 0
    clipped = float(-np.sum(raw[neg]) * grid.cell) + 0.0
    min_raw = float(raw.min())
    values = np.where(neg, 0.0, raw)
    return DensityTable(grid=grid, values=values, t=t, s=s, family_id=family_id,
                        clipped_mass=clipped, min_raw=min_raw, meta=dict(meta))


def density_grid(family: SymbolFamily, s: float, t: float, grid: GridSpec | None = None,
                 tail_eps: float = TAIL_EPS) -> DensityTable:
    """Density p_{t,s} of the increment Y_t - Y_s on a uniform grid (FFT)."""
    _check_times(s, t, strict=True)
    grid = grid or GridSpec(family.dimension)
    if grid.dimension != family.dimension:
        raise GridMismatchError(f"grid dimension {grid.dimension} != family dimension {family.dimension}")
    expo = lambda xi: eval_Q(family, s, t, xi)
    grid = resolve_grid(expo, grid, tail_eps)
    spectrum = np.exp(-expo(grid.freq_points()))
    return _table_from_spectrum(spectrum, grid, s, t, family.family_id, process="Y")


def _check_times(s, t, strict=False):
    if s < 0 or t < 0:
        raise ReversedTimeError(f"negative time (s={s}, t={t})")
    if s > t or (strict and s == t):
        raise ReversedTimeError(f"need s < t, got s={s}, t={t}")


def _cutoff_1d(family: SymbolFamily, s: float, t: float) -> float:
    return exponent_cutoff(lambda xi: eval_Q(family, s, t, xi), 1, QUAD_LEVEL)


@functools.lru_cache(maxsize=4096)
def _density_point_1d(family: SymbolFamily, s: float, t: float, x: float) -> float:
    upper = _cutoff_1d(family, s, t)
    f = lambda xi: float(np.exp(-eval_Q(family, s, t, xi)))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        if x == 0.0:
            val, _ = integrate.quad(f, 0.0, upper, epsabs=0.0, epsrel=1e-13, limit=400)
        else:
            val, _ = integrate.quad(f, 0.0, upper, weight="cos", wvar=abs(x),
                                    epsabs=1e-300, epsrel=1e-12, limit=800)
    return val / math.pi


@functools.lru_cache(maxsize=32)
def _planar_table(family: SymbolFamily, s: float, t: float) -> DensityTable:
    return density_grid(family, s, t, GridSpec(2, 512))


def density_point(family: SymbolFamily, s: float, t: float, x) -> np.ndarray:
    """Pointwise density p_{t,s}(x).

    In one dimension this is (1/pi) int_0^Xi cos(x xi) e^{-Q(xi)} dxi by
    QUADPACK (relative accuracy ~1e-10 for moderate |x|; the oscillatory
    rule loses accuracy once p(x) drops below ~1e-12). Direct sums of
    one-dimensional parts are products of the marginals. Otherwise in two
    dimensions the value is interpolated from a 512 x 512 FFT table.
    """
    _check_times(s, t, strict=True)
    x = check_point(family, x)
    if family.parts and all(f.dimension == 1 for f in family.parts):
        return np.prod([density_point(f, s, t, c) for f, c in zip(family.parts, split_point(family, x))], axis=0)
    if family.dimension == 1:
        flat = [_density_point_1d(family, float(s), float(t), float(v)) for v in np.ravel(x)]
        out = np.asarray(flat).reshape(np.shape(x))
        return out if out.ndim else float(out)
    return _planar_table(family, float(s), float(t))(x)


# ---------------------------------------------------------------------------
# normalized shapes and the adjoint exponent


def sigma(family: SymbolFamily, t: float, xi) -> np.ndarray:
    """sigma_t(xi) = p_{1/t}(xi) / p_{1/t}(0) from numerically inverted densities."""
    if t <= 0:
        raise ReversedTimeError("sigma needs t > 0")
    num = np.asarray(density_point(family, 0.0, 1.0 / t, xi))
    zero = np.zeros(()) if family.dimension == 1 else np.zeros(family.dimension)
    val = num / float(density_point(family, 0.0, 1.0 / t, zero))
    if np.any(val > 1.0 + 1e-9):
        warnings.warn(f"{family.family_id}: sigma_{t} exceeds 1 (max {np.max(val):.6g}); "
                      "density is not maximal at the origin", UnimodalityWarning, stacklevel=2)
    return val if np.ndim(val) else float(val)


def log_sigma(family: SymbolFamily, t: float, xi, mode: str = "auto") -> np.ndarray:
    """ln sigma_t(xi).

    mode "auto" uses a registered closed form when there is one and the
    numerical inversion otherwise; "closed_form" and "numeric" force a route.
    t = 0 is allowed and gives 0 (sigma_t -> 1 as t -> 0).
    """
    xi = check_point(family, xi)
    if t == 0:
        return np.zeros(xi.shape if family.dimension == 1 else xi.shape[:-1])
    if mode in ("auto", "closed_form"):
        val = oracles.log_sigma_closed(family, t, xi)
        if val is not None:
            return val
        if mode == "closed_form":
            raise ValueError(f"no closed form of sigma for {family.family_id}")
    with np.errstate(divide="ignore"):
        return np.log(sigma(family, t, xi))


def adjoint_exponent(family: SymbolFamily, t: float, xi, mode: str = "auto") -> np.ndarray:
    """A(t, xi) = -d/dt ln sigma_t(xi).

    "auto"/"closed_form" use the registered closed form; "finite_difference"
    takes a central difference of the numerically inverted ln sigma with
    step dt = max(1e-4, 1e-4 t).
    """
    if t <= 0:
        raise ReversedTimeError("A(t, xi) needs t > 0")
    xi = check_point(family, xi)
    if mode in ("auto", "closed_form"):
        val = oracles.adjoint_exponent_closed(family, t, xi)
        if val is not None:
            return val
        if mode == "closed_form":
            raise ValueError(f"no closed form of A for {family.family_id}")
    dt = max(1e-4, 1e-4 * t)
    if t - dt <= 0:
        raise StepUnderflowError(f"t={t} too small for a central difference with dt={dt}")
    sp = np.asarray(sigma(family, t + dt, xi))
    sm = np.asarray(sigma(family, t - dt, xi))
    if np.any(sp < 1e-300) or np.any(sm < 1e-300):
        raise StepUnderflowError("sigma underflows; ln sigma is not resolvable here")
    return -(np.log(sp) - np.log(sm)) / (2.0 * dt)


@dataclass(frozen=True)
class AdjointExponent:
    family: SymbolFamily
    mode: str = "auto"

    def __call__(self, t, xi):
        return adjoint_exponent(self.family, t, xi, self.mode)


def _zero(family):
    return np.zeros(()) if family.dimension == 1 else np.zeros(family.dimension)


def adjoint_density(family: SymbolFamily, t: float, x) -> np.ndarray:
    """Phi_t(x) = e^{-Q(1/t, x)} / ((2 pi)^n p_{1/t}(0)), a probability density."""
    if t <= 0:
        raise ReversedTimeError("Phi_t needs t > 0")
    return rho_density(family, 1.0 / t, x)


def rho_density(family: SymbolFamily, t: float, xi) -> np.ndarray:
    """rho_t(xi) = e^{-Q(t, xi)} / ((2 pi)^n p_t(0)).

    Normalized with (2 pi)^n so that rho_t is a probability density; its
    characteristic function is p_t(y)/p_t(0).
    """
    if t <= 0:
        raise ReversedTimeError("rho_t needs t > 0")
    xi = check_point(family, xi)
    n = family.dimension
    peak = float(density_point(family, 0.0, t, _zero(family)))
    return np.exp(-eval_Q(family, 0.0, t, xi)) / ((2.0 * math.pi) ** n * peak)


def adjointness_check(family: SymbolFamily, t: float, grid: GridSpec | None = None,
                      tol: float = 1e-6) -> dict:
    """Compare the normalized transform of p_t with the normalized Phi_{1/t}."""
    table = density_grid(family, 0.0, t, grid)
    g = table.grid
    ft = _forward_transform(table.values, g).real
    centre = (g.num_points // 2,) * g.dimension
    ft = ft / ft[centre]
    xi = g.freq_points()
    phi = np.asarray(adjoint_density(family, 1.0 / t, xi))
    phi = phi / float(adjoint_density(family, 1.0 / t, _zero(family)))
    err = float(np.max(np.abs(ft - phi)))
    return {"check": "adjointness", "family": family.family_id, "t": t, "sup_error": err,
            "tol": tol, "passed": bool(err <= tol), "num_points": g.num_points,
            "half_width": g.half_width}


def tail_ratio(family: SymbolFamily, delta: float, t: float) -> float:
    """int_{|xi|>delta} e^{-Q(t,xi)} dxi / int e^{-Q(t,xi)} dxi."""
    if delta <= 0 or t <= 0:
        raise ValueError("need delta > 0 and t > 0")
    n = family.dimension
    f_dir = lambda r, e: float(np.exp(-eval_Q(family, 0.0, t, r * e)))
    quad = functools.partial(integrate.quad, epsabs=0.0, epsrel=1e-12, limit=400)
    if n == 1 or family.radial:
        e = np.array(1.0) if n == 1 else np.array([1.0, 0.0])
        upper = exponent_cutoff(lambda xi: eval_Q(family, 0.0, t, xi), n, QUAD_LEVEL)
        w = (lambda r: 1.0) if n == 1 else (lambda r: r)
        if delta >= upper:
            return 0.0
        outer = quad(lambda r: f_dir(r, e) * w(r), delta, upper)[0]
        inner = quad(lambda r: f_dir(r, e) * w(r), 0.0, delta)[0]
        return outer / (inner + outer)
    upper = exponent_cutoff(lambda xi: eval_Q(family, 0.0, t, xi), n, QUAD_LEVEL) * math.sqrt(2.0)

    def polar(lo, hi):
        g = lambda r, th: f_dir(r, np.array([math.cos(th), math.sin(th)])) * r
        return integrate.dblquad(g, 0.0, 2 * math.pi, lo, hi, epsabs=0.0, epsrel=1e-10)[0]

    outer, inner = polar(delta, max(upper, delta)), polar(0.0, delta)
    return outer / (inner + outer)


# ---------------------------------------------------------------------------
# increment laws of the adjoint process


def gamma_exponent(family: SymbolFamily, s: float, t: float, mode: str = "auto"):
    """xi -> int_s^t A(tau, xi) dtau, computed as ln sigma_s - ln sigma_t."""
    _check_times(s, t)
    return lambda xi: log_sigma(family, s, xi, mode) - log_sigma(family, t, xi, mode)


def gamma_grid(family: SymbolFamily, s: float, t: float, grid: GridSpec | None = None,
               tail_eps: float = TAIL_EPS, mode: str = "auto",
               neg_tol: float = 1e-10) -> DensityTable:
    """Density of X_t - X_s, the inverse transform of sigma_t / sigma_s.

    Raises InsufficientDecayError when the multiplier does not decay (the
    increment law then has an atom or a non-integrable spectrum) and
    AssumptionViolationError when the inversion is visibly not a density.
    """
    _check_times(s, t, strict=True)
    grid = grid or GridSpec(family.dimension)
    expo = gamma_exponent(family, s, t, mode)
    grid = resolve_grid(expo, grid, tail_eps)
    spectrum = np.exp(-expo(grid.freq_points()))
    table = _table_from_spectrum(spectrum, grid, s, t, family.family_id, process="X")
    if table.min_raw < -neg_tol * float(table.values.max()):
        raise AssumptionViolationError(
            f"inverse transform of sigma_{t}/sigma_{s} has negative lobes ({table.min_raw:.3g}); "
            "the multiplier is not positive definite"
        )
    return table
