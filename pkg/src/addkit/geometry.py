"""
Metrics induced by the exponent and by the density shape, ball volumes,
volume doubling and the ball-volume integral formulas for peak values.

d_Q(xi, eta) = Q_{t,s}(xi - eta)^{1/2} lives on the frequency side and
delta_Q(x, y) = (-ln sigma_{1/t}(x - y))^{1/2} on the space side. The
layer-cake identity

    int e^{-rho(x)^2} dx = int_0^inf vol{rho < sqrt(r)} e^{-r} dr

turns ball volumes of either metric into peak values of p_t and Phi_t.
"""

from __future__ import annotations

import math
import threading
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import integrate, optimize

from . import density as dens
from .errors import (
    DegenerateFamilyError,
    ReversedTimeError,
    UnboundedBallError,
    ZeroVolumeError,
)
from .symbols import SymbolFamily, eval_Q

# bisection is carried out in u = ln x on [ln X_MIN, ln X_MAX]
X_MIN = 1e-150
X_MAX = 1e300
GRID_RESOLUTION = 2048


@dataclass(frozen=True, eq=False)
class MetricHandle:
    """A translation-invariant metric rho(u, v) = origin(u - v).

    ``origin`` maps points to their distance from 0. Handles are immutable;
    the ball-volume cache is internal and lock protected.
    """

    origin: Callable[[np.ndarray], np.ndarray]
    kind: str
    dimension: int = 1
    radial_monotone: bool = False
    radial: bool = False
    label: str = ""
    half_width: Optional[float] = None
    resolution: int = GRID_RESOLUTION
    _cache: dict = field(default_factory=dict, repr=False)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def __call__(self, u, v) -> np.ndarray:
        d = np.asarray(u, dtype=float) - np.asarray(v, dtype=float)
        return np.asarray(self.origin(d), dtype=float)

    def cached(self, key, compute):
        with self._lock:
            if key in self._cache:
                return self._cache[key]
        val = compute()
        with self._lock:
            self._cache.setdefault(key, val)
            return self._cache[key]


def metric_from_function(origin: Callable, kind: str = "custom", dimension: int = 1,
                         label: str = "", **kw) -> MetricHandle:
    """Wrap an arbitrary distance-to-origin function (no metric axioms assumed)."""
    return MetricHandle(origin=origin, kind=kind, dimension=dimension, label=label, **kw)


def _sqrt_clip(v):
    return np.sqrt(np.maximum(np.asarray(v, dtype=float), 0.0))


def _is_radial_monotone(family: SymbolFamily) -> bool:
    if family.radial:
        return True
    if family.dimension != 1 or family.base is None:
        return False
    xs = np.logspace(-6, 6, 1201)
    vals = np.asarray(family.base(xs), dtype=float)
    return bool(np.all(np.diff(vals) >= -1e-12 * np.abs(vals[1:])))


def metric_dQ(family: SymbolFamily, s: float, t: float) -> MetricHandle:
    """d(xi, eta) = Q_{t,s}(xi - eta)^{1/2}."""
    if s < 0 or t <= s:
        raise ReversedTimeError(f"need 0 <= s < t, got s={s}, t={t}")
    if family.product_form:
        # degenerate exponents are rejected when the family is built; re-check
        # in case a hand-assembled family slipped through
        probe = np.linspace(0.1, 5.0, 8)
        probe = probe if family.dimension == 1 else np.stack([probe] * family.dimension, axis=1)
        if np.any(np.asarray(family.base(probe)) <= 0):
            raise DegenerateFamilyError(f"{family.family_id}: psi0 has a nontrivial zero set")
    return MetricHandle(
        origin=lambda xi: _sqrt_clip(eval_Q(family, s, t, xi)),
        kind="dQ",
        dimension=family.dimension,
        radial_monotone=_is_radial_monotone(family),
        radial=family.radial,
        label=f"d_Q[{family.family_id}; s={s:g}, t={t:g}]",
    )


def metric_deltaQ(family: SymbolFamily, t: float, mode: str = "auto") -> MetricHandle:
    """delta(x, y) = (-ln sigma_{1/t}(x - y))^{1/2}, the shape metric of p_t."""
    if t <= 0:
        raise ReversedTimeError("delta_Q needs t > 0")
    return MetricHandle(
        origin=lambda x: _sqrt_clip(-dens.log_sigma(family, 1.0 / t, x, mode)),
        kind="deltaQ",
        dimension=family.dimension,
        radial_monotone=_is_radial_monotone(family),
        radial=family.radial,
        label=f"delta_Q[{family.family_id}; t={t:g}]",
    )


# ---------------------------------------------------------------------------
# metric axioms


@dataclass
class AxiomsReport:
    passed: bool
    num_triples: int
    worst_triangle: float
    worst_symmetry: float
    worst_identity: float
    witness: Optional[dict] = None
    tol: float = 1e-10

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def metric_axioms_check(m: MetricHandle, num_triples: int = 100_000, seed: int = 0,
                        tol: float = 1e-10, radius: float = 5.0) -> AxiomsReport:
    """Identity, symmetry and the triangle inequality on seeded random triples.

    Triples are drawn on a mix of scales (radius * 10^k, k = -2..2) so that
    both the small- and large-distance regimes are exercised. The lattice
    triple (0, 1, 2) is always included.
    """
    rng = np.random.default_rng(seed)
    n = m.dimension
    shape = (num_triples, 3) if n == 1 else (num_triples, 3, n)
    scales = radius * 10.0 ** rng.integers(-2, 3, size=num_triples)
    pts = rng.uniform(-1.0, 1.0, size=shape) * (scales[:, None] if n == 1 else scales[:, None, None])
    lattice = np.array([0.0, 1.0, 2.0])
    pts[0] = lattice if n == 1 else np.stack([lattice] + [np.zeros(3)] * (n - 1), axis=1)
    u, v, w = pts[:, 0], pts[:, 1], pts[:, 2]

    uu = m(u, u)
    uv, vu = m(u, v), m(v, u)
    vw, uw = m(v, w), m(u, w)
    slack = uw - (uv + vw)
    bad = np.flatnonzero(slack > tol * (1.0 + np.abs(uw)))
    asym = np.abs(uv - vu) / (1.0 + np.abs(uv))
    rep = AxiomsReport(
        passed=bool(bad.size == 0),
        num_triples=num_triples,
        worst_triangle=float(np.max(slack)),
        worst_symmetry=float(np.max(asym)),
        worst_identity=float(np.max(np.abs(uu))),
        tol=tol,
    )
    if bad.size:
        k = int(bad[0])
        rep.witness = {"u": np.asarray(u[k]).tolist(), "v": np.asarray(v[k]).tolist(),
                       "w": np.asarray(w[k]).tolist(), "rho_uw": float(uw[k]),
                       "rho_uv_plus_rho_vw": float(uv[k] + vw[k])}
    if rep.worst_symmetry > tol or rep.worst_identity > tol:
        rep.passed = False
    return rep


# ---------------------------------------------------------------------------
# ball volumes


def _unit(n: int) -> np.ndarray:
    return np.array(1.0) if n == 1 else np.eye(n)[0]


def _radius_along_axis(m: MetricHandle, r: float) -> float:
    """x* > 0 with rho(x* e_1, 0) = r, by bisection in ln x."""
    e = _unit(m.dimension)
    g = lambda u: float(m.origin(math.exp(u) * e)) - r
    if g(math.log(X_MIN)) >= 0:
        raise ZeroVolumeError(f"{m.label}: radius {r:g} is below the bisection resolution")
    lo, hi, step = math.log(X_MIN), 0.0, 1.0
    while g(hi) < 0:
        lo, hi, step = hi, hi + step, 2.0 * step
        if hi > math.log(X_MAX):
            raise UnboundedBallError(f"{m.label}: rho(x, 0) < {r:g} up to |x| = {X_MAX:g}")
    u = optimize.brentq(g, lo, hi, xtol=1e-14, rtol=4 * np.finfo(float).eps, maxiter=400)
    return math.exp(u)


class _SortedField:
    """Distances on a square grid, sorted once; vol{rho < r} by binary search."""

    def __init__(self, m: MetricHandle, half_width: float, resolution: int):
        n = m.dimension
        h = 2.0 * half_width / resolution
        ax = -half_width + h * (np.arange(resolution) + 0.5)
        pts = np.stack(np.meshgrid(*([ax] * n), indexing="ij"), axis=-1)
        vals = np.asarray(m.origin(pts), dtype=float)
        self.cell = h ** n
        self.sorted = np.sort(vals.ravel())
        edge = [vals[0], vals[-1], vals[:, 0], vals[:, -1]] if n == 2 else [vals[[0, -1]]]
        self.boundary_min = float(min(np.min(b) for b in edge))
        self.half_width = half_width

    def volume(self, r: float) -> float:
        if r > self.boundary_min:
            raise UnboundedBallError(
                f"ball of radius {r:g} reaches the grid boundary (half width {self.half_width:g})")
        return float(np.searchsorted(self.sorted, r, side="left")) * self.cell


def _field(m: MetricHandle, half_width: float, resolution: int) -> _SortedField:
    return m.cached(("field", half_width, resolution), lambda: _SortedField(m, half_width, resolution))


def _auto_half_width(m: MetricHandle, r: float) -> float:
    """Smallest power of two (times 1.25) such that rho >= r along 16 directions."""
    n = m.dimension
    th = np.linspace(0.0, 2 * math.pi, 16, endpoint=False)
    dirs = np.stack([np.cos(th), np.sin(th)], axis=1) if n == 2 else np.array([1.0, -1.0])
    R = 1.0
    while np.min(m.origin(R * dirs)) < r:
        R *= 2.0
        if R > 1e12:
            raise UnboundedBallError(f"{m.label}: ball of radius {r:g} not bounded by |x| = 1e12")
    return 1.25 * R


def ball_volume(m: MetricHandle, r: float) -> float:
    """Lebesgue measure of the open ball {x : rho(x, 0) < r}.

    Radial monotone handles use bisection for the boundary radius x*
    (2 x* in one dimension, pi x*^2 in the plane); other handles count grid
    cells on a ``resolution``-per-axis grid.
    """
    if r <= 0:
        raise ValueError("radius must be positive")
    r = float(r)

    def compute():
        if m.radial_monotone and (m.dimension == 1 or m.radial):
            x = _radius_along_axis(m, r)
            return 2.0 * x if m.dimension == 1 else math.pi * x * x
        L = m.half_width or _auto_half_width(m, r)
        return _field(m, L, m.resolution).volume(r)

    return m.cached(("vol", r), compute)


@dataclass
class BallVolumeCurve:
    radii: np.ndarray
    volumes: np.ndarray
    method: str

    def __post_init__(self):
        self.radii = np.asarray(self.radii, dtype=float)
        self.volumes = np.asarray(self.volumes, dtype=float)
        if np.any(np.diff(self.radii) <= 0):
            raise ValueError("radii must be increasing")

    @property
    def monotone(self) -> bool:
        return bool(np.all(np.diff(self.volumes) >= 0))


def ball_volume_curve(m: MetricHandle, radii: Sequence[float]) -> BallVolumeCurve:
    radii = np.asarray(radii, dtype=float)
    vols = [0.0 if r == 0 else ball_volume(m, r) for r in radii]
    method = "bisection" if m.radial_monotone and (m.dimension == 1 or m.radial) else "grid_count"
    return BallVolumeCurve(radii, np.asarray(vols), method)


@dataclass
class DoublingEstimate:
    """c0 = max vol(B(2r)) / vol(B(r)) over the r grid."""

    c0: float
    c_inner: float
    passed: bool
    radii: np.ndarray
    ratios: np.ndarray

    def __float__(self):
        return self.c0


def doubling_estimate(m: MetricHandle, r_grid: Sequence[float] | None = None,
                      stability: float = 0.1) -> DoublingEstimate:
    """Volume-doubling constant on a finite r grid.

    The estimate passes when it is finite and stable under the window: the
    maximum over the full grid exceeds the maximum over the grid with its
    outermost decade removed at each end by less than ``stability``.
    """
    r_grid = np.asarray(np.logspace(-3, 3, 61) if r_grid is None else r_grid, dtype=float)
    if r_grid.size < 2 or math.log10(r_grid.max() / r_grid.min()) < 3 - 1e-9:
        raise ValueError("r_grid must span at least three decades")
    ratios = np.array([ball_volume(m, 2 * r) / ball_volume(m, r) for r in r_grid])
    c0 = float(np.max(ratios))
    inner = (r_grid >= r_grid.min() * 10) & (r_grid <= r_grid.max() / 10)
    c_inner = float(np.max(ratios[inner])) if np.any(inner) else c0
    passed = bool(np.isfinite(c0) and c0 <= (1.0 + stability) * c_inner)
    return DoublingEstimate(c0, c_inner, passed, r_grid, ratios)


# ---------------------------------------------------------------------------
# peak values from ball volumes


def peak_via_ball_integral(m: MetricHandle, epsrel: float = 1e-10) -> float:
    """(2 pi)^{-n} int_0^inf vol(B(0, sqrt r)) e^{-r} dr.

    Substituting r = u^2 gives int_0^inf vol(B(0, u)) 2u e^{-u^2} du, which is
    smooth at the origin for the usual vol ~ u^n behaviour; it is integrated
    adaptively on [0, U] with e^{-U^2} below double precision.
    """
    n = m.dimension
    U = math.sqrt(745.0)

    def f(u):
        if u <= 0.0:
            return 0.0
        return ball_volume(m, u) * 2.0 * u * math.exp(-u * u)

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        pieces = [0.0, 0.5, 1.0, 2.0, 4.0, 8.0, U]
        total = sum(integrate.quad(f, a, b, epsabs=0.0, epsrel=epsrel, limit=200)[0]
                    for a, b in zip(pieces[:-1], pieces[1:]))
    return total / (2.0 * math.pi) ** n


# ---------------------------------------------------------------------------
# dual formulas


def _dual_reconstruct(prefactor_metric: MetricHandle, exponent_metric: MetricHandle, x):
    """peak(prefactor_metric) * exp(-exponent_metric(x, 0)^2)."""
    peak = peak_via_ball_integral(prefactor_metric)
    return peak, peak * np.exp(-exponent_metric.origin(np.asarray(x, dtype=float)) ** 2)


@dataclass
class DualReport:
    passed: bool
    family: str
    t: float
    tol: float
    p_peak: float
    p_sup_rel_error: float
    phi_peak: float
    phi_sup_rel_error: float
    num_points: int

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def _check_grid(family: SymbolFamily, t: float, grid) -> np.ndarray:
    if grid is not None:
        return np.asarray(grid, dtype=float)
    # span the bulk of p_t: out to where sigma falls to ~1e-8
    m = metric_deltaQ(family, t)
    X = _radius_along_axis(m, math.sqrt(math.log(1e8))) if family.dimension == 1 else 5.0
    ax = np.linspace(-X, X, 201)
    if family.dimension == 1:
        return ax
    return np.stack(np.meshgrid(ax[::4], ax[::4], indexing="ij"), axis=-1).reshape(-1, 2)


def dual_formula_check(family: SymbolFamily, t: float, grid=None, tol: float = 1e-5,
                       floor: float = 1e-10) -> DualReport:
    """Rebuild p_t and Phi_t from ball volumes and compare with direct evaluation.

    p_t(x)   = peak(d_{Q_{t,0}})   * exp(-delta_{Q_{t,0}}(x, 0)^2)
    Phi_t(x) = peak(delta_{Q_{1/t,0}}) * exp(-d_{Q_{1/t,0}}(x, 0)^2)

    Both go through the same reconstruction with the two metrics in swapped
    roles. References are density_point (quadrature) and adjoint_density.
    """
    x = _check_grid(family, t, grid)

    p_peak, p_rec = _dual_reconstruct(metric_dQ(family, 0.0, t), metric_deltaQ(family, t), x)
    p_ref = np.asarray(dens.density_point(family, 0.0, t, x))
    phi_peak, phi_rec = _dual_reconstruct(metric_deltaQ(family, 1.0 / t), metric_dQ(family, 0.0, 1.0 / t), x)
    phi_ref = np.asarray(dens.adjoint_density(family, t, x))

    def sup_rel(rec, ref):
        mask = ref > floor
        return float(np.max(np.abs(rec[mask] - ref[mask]) / ref[mask]))

    e_p, e_phi = sup_rel(p_rec, p_ref), sup_rel(phi_rec, phi_ref)
    return DualReport(passed=bool(e_p <= tol and e_phi <= tol), family=family.family_id, t=float(t),
                      tol=tol, p_peak=p_peak, p_sup_rel_error=e_p, phi_peak=phi_peak,
                      phi_sup_rel_error=e_phi, num_points=int(np.shape(x)[0]))


def comparability_ratio(family: SymbolFamily, t: float, s: float = 0.0,
                        kappa0: float | None = None, kappa1: float | None = None) -> float:
    """p_{t,s}(0) / vol(B^{d_psi}(0, sqrt(kappa1/kappa0))) with the family's psi.

    Returned for inspection of the bounded-ratio property; the comparison
    ball is taken for the reference exponent psi, which for product families
    is the base exponent scaled by h(t) - h(s).
    """
    k0 = family.kappa0 if kappa0 is None else kappa0
    k1 = family.kappa1 if kappa1 is None else kappa1
    zero = np.zeros(()) if family.dimension == 1 else np.zeros(family.dimension)
    peak = float(dens.density_point(family, s, t, zero))
    m = metric_dQ(family, s, t)
    return peak / ball_volume(m, math.sqrt(k1 / k0))
