"""
Evolution operators as Fourier multipliers on periodic grids.

H_{t,s}: multiplier e^{-(Q(t, xi) - Q(s, xi))}, convolution with mu_{t,s}.
V(t,s):  multiplier sigma_t / sigma_s = e^{-int_s^t A(tau, xi) dtau}.
S_t:     multiplier sigma_t, convolution with rho_{1/t}.

Functions live on the centred grid of ``density.GridSpec``; all operators
are circular convolutions, so composition and commutation hold to rounding.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import integrate

from . import density as dens
from .density import GridSpec
from .errors import GridMismatchError, ReversedTimeError
from .report import Check, CheckList, check_le
from .symbols import SymbolFamily, eval_q, eval_Q

CONTRACTION_SLACK = 1e-12


@dataclass(frozen=True)
class FunctionGrid:
    """Immutable snapshot of function values on a resolved grid."""

    grid: GridSpec
    values: np.ndarray
    sup_norm: float = field(init=False)
    l2_norm: float = field(init=False)

    def __post_init__(self):
        if self.grid.half_width is None:
            raise GridMismatchError("FunctionGrid needs a grid with an explicit half width")
        v = np.array(self.values, copy=True)
        if v.shape != (self.grid.num_points,) * self.grid.dimension:
            raise GridMismatchError(f"values of shape {v.shape} do not fit the grid")
        if not np.all(np.isfinite(v)):
            raise ValueError("function values must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "sup_norm", float(np.max(np.abs(v))))
        object.__setattr__(self, "l2_norm", float(np.sqrt(np.sum(np.abs(v) ** 2) * self.grid.cell)))

    @property
    def is_real(self) -> bool:
        return not np.iscomplexobj(self.values)

    def integral(self) -> complex | float:
        return np.sum(self.values) * self.grid.cell

    def __sub__(self, other: "FunctionGrid") -> "FunctionGrid":
        _same_grid(self, other)
        return FunctionGrid(self.grid, self.values - other.values)


def _same_grid(u: FunctionGrid, v: FunctionGrid):
    if u.grid != v.grid:
        raise GridMismatchError("functions live on different grids")


def sample(f: Callable[[np.ndarray], np.ndarray], grid: GridSpec) -> FunctionGrid:
    return FunctionGrid(grid, np.asarray(f(grid.points())))


def bump(grid: GridSpec, width: float = 10.0) -> FunctionGrid:
    """C-infinity bump exp(1 - 1/(1 - |x/width|^2)) with peak 1, zero outside."""
    x = grid.points()
    r2 = x ** 2 if grid.dimension == 1 else np.sum(x ** 2, axis=-1)
    z = r2 / width ** 2
    with np.errstate(divide="ignore", over="ignore"):
        vals = np.where(z < 1.0, np.exp(1.0 - 1.0 / (1.0 - np.minimum(z, 1.0 - 1e-300))), 0.0)
    return FunctionGrid(grid, vals)


def default_grid(dimension: int = 1) -> GridSpec:
    return GridSpec(dimension, 1024 if dimension == 1 else 256, 32.0)


def _apply_multiplier(u: FunctionGrid, multiplier: np.ndarray) -> FunctionGrid:
    n = u.grid.dimension
    axes = tuple(range(n))
    U = np.fft.fftn(np.fft.ifftshift(u.values, axes=axes), axes=axes)
    M = np.fft.ifftshift(multiplier, axes=axes)
    out = np.fft.fftshift(np.fft.ifftn(M * U, axes=axes), axes=axes)
    if u.is_real and not np.iscomplexobj(multiplier):
        out = out.real
    return FunctionGrid(u.grid, out)


def _check_family_grid(family: SymbolFamily, u: FunctionGrid):
    if u.grid.dimension != family.dimension:
        raise GridMismatchError(
            f"grid dimension {u.grid.dimension} != family dimension {family.dimension}")


def multiplier_H(family: SymbolFamily, s: float, t: float, xi) -> np.ndarray:
    return np.exp(-eval_Q(family, s, t, xi))


def multiplier_V(family: SymbolFamily, s: float, t: float, xi, mode: str = "auto") -> np.ndarray:
    return np.exp(dens.log_sigma(family, t, xi, mode) - dens.log_sigma(family, s, xi, mode))


def apply_H(family: SymbolFamily, s: float, t: float, u: FunctionGrid) -> FunctionGrid:
    """H_{t,s} u = (mu_{t,s} * u)."""
    if s < 0 or t < s:
        raise ReversedTimeError(f"need 0 <= s <= t, got s={s}, t={t}")
    _check_family_grid(family, u)
    if s == t:
        return u
    return _apply_multiplier(u, multiplier_H(family, s, t, u.grid.freq_points()))


def apply_V(family: SymbolFamily, s: float, t: float, u: FunctionGrid, mode: str = "auto") -> FunctionGrid:
    """V(t, s) u = (gamma_{t,s} * u), with the time integral of A telescoped."""
    if s < 0 or t < s:
        raise ReversedTimeError(f"need 0 <= s <= t, got s={s}, t={t}")
    _check_family_grid(family, u)
    if s == t:
        return u
    return _apply_multiplier(u, multiplier_V(family, s, t, u.grid.freq_points(), mode))


def apply_S(family: SymbolFamily, t: float, u: FunctionGrid, mode: str = "auto") -> FunctionGrid:
    """S_t u = (rho_{1/t} * u), multiplier sigma_t."""
    if t <= 0:
        raise ReversedTimeError("S_t needs t > 0")
    _check_family_grid(family, u)
    return _apply_multiplier(u, np.exp(dens.log_sigma(family, t, u.grid.freq_points(), mode)))


def _apply_symbol(u: FunctionGrid, symbol: np.ndarray) -> FunctionGrid:
    """Apply the (unbounded) multiplier ``symbol``, e.g. q(t, D)."""
    return _apply_multiplier(u, symbol)


# ---------------------------------------------------------------------------
# fundamental-solution axioms


@dataclass(frozen=True)
class _Operator:
    name: str
    apply: Callable[[float, float, FunctionGrid], FunctionGrid]
    generator: Callable[[float, np.ndarray], np.ndarray]


def _operators(family: SymbolFamily, mode: str) -> list[_Operator]:
    return [
        _Operator("H", lambda s, t, u: apply_H(family, s, t, u), lambda t, xi: eval_q(family, t, xi)),
        _Operator("V", lambda s, t, u: apply_V(family, s, t, u, mode),
                  lambda t, xi: dens.adjoint_exponent(family, t, xi, mode)),
    ]


def fundamental_solution_check(family: SymbolFamily, times: Sequence[float], u: FunctionGrid | None = None,
                               tol: float = 1e-5, mode: str = "auto", rel_step: float = 1e-4) -> CheckList:
    """Itemized checks of the evolution axioms for H and V.

    (a) composition U(t,r) U(r,s) = U(t,s)
    (b) U(s,s) = id
    (c) d/dt U(t,s)u = -G(t, D) U(t,s)u       (central difference, step rel_step * t)
    (d) d/ds U(t,s)u = U(t,s) G(s, D) u
    plus sup and L2 contraction of U(t,s), U(t,r), U(r,s); G is q for H and A for V.
    Errors in (a), (c), (d) are scaled by 1 + sup of the reference side.
    """
    s, r, t = (float(v) for v in times)
    if not 0 <= s <= r <= t:
        raise ReversedTimeError(f"need 0 <= s <= r <= t, got {times}")
    u = u or bump(default_grid(family.dimension))
    xi = u.grid.freq_points()
    out = CheckList(f"fundamental_solution[{family.family_id}]",
                    meta={"times": [s, r, t], "tol": tol, "rel_step": rel_step})
    for op in _operators(family, mode):
        U = op.apply
        full = U(s, t, u)
        comp = U(r, t, U(s, r, u))
        out.add(check_le(f"{op.name}.composition", (comp - full).sup_norm, tol * (1 + full.sup_norm)))
        ident = U(s, s, u)
        out.add(Check(f"{op.name}.identity", (ident - u).sup_norm, 0.0, bool(np.array_equal(ident.values, u.values))))

        if t == s:
            for item in ("forward_derivative", "backward_derivative"):
                out.add(Check(f"{op.name}.{item}", None, None, True, "skipped: s = t"))
        else:
            dt = rel_step * t
            fd = FunctionGrid(u.grid, (U(s, t + dt, u).values - U(s, t - dt, u).values) / (2 * dt)) \
                if t - dt > s else None
            if fd is None:
                out.add(Check(f"{op.name}.forward_derivative", None, None, True, "skipped: t - dt <= s"))
            else:
                ref = _apply_symbol(full, -op.generator(t, xi))
                out.add(check_le(f"{op.name}.forward_derivative", (fd - ref).sup_norm, tol * (1 + ref.sup_norm)))
            ds = rel_step * s
            if s == 0.0 or s + ds >= t:
                out.add(Check(f"{op.name}.backward_derivative", None, None, True, "skipped: s = 0"))
            else:
                fd = FunctionGrid(u.grid, (U(s + ds, t, u).values - U(s - ds, t, u).values) / (2 * ds))
                ref = U(s, t, _apply_symbol(u, op.generator(s, xi)))
                out.add(check_le(f"{op.name}.backward_derivative", (fd - ref).sup_norm, tol * (1 + ref.sup_norm)))

        for a, b in ((s, t), (s, r), (r, t)):
            w = U(a, b, u)
            out.add(check_le(f"{op.name}.contraction_sup[{a:g},{b:g}]", w.sup_norm - u.sup_norm,
                             CONTRACTION_SLACK * u.sup_norm))
            out.add(check_le(f"{op.name}.contraction_l2[{a:g},{b:g}]", w.l2_norm - u.l2_norm,
                             CONTRACTION_SLACK * u.l2_norm))
    return out


# ---------------------------------------------------------------------------
# Chapman-Kolmogorov


def _common_grid(exponents: Sequence[Callable], dimension: int, grid: GridSpec | None) -> GridSpec:
    lowest = lambda xi: np.minimum.reduce([np.asarray(e(xi), dtype=float) for e in exponents])
    return dens.resolve_grid(lowest, grid or GridSpec(dimension))


def _convolve_tables(a: dens.DensityTable, b: dens.DensityTable) -> np.ndarray:
    g = a.grid
    spec = dens._forward_transform(a.values, g) * dens._forward_transform(b.values, g)
    return dens._inverse_transform(spec, g).real


def integrated_adjoint_exponent(family: SymbolFamily, s: float, t: float, xi, mode: str = "auto",
                                epsrel: float = 1e-12) -> np.ndarray:
    """int_s^t A(tau, xi) dtau by adaptive quadrature in tau (no telescoping)."""
    if s == t:
        return np.zeros(np.shape(xi) if family.dimension == 1 else np.shape(xi)[:-1])
    lo = max(s, 1e-300)
    f = lambda tau: np.asarray(dens.adjoint_exponent(family, tau, xi, mode), dtype=float)
    val, _ = integrate.quad_vec(f, lo, t, epsabs=1e-14, epsrel=epsrel, limit=400)
    return val


def chapman_kolmogorov_check(family: SymbolFamily, s: float, r: float, t: float,
                             grid: GridSpec | None = None, tol: float = 1e-6,
                             mode: str = "auto") -> CheckList:
    """mu_{t,r} * mu_{r,s} = mu_{t,s} and gamma_{t,r} * gamma_{r,s} = gamma_{t,s}.

    mu: density tables on a common grid, convolved by FFT. gamma: tables
    when all three increment laws have densities, and in every case the
    spectral identity with int A evaluated by time quadrature per interval.
    """
    if not 0 <= s < r < t:
        raise ReversedTimeError(f"need 0 <= s < r < t, got ({s}, {r}, {t})")
    out = CheckList(f"chapman_kolmogorov[{family.family_id}]", meta={"s": s, "r": r, "t": t, "tol": tol})

    Qs = [lambda xi, a=a, b=b: eval_Q(family, a, b, xi) for a, b in ((r, t), (s, r))]
    g = _common_grid(Qs, family.dimension, grid)
    p_tr = dens.density_grid(family, r, t, g)
    p_rs = dens.density_grid(family, s, r, g)
    p_ts = dens.density_grid(family, s, t, g)
    err = float(np.max(np.abs(_convolve_tables(p_tr, p_rs) - p_ts.values)))
    out.add(check_le("mu.table_convolution", err, tol, f"N={g.num_points}, L={g.half_width:.6g}"))

    # gamma via quadrature of A: spectral identity on a frequency grid
    xi = np.linspace(-50.0, 50.0, 2001) if family.dimension == 1 else \
        np.stack(np.meshgrid(*([np.linspace(-20.0, 20.0, 81)] * 2), indexing="ij"), axis=-1)
    I_tr = integrated_adjoint_exponent(family, r, t, xi, mode)
    I_rs = integrated_adjoint_exponent(family, s, r, xi, mode)
    I_ts = integrated_adjoint_exponent(family, s, t, xi, mode)
    err = float(np.max(np.abs(np.exp(-I_tr) * np.exp(-I_rs) - np.exp(-I_ts))))
    out.add(check_le("gamma.spectral", err, tol, "int A by quadrature in time"))
    tele = float(np.max(np.abs(np.exp(-I_ts) - multiplier_V(family, s, t, xi, mode))))
    out.add(check_le("gamma.quadrature_vs_telescoped", tele, tol))

    try:
        Gs = [dens.gamma_exponent(family, a, b, mode) for a, b in ((r, t), (s, r))]
        gg = _common_grid(Gs, family.dimension, grid)
        g_tr = dens.gamma_grid(family, r, t, gg, mode=mode)
        g_rs = dens.gamma_grid(family, s, r, gg, mode=mode)
        g_ts = dens.gamma_grid(family, s, t, gg, mode=mode)
    except Exception as exc:  # no density for some gamma increment
        out.add(Check("gamma.table_convolution", None, tol, True, f"skipped: {type(exc).__name__}"))
    else:
        err = float(np.max(np.abs(_convolve_tables(g_tr, g_rs) - g_ts.values)))
        out.add(check_le("gamma.table_convolution", err, tol))
    return out


def mollifier_errors(family: SymbolFamily, u: FunctionGrid, ts: Sequence[float] = (1.0, 0.1, 0.01)) -> list[float]:
    """sup |S_t u - u| along the given times."""
    return [(apply_S(family, t, u) - u).sup_norm for t in ts]
