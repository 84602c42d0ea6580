"""
Skeleton paths of Y (increments mu_{t,s}) and of the adjoint process X
(increments gamma_{t,s}) on a finite time grid, by tabulated inverse CDFs.

Paths are sampled only at the grid times; nothing is asserted about their
behaviour between grid points.
"""

from __future__ import annotations

import csv
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterator, Optional, Sequence

import numpy as np
from scipy import interpolate

from . import density as dens
from .density import DensityTable, GridSpec
from .errors import (
    AssumptionViolationError,
    ConfigError,
    InsufficientDecayError,
    NonNormalizedTableError,
    ReversedTimeError,
)
from .report import Check, CheckList, write_atomic
from .symbols import SymbolFamily, eval_Q, family_from_config

SAMPLER_POINTS = 2 ** 20
CHUNK = 65536
MASS_TOL = 1e-6


# ---------------------------------------------------------------------------
# inverse-CDF sampling


@dataclass(frozen=True)
class IncrementSampler:
    """Monotone cubic (PCHIP) CDF through trapezoidal cumulative sums."""

    source: DensityTable
    x: np.ndarray
    cdf: np.ndarray
    order: int = 3

    def cdf_at(self, x) -> np.ndarray:
        return np.clip(interpolate.PchipInterpolator(self.x, self.cdf, extrapolate=False)(x), 0.0, 1.0)

    def inverse(self, p, tol: float = 1e-12) -> np.ndarray:
        """Quantile function by bracketed bisection to ``tol`` in probability."""
        p = np.asarray(p, dtype=float)
        flat = p.ravel()
        F = interpolate.PchipInterpolator(self.x, self.cdf, extrapolate=False)
        k = np.clip(np.searchsorted(self.cdf, flat, side="left"), 1, len(self.x) - 1)
        lo, hi = self.x[k - 1].copy(), self.x[k].copy()
        mid = 0.5 * (lo + hi)
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            Fm = F(mid)
            done = np.abs(Fm - flat) <= tol
            if np.all(done | (hi - lo <= 4 * np.finfo(float).eps * np.maximum(1.0, np.abs(mid)))):
                break
            below = Fm < flat
            lo = np.where(below & ~done, mid, lo)
            hi = np.where(~below & ~done, mid, hi)
        return mid.reshape(p.shape) if p.ndim else float(mid[0])

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return self.inverse(rng.random(size))


@dataclass(frozen=True)
class PlanarSampler:
    """Cell sampler for two-dimensional tables: cell by mass, uniform within."""

    source: DensityTable
    probs: np.ndarray

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        g = self.source.grid
        idx = rng.choice(self.probs.size, size=size, p=self.probs.ravel())
        i, j = np.unravel_index(idx, self.probs.shape)
        ax = g.axis()
        jitter = (rng.random((size, 2)) - 0.5) * g.dx
        return np.stack([ax[i], ax[j]], axis=1) + jitter


def _check_mass(table: DensityTable):
    if abs(table.total_mass - 1.0) > MASS_TOL:
        raise NonNormalizedTableError(f"table mass {table.total_mass:.10g} differs from 1 by more than {MASS_TOL:g}")


def build_sampler(table: DensityTable):
    """Inverse-CDF sampler for a normalized table."""
    _check_mass(table)
    if table.grid.dimension == 2:
        probs = table.values.ravel() / table.values.sum()
        return PlanarSampler(table, probs.reshape(table.values.shape))
    x = table.x
    v = table.values
    # close the period: the value at +L equals the value at -L
    x = np.append(x, table.grid.half_width)
    v = np.append(v, v[0])
    c = np.concatenate([[0.0], np.cumsum(0.5 * (v[1:] + v[:-1]) * np.diff(x))])
    c /= c[-1]
    c = np.maximum.accumulate(c)
    return IncrementSampler(table, x, c)


# ---------------------------------------------------------------------------
# increment tables


def _refine_width(table: DensityTable, q: float = 1e-9) -> float:
    """Half width that keeps all but ~q of the mass, from the table's own CDF."""
    g = table.grid
    marginal = table.values if g.dimension == 1 else \
        np.maximum(table.values.sum(axis=1), table.values.sum(axis=0)) * g.dx
    c = np.cumsum(marginal) * g.dx
    x = table.x
    lo = x[np.searchsorted(c, q)]
    hi = x[min(np.searchsorted(c, 1.0 - q), len(x) - 1)]
    return 1.25 * max(abs(lo), abs(hi), 4 * g.dx)


def _fft_table(family: SymbolFamily, num_points: int, maker) -> DensityTable:
    coarse = maker(GridSpec(family.dimension, num_points))
    L = _refine_width(coarse)
    if L < coarse.grid.half_width:
        return maker(GridSpec(family.dimension, num_points, L))
    return coarse


def increment_table_Y(family: SymbolFamily, s: float, t: float, num_points: int | None = None) -> DensityTable:
    n = num_points or (SAMPLER_POINTS if family.dimension == 1 else 512)
    return _fft_table(family, n, lambda g: dens.density_grid(family, s, t, g))


def _phi_table(family: SymbolFamily, t: float, num_points: int) -> DensityTable:
    """Phi_t tabulated directly: it is e^{-Q(1/t, x)} up to normalization."""
    n = family.dimension
    X = dens.exponent_cutoff(lambda x: eval_Q(family, 0.0, 1.0 / t, x), n, math.log(1e16))
    grid = GridSpec(n, num_points, X)
    vals = np.asarray(dens.adjoint_density(family, t, grid.points()))
    return DensityTable(grid=grid, values=vals, t=t, s=0.0, family_id=family.family_id,
                        meta={"process": "X", "method": "direct"})


def increment_table_X(family: SymbolFamily, s: float, t: float, num_points: int | None = None,
                      mode: str = "auto") -> DensityTable:
    """Density of X_t - X_s.

    From s = 0 the law is Phi_t, tabulated in closed form. For s > 0 the
    table is the inverse transform of sigma_t / sigma_s; a multiplier that
    does not decay (an atom in gamma_{t,s}) or that has negative lobes is
    refused.
    """
    n = num_points or (2 ** 16 if family.dimension == 1 else 512)
    if s == 0.0:
        return _phi_table(family, t, n)
    try:
        return _fft_table(family, n, lambda g: dens.gamma_grid(family, s, t, g, mode=mode))
    except InsufficientDecayError as exc:
        raise AssumptionViolationError(
            f"gamma_{{{t:g},{s:g}}} has no density to tabulate: sigma_{t:g}/sigma_{s:g} does not decay ({exc})"
        ) from exc


# ---------------------------------------------------------------------------
# paths


@dataclass(frozen=True)
class ProcessPath:
    times: np.ndarray
    positions: np.ndarray
    tag: str
    seed: Optional[int]
    path_id: int = 0


@dataclass
class PathBundle:
    """N skeleton paths on a shared time grid; indexing yields ProcessPath."""

    times: np.ndarray
    positions: np.ndarray  # (N, K) or (N, K, n)
    tag: str
    seed: Optional[int]
    family_config: dict = field(default_factory=dict)
    family: Optional[SymbolFamily] = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("times must be strictly increasing")
        if self.tag not in ("Y", "X"):
            raise ValueError("tag must be 'Y' or 'X'")

    def __len__(self) -> int:
        return self.positions.shape[0]

    def __getitem__(self, k: int) -> ProcessPath:
        return ProcessPath(self.times, self.positions[k], self.tag, self.seed, k)

    def __iter__(self) -> Iterator[ProcessPath]:
        return (self[k] for k in range(len(self)))

    def at(self, t: float) -> np.ndarray:
        k = np.flatnonzero(np.isclose(self.times, t, rtol=0, atol=1e-12))
        if k.size == 0:
            raise ValueError(f"t={t} is not on the time grid")
        return self.positions[:, int(k[0])]

    def increments(self) -> np.ndarray:
        return np.diff(self.positions, axis=1)


def interval_rng(seed: int, interval: int, chunk: int) -> np.random.Generator:
    """Counter-based stream keyed by (seed, interval, path chunk)."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), interval, chunk])))


def max_workers() -> int:
    """Worker cap from ADDKIT_THREADS (default 1)."""
    try:
        return max(1, int(os.environ.get("ADDKIT_THREADS", "1")))
    except ValueError as exc:
        raise ConfigError("ADDKIT_THREADS must be a positive integer") from exc


def simulate_paths(family: SymbolFamily, time_grid: Sequence[float], N: int, seed: int,
                   tag: str = "Y", num_points: int | None = None, check_assumption: bool = True,
                   workers: int | None = None) -> PathBundle:
    """Sample N skeleton paths started at the origin.

    Increments over consecutive grid times are independent. Chunks of
    CHUNK paths draw from their own keyed stream, so the output does not
    depend on how chunks are scheduled.
    """
    times = np.asarray(time_grid, dtype=float)
    if times.ndim != 1 or times.size < 2 or times[0] != 0.0:
        raise ReversedTimeError("time grid must start at 0 and have at least two points")
    if np.any(np.diff(times) <= 0):
        raise ReversedTimeError("time grid must be strictly increasing")
    if tag not in ("Y", "X"):
        raise ConfigError("process tag must be Y or X")
    if N <= 0:
        raise ConfigError("path count must be positive")
    if tag == "X" and check_assumption:
        from .ndcheck import NdConfig, validate_basic_assumption_I

        cfg = NdConfig(num_point_sets=1, set_size=16, num_weight_vectors=8)
        bad = [r for r in validate_basic_assumption_I(family, times[1:], cfg) if not r.passed]
        if bad:
            raise AssumptionViolationError(f"A(t, .) fails the definiteness sweep: {bad[0].summary}")

    nworkers = workers or max_workers()
    n = family.dimension
    shape = (N, times.size) if n == 1 else (N, times.size, n)
    pos = np.zeros(shape)
    for k, (s, t) in enumerate(zip(times[:-1], times[1:])):
        table = increment_table_Y(family, s, t, num_points) if tag == "Y" else \
            increment_table_X(family, s, t, num_points)
        sampler = build_sampler(table)
        draw = lambda c, k=k, sampler=sampler: sampler.sample(interval_rng(seed, k, c), min(CHUNK, N - c * CHUNK))
        chunks = range(-(-N // CHUNK))
        if nworkers > 1 and len(chunks) > 1:
            with ThreadPoolExecutor(nworkers) as pool:
                incs = list(pool.map(draw, chunks))
        else:
            incs = [draw(c) for c in chunks]
        pos[:, k + 1] = pos[:, k] + np.concatenate(incs)
    return PathBundle(times, pos, tag, seed, dict(family.config), family)


# ---------------------------------------------------------------------------
# empirical characteristic function


def empirical_cf_check(paths: PathBundle, t: float, xi_probes: Sequence, tol_sigmas: float = 4.0,
                       family: SymbolFamily | None = None) -> CheckList:
    """Compare mean cos(xi . Z_t) with e^{-Q(t, xi)} (Y) or sigma_t(xi) (X).

    Each probe passes iff the deviation is within tol_sigmas standard errors
    sqrt((1 - m^2) / N), m being the target value.
    """
    family = family or paths.family
    if family is None:
        if not paths.family_config:
            raise ConfigError("paths carry no family configuration; pass the family explicitly")
        family = family_from_config(paths.family_config)
    Z = paths.at(t)
    N = len(paths)
    out = CheckList(f"empirical_cf[{paths.tag}, t={t:g}]", meta={"N": N, "tol_sigmas": tol_sigmas})
    for xi in xi_probes:
        xi_arr = np.asarray(xi, dtype=float)
        phase = Z * xi_arr if family.dimension == 1 else Z @ xi_arr
        emp = float(np.mean(np.cos(phase)))
        if paths.tag == "Y":
            target = float(np.exp(-eval_Q(family, 0.0, t, xi_arr)))
        else:
            target = float(np.exp(dens.log_sigma(family, t, xi_arr)))
        se = math.sqrt(max(1.0 - target ** 2, 0.0) / N)
        label = f"cf[xi={np.array2string(xi_arr, separator=',')}]"
        if se == 0.0:
            out.add(Check(label, abs(emp - target), 0.0, emp == target, f"empirical={emp:.17g} target={target:.17g}"))
        else:
            z = abs(emp - target) / se
            out.add(Check(label, z, tol_sigmas, bool(z <= tol_sigmas),
                          f"empirical={emp:.17g} target={target:.17g} se={se:.3g}"))
    return out


# ---------------------------------------------------------------------------
# CSV


def write_paths_csv(paths: PathBundle, path: str) -> int:
    """CSV with columns path_id, time, position (position_1, position_2 in 2D).

    A sidecar ``<path>.meta.json`` records tag, seed and family configuration.
    """
    N, K = paths.positions.shape[:2]
    planar = paths.positions.ndim == 3
    header = "path_id,time," + ("position_1,position_2" if planar else "position")
    ids = np.repeat(np.arange(N), K)
    ts = np.tile(paths.times, N)
    if planar:
        P = paths.positions.reshape(N * K, 2)
        rows = (f"{i},{t!r},{a!r},{b!r}" for i, t, a, b in zip(ids, ts.tolist(), P[:, 0].tolist(), P[:, 1].tolist()))
    else:
        rows = (f"{i},{t!r},{x!r}" for i, t, x in zip(ids, ts.tolist(), paths.positions.ravel().tolist()))
    text = header + "\n" + "\n".join(rows) + "\n"
    meta = {"tag": paths.tag, "seed": paths.seed, "times": paths.times.tolist(), "family": paths.family_config}
    write_atomic(path + ".meta.json", json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return write_atomic(path, text)


def read_paths_csv(path: str) -> PathBundle:
    meta_path = path + ".meta.json"
    meta = {}
    if os.path.exists(meta_path):
        with open(meta_path, encoding="utf-8") as fh:
            meta = json.load(fh)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        data = np.array([[float(v) for v in row] for row in reader])
    if data.size == 0:
        raise ConfigError(f"{path}: no rows")
    ids = data[:, 0].astype(int)
    times = np.unique(data[:, 1])
    N, K = ids.max() + 1, times.size
    order = np.lexsort((data[:, 1], ids))
    cols = data[order, 2:]
    pos = cols.reshape(N, K) if len(header) == 3 else cols.reshape(N, K, len(header) - 2)
    return PathBundle(times, pos, meta.get("tag", "Y"), meta.get("seed"), meta.get("family", {}))
