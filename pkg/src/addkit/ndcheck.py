"""
Finite-matrix falsifiers for negative and positive definiteness.

A continuous psi with psi(0) >= 0 is negative definite iff e^{-s psi} is
positive definite for every s > 0 (Schoenberg). Numerically that becomes:
the matrices [e^{-s psi(xi_i - xi_j)}] have no negative eigenvalue beyond a
rounding tolerance, and quadratic forms sum c_i conj(c_j) psi(xi_i - xi_j)
with sum c_i = 0 are never positive. Passing means "no violation found";
nothing here proves definiteness.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import EvaluationError, WeightSumError

Func = Callable[[np.ndarray], np.ndarray]

MAX_SET_SIZE = 64


@dataclass(frozen=True)
class PointSet:
    points: np.ndarray
    seed: Optional[int] = None

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        object.__setattr__(self, "points", pts)
        m = pts.shape[0]
        if m > MAX_SET_SIZE:
            raise ValueError(f"point sets are capped at {MAX_SET_SIZE} points")
        flat = pts.reshape(m, -1)
        if len(np.unique(flat, axis=0)) != m:
            raise ValueError("points must be pairwise distinct")

    def __len__(self):
        return self.points.shape[0]

    @property
    def dimension(self) -> int:
        return 1 if self.points.ndim == 1 else self.points.shape[1]

    def differences(self) -> np.ndarray:
        p = self.points
        if p.ndim == 1:
            return p[:, None] - p[None, :]
        return p[:, None, :] - p[None, :, :]

    def has_origin(self) -> bool:
        return bool(np.any(np.all(self.points.reshape(len(self), -1) == 0.0, axis=1)))


def random_point_set(m: int, radius: float, dimension: int = 1, seed: int = 0,
                     with_origin: bool = True) -> PointSet:
    rng = np.random.default_rng(seed)
    shape = (m,) if dimension == 1 else (m, dimension)
    pts = rng.uniform(-radius, radius, size=shape)
    if with_origin:
        pts[0] = 0.0
    return PointSet(pts, seed)


def lattice_point_set(m: int, spacing: float = 1.0, dimension: int = 1) -> PointSet:
    """m consecutive lattice points starting at the origin (diagonal in 2D)."""
    ax = spacing * np.arange(m, dtype=float)
    pts = ax if dimension == 1 else np.stack([ax] * dimension, axis=1)
    return PointSet(pts)


def _matrix(f: Func, ps: PointSet) -> np.ndarray:
    M = np.asarray(f(ps.differences()), dtype=float)
    if not np.all(np.isfinite(M)):
        raise EvaluationError("non-finite function value at a point difference")
    return M


def pd_min_eigenvalue(f: Func, ps: PointSet) -> float:
    """Smallest eigenvalue of [f(xi_i - xi_j)]; f must be symmetric."""
    M = _matrix(f, ps)
    return float(np.linalg.eigvalsh(0.5 * (M + M.T))[0])


def constrained_nd_form(psi: Func, ps: PointSet, c: Sequence[complex]) -> float:
    """Re sum_{i,j} c_i conj(c_j) psi(xi_i - xi_j) for weights summing to zero."""
    c = np.asarray(c, dtype=complex)
    if c.shape != (len(ps),):
        raise ValueError("one weight per point")
    if abs(c.sum()) > 1e-14 * max(1.0, float(np.abs(c).sum())):
        raise WeightSumError(f"weights must sum to zero, got {c.sum()}")
    M = _matrix(psi, ps)
    return float(np.real(c @ M @ np.conj(c)))


@dataclass
class NdConfig:
    num_point_sets: int = 4
    set_size: int = 32
    s_scales: tuple = tuple(np.logspace(-3, 3, 8))
    num_weight_vectors: int = 32
    radii: tuple = (1.0, 10.0)
    tol: Optional[float] = None  # None: 1e-9 * m * max|entry| per matrix
    seed: int = 0


@dataclass
class NdReport:
    """Outcome of a definiteness sweep; ``passed`` means no violation was found."""

    passed: bool
    min_eigenvalues: dict = field(default_factory=dict)
    worst_form: float = -np.inf
    witness: Optional[dict] = None
    tol: float = 0.0
    t: Optional[float] = None
    notes: list = field(default_factory=list)

    @property
    def summary(self) -> str:
        where = "" if self.t is None else f" at t={self.t:g}"
        return ("no violation found" if self.passed else "violation found") + where

    def as_dict(self) -> dict:
        return {
            "t": self.t,
            "passed": self.passed,
            "summary": self.summary,
            "tol": self.tol,
            "min_eigenvalues": {f"{k:.6g}": v for k, v in self.min_eigenvalues.items()},
            "worst_form": self.worst_form,
            "witness": self.witness,
            "notes": self.notes,
        }


def _point_sets(cfg: NdConfig, dimension: int) -> list[PointSet]:
    sets = [lattice_point_set(min(cfg.set_size, 16), 0.5, dimension)]
    k = 0
    for R in cfg.radii:
        for i in range(cfg.num_point_sets):
            sets.append(random_point_set(cfg.set_size, R, dimension, seed=cfg.seed * 1000 + k))
            k += 1
    return sets


def _stencil_probes(dimension: int):
    """Second-difference probes {0, a, 2a} with weights (1, -2, 1), a = 1 first."""
    for a in (1.0, 0.1, 0.5, 2.0, 10.0):
        for axis in range(dimension):
            if dimension == 1:
                pts = np.array([0.0, a, 2 * a])
            else:
                pts = np.zeros((3, dimension))
                pts[1, axis], pts[2, axis] = a, 2 * a
            yield PointSet(pts), np.array([1.0, -2.0, 1.0])


def is_negative_definite(psi: Func, cfg: NdConfig | None = None, dimension: int = 1) -> NdReport:
    """Schoenberg sweep plus direct zero-sum quadratic forms."""
    cfg = cfg or NdConfig()
    rng = np.random.default_rng(cfg.seed)
    report = NdReport(passed=True, tol=cfg.tol if cfg.tol is not None else 0.0)
    sets = _point_sets(cfg, dimension)

    origin = np.zeros(()) if dimension == 1 else np.zeros(dimension)
    psi0 = float(np.asarray(psi(origin)))
    if psi0 < -1e-12:
        report.passed = False
        report.notes.append(f"psi(0) = {psi0} < 0")

    for s in cfg.s_scales:
        worst = np.inf
        for ps in sets:
            M = _matrix(lambda d: np.exp(-s * np.asarray(psi(d))), ps)
            lam = float(np.linalg.eigvalsh(0.5 * (M + M.T))[0])
            tol = cfg.tol if cfg.tol is not None else 1e-9 * len(ps) * float(np.max(np.abs(M)))
            report.tol = max(report.tol, tol)
            worst = min(worst, lam)
            if lam < -tol:
                report.passed = False
        report.min_eigenvalues[float(s)] = worst

    def probe(ps: PointSet, c: np.ndarray):
        val = constrained_nd_form(psi, ps, c)
        M = _matrix(psi, ps)
        tol = cfg.tol if cfg.tol is not None else (
            1e-9 * len(ps) * max(float(np.max(np.abs(M))), 1e-300) * float(np.sum(np.abs(c) ** 2)))
        report.worst_form = max(report.worst_form, val)
        if val > tol:
            report.passed = False
            if report.witness is None:
                w = c.real.tolist() if not np.any(c.imag) else [[z.real, z.imag] for z in c]
                report.witness = {"points": ps.points.tolist(), "weights": w, "form_value": val}

    for ps, c in _stencil_probes(dimension):
        probe(ps, c)
    for ps in sets:
        m = len(ps)
        for _ in range(cfg.num_weight_vectors):
            c = rng.standard_normal(m) + 1j * rng.standard_normal(m)
            c -= c.mean()
            c /= np.linalg.norm(c)
            probe(ps, c)
    return report


def validate_basic_assumption_I(family, t_grid: Sequence[float], cfg: NdConfig | None = None,
                                mode: str = "auto", zero_tol: float = 1e-8) -> list[NdReport]:
    """Sweep xi -> A(t, xi) for negative definiteness at each t in ``t_grid``.

    Also checks A(t, 0) = 0 and A(t, .) >= 0 on the sampled point sets.
    """
    from .density import adjoint_exponent

    cfg = cfg or NdConfig()
    n = family.dimension
    reports = []
    for t in t_grid:
        A = lambda xi, t=t: adjoint_exponent(family, t, xi, mode)
        rep = is_negative_definite(A, cfg, n)
        rep.t = float(t)
        origin = np.zeros(()) if n == 1 else np.zeros(n)
        a0 = float(np.asarray(A(origin)))
        if abs(a0) > zero_tol:
            rep.passed = False
            rep.notes.append(f"A({t}, 0) = {a0:.3g} != 0")
        amin = min(float(np.min(A(ps.differences()))) for ps in _point_sets(cfg, n))
        if amin < -zero_tol:
            rep.passed = False
            rep.notes.append(f"A({t}, .) takes negative value {amin:.3g}")
        reports.append(rep)
    return reports
