"""Embedded Newton iteration on St(n, p) and the diagonal Brockett census."""

from __future__ import annotations

import enum
import itertools
import math
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np
import scipy.linalg

from .costs import BrockettModel
from .errors import DegenerateSpectrum, DimensionError, RankDeficient, SolveFailure
from .frame import build_frame, select_pivot_rows
from .optimality import (
    Classification,
    CriticalityReport,
    assemble_frame_hessian,
    classify_critical_point,
    embedded_gradient,
    frame_gradient_coords,
    is_critical,
)
from .stiefel import StiefelPoint, TangentVector, make_stiefel_point, retract_qf

MAX_ENUMERATION = 10**6


class Status(str, enum.Enum):
    CONVERGED = "Converged"
    MAX_ITERS = "MaxIters"
    SOLVE_FAILURE = "SolveFailure"


@dataclass(frozen=True)
class NewtonOptions:
    max_iters: int = 100
    grad_tol: float = 1e-10
    regularization_start: float = 1e-10
    regularization_attempts: int = 40
    fallback: bool = True
    armijo_c: float = 1e-4
    armijo_shrink: float = 0.5
    max_backtracks: int = 30
    descent_tol: float = 1e-12
    monotone: bool = True
    seed: int = 0

    def __post_init__(self):
        for name in ("grad_tol", "regularization_start", "armijo_c", "descent_tol"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not 0 < self.armijo_shrink < 1:
            raise ValueError("armijo_shrink must lie in (0, 1)")
        if self.max_iters < 0 or self.max_backtracks < 0 or self.regularization_attempts < 0:
            raise ValueError("iteration limits must be nonnegative")

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class IterationRecord:
    k: int
    cost: float
    grad_norm: float
    step: str
    solve_residual: float = float("nan")
    backtracks: int = 0

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True, eq=False)
class OptimizationResult:
    point: StiefelPoint
    value: float
    status: Status
    trace: list
    criticality: CriticalityReport
    classification: Classification | None = None
    message: str = ""

    @property
    def iterations(self) -> int:
        return sum(1 for r in self.trace if r.step != "final")

    @property
    def grad_norms(self) -> list:
        return [r.grad_norm for r in self.trace]


@dataclass
class StepDiagnostics:
    pivots: tuple
    grad_coords: np.ndarray
    coords: np.ndarray
    solve_residual: float
    regularization: float = 0.0
    attempts: int = 0
    hessian: object = field(default=None, repr=False)


def _solve_symmetric(H, rhs):
    with warnings.catch_warnings():
        warnings.simplefilter("error", scipy.linalg.LinAlgWarning)
        x = scipy.linalg.solve(H, rhs, assume_a="sym")
    if not np.all(np.isfinite(x)):
        raise np.linalg.LinAlgError("non-finite solution")
    return x


def newton_step(m, P: StiefelPoint, opts: NewtonOptions | None = None):
    """Newton direction in the raw local frame at P.

    Solves ``H v = -g`` with H the frame Hessian and g the frame gradient
    coordinates (symmetric indefinite factorization). If the factorization
    breaks down, retries with ``H + mu * gram``, mu doubling from
    ``regularization_start * ||H||``.

    Returns ``(TangentVector, StepDiagnostics)``.
    """
    opts = opts or NewtonOptions()
    pivots = select_pivot_rows(P)
    F = build_frame(P, pivots)
    g = frame_gradient_coords(m, P, F)
    FH = assemble_frame_hessian(m, P, F)
    H = FH.H
    if F.dim == 0 or not np.any(g):
        zero = TangentVector(P, np.zeros(P.shape), tol=None)
        return zero, StepDiagnostics(pivots.indices, g, np.zeros(F.dim), 0.0, hessian=FH)
    gnorm = float(np.linalg.norm(g))
    mu, attempts = 0.0, 0
    scale = max(float(np.linalg.norm(H, 2)), np.finfo(float).tiny)
    while True:
        try:
            coords = _solve_symmetric(H + mu * FH.gram, -g)
            break
        except (np.linalg.LinAlgError, scipy.linalg.LinAlgWarning, ValueError):
            attempts += 1
            if attempts > opts.regularization_attempts:
                raise SolveFailure(f"Newton system unsolvable after {opts.regularization_attempts} regularizations")
            mu = opts.regularization_start * scale if mu == 0.0 else 2.0 * mu
    residual = float(np.linalg.norm(H @ coords + g) / gnorm)
    V = TangentVector(P, F.combine(coords), tol=None)
    return V, StepDiagnostics(pivots.indices, g, coords, residual, mu, attempts, FH)


def _no_increase(m, Q, cost):
    # slack of a few ulps keeps the final quadratically convergent steps
    return m.value(Q.U) <= cost + 16 * np.finfo(float).eps * max(1.0, abs(cost))


def _armijo(m, P, dG, gnorm, opts):
    f0 = m.value(P.U)
    t = 1.0
    for bt in range(opts.max_backtracks + 1):
        try:
            Q = retract_qf(P, TangentVector(P, -t * dG, tol=None))
        except RankDeficient:
            Q = None
        if Q is not None:
            f1 = m.value(Q.U)
            if f1 <= f0 - opts.armijo_c * t * gnorm**2 and f1 < f0:
                return Q, bt
        t *= opts.armijo_shrink
    return None, opts.max_backtracks


def newton_solve(m, P0: StiefelPoint, opts: NewtonOptions | None = None, classify: bool = False):
    """Iterate Newton steps followed by the qf retraction.

    With ``opts.fallback`` on, a Newton direction that is not a descent
    direction (or a failed solve) is replaced by a steepest-descent step with
    Armijo backtracking on G(qf(U + tV)). With ``opts.monotone`` also on, a
    full Newton step that raises G beyond roundoff is replaced the same way.
    With the fallback off the iteration is the plain Newton method and may
    converge to any critical point.
    """
    opts = opts or NewtonOptions()
    P = P0
    trace = []
    status, message = Status.MAX_ITERS, ""
    for k in range(opts.max_iters + 1):
        dG = embedded_gradient(m, P).delta
        gnorm = float(np.linalg.norm(dG))
        cost = m.value(P.U)
        if gnorm <= opts.grad_tol:
            status = Status.CONVERGED
            trace.append(IterationRecord(k, cost, gnorm, "final"))
            break
        if k == opts.max_iters:
            trace.append(IterationRecord(k, cost, gnorm, "final"))
            message = f"gradient norm {gnorm:.3e} after {k} iterations"
            break
        V, diag = None, None
        try:
            V, diag = newton_step(m, P, opts)
        except SolveFailure as exc:
            if not opts.fallback:
                status, message = Status.SOLVE_FAILURE, str(exc)
                trace.append(IterationRecord(k, cost, gnorm, "final"))
                break
        descent = False
        if V is not None:
            slope = float(np.sum(dG * V.delta))
            descent = slope < -opts.descent_tol * gnorm * V.norm()
        if V is not None and (descent or not opts.fallback):
            try:
                Q = retract_qf(P, V)
            except RankDeficient as exc:
                Q = None
                if not opts.fallback:
                    status, message = Status.SOLVE_FAILURE, str(exc)
                    trace.append(IterationRecord(k, cost, gnorm, "final"))
                    break
            if Q is not None and (not opts.fallback or not opts.monotone or _no_increase(m, Q, cost)):
                P = Q
                trace.append(IterationRecord(k, cost, gnorm, "newton", diag.solve_residual, 0))
                continue
        Q, bt = _armijo(m, P, dG, gnorm, opts)
        if Q is None:
            status, message = Status.SOLVE_FAILURE, "Armijo backtracking found no decrease"
            trace.append(IterationRecord(k, cost, gnorm, "final"))
            break
        res = diag.solve_residual if diag is not None else float("nan")
        trace.append(IterationRecord(k, cost, gnorm, "fallback-gradient", res, bt))
        P = Q
    crit = is_critical(m, P, max(opts.grad_tol, 1e-300))
    cls = None
    if classify:
        try:
            cls = classify_critical_point(m, P, tol_crit=max(10 * opts.grad_tol, 1e-8))
        except Exception:
            cls = None
    return OptimizationResult(P, m.value(P.U), status, trace, crit, cls, message)


@dataclass(frozen=True, eq=False)
class CensusEntry:
    point: StiefelPoint
    value: float
    classification: Classification
    indices: tuple
    signs: tuple


def enumerate_brockett_critical_points(model: BrockettModel, tol: float = 1e-10, tol_eig: float = 1e-8):
    """All critical points of a Brockett cost with simple spectrum of A.

    Every critical point has columns that are signed eigenvectors of A. All
    ordered selections of p distinct eigenvectors with all 2^p sign patterns
    are emitted, verified critical, valued and classified. Output is sorted by
    value, then by eigenvector indices, then by signs (+ before -).
    """
    n, p = model.shape
    evals, evecs = np.linalg.eigh(model.A)
    gaps = np.diff(evals)
    if gaps.size and np.min(gaps) <= tol:
        raise DegenerateSpectrum(
            f"A has eigenvalue gap {np.min(gaps):.3e} <= {tol:.1e}; the critical set is not finite"
        )
    count = math.perm(n, p) * 2**p
    if count > MAX_ENUMERATION:
        raise DimensionError(f"census would contain {count} points (limit {MAX_ENUMERATION})")
    # deterministic eigenvector signs: largest-magnitude entry positive
    lead = np.argmax(np.abs(evecs), axis=0)
    evecs = evecs * np.sign(evecs[lead, np.arange(n)])
    scale = max(1.0, float(np.linalg.norm(model.A, 2)) * float(np.max(np.abs(model.mu), initial=0.0)))
    crit_tol = tol * scale
    entries = []
    for sel in itertools.permutations(range(n), p):
        base = evecs[:, list(sel)]
        for signs in itertools.product((1.0, -1.0), repeat=p):
            P = make_stiefel_point(base * np.array(signs))
            rep = is_critical(model, P, crit_tol)
            if not rep.is_critical:
                raise DegenerateSpectrum(f"eigenvector selection {sel} failed the criticality test")
            cls = classify_critical_point(model, P, tol_crit=crit_tol, tol_eig=tol_eig)
            entries.append(CensusEntry(P, model.value(P.U), cls, sel, tuple(int(s) for s in signs)))
    entries.sort(key=lambda e: (e.value, e.indices, tuple(-s for s in e.signs)))
    return entries


def nearest_census_point(entries, P: StiefelPoint):
    """(index, Frobenius distance) of the census point closest to P."""
    dists = [float(np.linalg.norm(e.point.U - P.U)) for e in entries]
    i = int(np.argmin(dists))
    return i, dists[i]
