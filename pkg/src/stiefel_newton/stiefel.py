"""Points, tangent vectors and the QR retraction on St(n, p) = {U : U^T U = I_p}."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    BaseMismatch,
    ConstraintViolation,
    DimensionError,
    RankDeficient,
    TangencyViolation,
)

DEFAULT_TOL = 1e-10
RETRACTION_PIVOT_TOL = 1e-14


def _frozen(a):
    a = np.array(a, dtype=float, copy=True)
    a.setflags(write=False)
    return a


def skew(M):
    return 0.5 * (M - M.T)


def sym(M):
    return 0.5 * (M + M.T)


@dataclass(frozen=True, eq=False)
class StiefelPoint:
    """An n-by-p matrix with orthonormal columns.

    Build instances through :func:`make_stiefel_point`, :func:`random_stiefel`
    or :func:`retract_qf`; the constructor itself only freezes the array.
    """

    U: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "U", _frozen(self.U))

    @property
    def n(self) -> int:
        return self.U.shape[0]

    @property
    def p(self) -> int:
        return self.U.shape[1]

    @property
    def shape(self):
        return self.U.shape

    def column(self, a: int) -> np.ndarray:
        """Column ``u_a`` (0-based)."""
        return self.U[:, a]

    def normal_projector(self) -> np.ndarray:
        """Z = I_n - U U^T."""
        return np.eye(self.n) - self.U @ self.U.T

    def feasibility(self) -> float:
        return float(np.max(np.abs(self.U.T @ self.U - np.eye(self.p))))


@dataclass(frozen=True, eq=False)
class TangentVector:
    """Ambient representation of a tangent direction at ``base``."""

    base: StiefelPoint
    delta: np.ndarray
    tol: float = field(default=DEFAULT_TOL, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "delta", _frozen(self.delta))
        if self.delta.shape != self.base.shape:
            raise DimensionError(
                f"tangent vector has shape {self.delta.shape}, base point has {self.base.shape}"
            )
        if self.tol is not None:
            dev = tangency_deviation(self.base, self.delta)
            if dev > self.tol:
                raise TangencyViolation(f"U^T D + D^T U has max entry {dev:.3e} > {self.tol:.1e}")

    def __add__(self, other: TangentVector) -> TangentVector:
        _same_base(self, other)
        return TangentVector(self.base, self.delta + other.delta, tol=None)

    def __mul__(self, t: float) -> TangentVector:
        return TangentVector(self.base, t * self.delta, tol=None)

    __rmul__ = __mul__

    def __neg__(self) -> TangentVector:
        return TangentVector(self.base, -self.delta, tol=None)

    def inner(self, other: TangentVector) -> float:
        """Frobenius inner product tr(D1^T D2)."""
        _same_base(self, other)
        return float(np.sum(self.delta * other.delta))

    def norm(self) -> float:
        return float(np.linalg.norm(self.delta))


def _same_base(v1, v2):
    if v1.base is not v2.base and not np.array_equal(v1.base.U, v2.base.U):
        raise BaseMismatch("tangent vectors are attached to different base points")


@dataclass(frozen=True)
class ConstraintVector:
    """Values of F_aa = |u_a|^2 / 2 and F_bc = <u_b, u_c> (b < c, lexicographic)."""

    diag: np.ndarray
    offdiag: np.ndarray
    offdiag_index: tuple

    def max_deviation(self) -> float:
        d = np.max(np.abs(self.diag - 0.5)) if self.diag.size else 0.0
        o = np.max(np.abs(self.offdiag)) if self.offdiag.size else 0.0
        return float(max(d, o))


def tangency_deviation(P: StiefelPoint, D) -> float:
    S = P.U.T @ np.asarray(D)
    return float(np.max(np.abs(S + S.T)))


def make_stiefel_point(M, tol: float = DEFAULT_TOL) -> StiefelPoint:
    """Validate ``M`` as a point of St(n, p).

    The input is copied as-is; it is never re-orthonormalized.

    Raises
    ------
    DimensionError
        If ``M`` is not a 2-D array with 1 <= p <= n.
    ConstraintViolation
        If ``max|M^T M - I_p| > tol``; the deviation is attached to the error.
    """
    M = np.asarray(M, dtype=float)
    if M.ndim == 1:
        M = M.reshape(-1, 1)
    if M.ndim != 2:
        raise DimensionError(f"expected a matrix, got an array with {M.ndim} dimensions")
    n, p = M.shape
    if p < 1 or n < p:
        raise DimensionError(f"need n >= p >= 1, got n={n}, p={p}")
    if not np.all(np.isfinite(M)):
        raise ConstraintViolation("matrix contains non-finite entries", deviation=float("inf"))
    dev = float(np.max(np.abs(M.T @ M - np.eye(p))))
    if dev > tol:
        raise ConstraintViolation(
            f"U^T U deviates from I_{p} by {dev:.3e} (tolerance {tol:.1e})", deviation=dev
        )
    return StiefelPoint(M)


def _check_dims(n, p):
    if not (isinstance(n, (int, np.integer)) and isinstance(p, (int, np.integer))):
        raise DimensionError("n and p must be integers")
    if p < 1 or n < p:
        raise DimensionError(f"need n >= p >= 1, got n={n}, p={p}")


def _qr_positive(M):
    Q, R = np.linalg.qr(M)
    d = np.diag(R)
    signs = np.where(d < 0, -1.0, 1.0)
    return Q * signs, R * signs[:, None]


def random_stiefel(n: int, p: int, seed: int = 0) -> StiefelPoint:
    """Orthonormal factor of a seeded Gaussian n-by-p matrix."""
    _check_dims(n, p)
    rng = np.random.default_rng(seed)
    Q, _ = _qr_positive(rng.standard_normal((n, p)))
    return make_stiefel_point(Q, tol=1e-12)


def constraint_values(P) -> ConstraintVector:
    U = P.U if isinstance(P, StiefelPoint) else np.asarray(P, dtype=float)
    if U.ndim != 2:
        raise DimensionError("constraint_values expects an n-by-p matrix")
    p = U.shape[1]
    G = U.T @ U
    iu = np.triu_indices(p, k=1)
    return ConstraintVector(
        diag=0.5 * np.diag(G).copy(),
        offdiag=G[iu].copy(),
        offdiag_index=tuple(zip(iu[0].tolist(), iu[1].tolist())),
    )


def tangent_components(V: TangentVector, tol: float = DEFAULT_TOL):
    """Split a tangent vector as D = U A + C_perp.

    Returns ``(A, C_perp)`` with A = U^T D skew-symmetric and
    C_perp = (I - U U^T) D.
    """
    dev = tangency_deviation(V.base, V.delta)
    if dev > tol:
        raise TangencyViolation(f"U^T D is not skew-symmetric (deviation {dev:.3e})")
    U = V.base.U
    A = U.T @ V.delta
    C = V.delta - U @ A
    return A, C


def project_tangent(P: StiefelPoint, W) -> TangentVector:
    """Orthogonal (Frobenius) projection of an ambient matrix onto T_U St(n, p)."""
    W = np.asarray(W, dtype=float)
    if W.shape != P.shape:
        raise DimensionError(f"W has shape {W.shape}, expected {P.shape}")
    U = P.U
    UtW = U.T @ W
    D = U @ skew(UtW) + (W - U @ UtW)
    return TangentVector(P, D, tol=None)


def retract_qf(P: StiefelPoint, V: TangentVector) -> StiefelPoint:
    """qf retraction: Q factor of U + D = QR with diag(R) > 0."""
    if V.delta.shape != P.shape:
        raise DimensionError("tangent vector and point shapes differ")
    if not np.any(V.delta):
        return P
    Q, R = _qr_positive(P.U + V.delta)
    d = np.diag(R)
    if np.min(d) < RETRACTION_PIVOT_TOL:
        raise RankDeficient(f"U + D is numerically rank deficient (min |R_ii| = {np.min(d):.3e})")
    return StiefelPoint(Q)


def qr_positive(M):
    """Thin QR with the sign convention diag(R) >= 0; exposed for tests and diagnostics."""
    return _qr_positive(np.asarray(M, dtype=float))
