"""First- and second-order optimality on St(n, p).

The Lagrange multiplier matrix is ``Sigma(U) = (grad^T U + U^T grad) / 2``.
The embedded gradient ``grad - U Sigma`` restricts to the Riemannian gradient,
and the Riemannian Hessian is the ambient Hessian of G minus the bilinear form
``(Sigma (x) I_n)(V1, V2) = tr(V1^T V2 Sigma)`` restricted to tangent pairs.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import BaseMismatch, NotCritical
from .frame import LocalFrame, build_frame
from .stiefel import StiefelPoint, TangentVector, tangent_components

DEFAULT_TOL_CRIT = 1e-8
DEFAULT_TOL_EIG = 1e-8


class Kind(str, enum.Enum):
    LOCAL_MINIMUM = "LocalMinimum"
    LOCAL_MAXIMUM = "LocalMaximum"
    SADDLE = "Saddle"
    DEGENERATE = "Degenerate"


@dataclass(frozen=True)
class CriticalityReport:
    sym_residual: float
    range_residual: float
    embedded_grad_norm: float
    tol: float
    is_critical: bool

    def to_dict(self):
        return {
            "sym_residual": self.sym_residual,
            "range_residual": self.range_residual,
            "embedded_grad_norm": self.embedded_grad_norm,
            "tol": self.tol,
            "is_critical": self.is_critical,
        }


@dataclass(frozen=True, eq=False)
class FrameHessian:
    H: np.ndarray
    gram: np.ndarray
    labels: tuple


@dataclass(frozen=True, eq=False)
class Classification:
    eigenvalues: np.ndarray
    kind: Kind
    zero_threshold: float

    def to_dict(self):
        return {
            "kind": self.kind.value,
            "eigenvalues": [float(x) for x in self.eigenvalues],
            "zero_threshold": self.zero_threshold,
        }


def criticality_constant(n: int, p: int) -> float:
    """Bound kappa with ||dG||_F <= kappa * max(sym_residual, range_residual).

    From ||dG||_F^2 = ||Z grad||_F^2 + ||U^T grad - grad^T U||_F^2 / 4.
    """
    return float(np.sqrt(n * p + p * p / 4.0))


def sigma_matrix(m, P: StiefelPoint) -> np.ndarray:
    U = P.U
    X = m.gradient(U).T @ U
    return 0.5 * (X + X.T)


def lagrange_multipliers(m, P: StiefelPoint) -> np.ndarray:
    """Sigma assembled entry by entry from the column-wise multiplier functions."""
    U = P.U
    g = m.gradient(U)
    p = P.p
    S = np.empty((p, p))
    for a in range(p):
        S[a, a] = g[:, a] @ U[:, a]
        for b in range(a + 1, p):
            S[a, b] = S[b, a] = 0.5 * (g[:, b] @ U[:, a] + g[:, a] @ U[:, b])
    return S


def embedded_gradient(m, P: StiefelPoint) -> TangentVector:
    U = P.U
    g = m.gradient(U)
    X = g.T @ U
    return TangentVector(P, g - U @ (0.5 * (X + X.T)), tol=None)


def is_critical(m, P: StiefelPoint, tol: float = DEFAULT_TOL_CRIT) -> CriticalityReport:
    """Test U^T grad = grad^T U and grad = U U^T grad (max-entry residuals)."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    U = P.U
    g = m.gradient(U)
    UtG = U.T @ g
    sym_res = float(np.max(np.abs(UtG - UtG.T)))
    range_res = float(np.max(np.abs(g - U @ UtG)))
    dG = g - U @ (0.5 * (UtG + UtG.T))
    return CriticalityReport(
        sym_residual=sym_res,
        range_residual=range_res,
        embedded_grad_norm=float(np.linalg.norm(dG)),
        tol=tol,
        is_critical=max(sym_res, range_res) <= tol,
    )


def _raw_gradient_coords(g, P: StiefelPoint, F: LocalFrame):
    U = P.U
    Z = P.normal_projector()
    coords = np.empty(F.dim)
    for k, (kind, i, j) in enumerate(F.labels):
        if kind == "prime":
            a, b = i, j
            s = -1.0 if (a + b) % 2 else 1.0
            coords[k] = s * (g[:, b] @ U[:, a] - g[:, a] @ U[:, b])
        else:
            coords[k] = g[:, j] @ Z[:, i]
    return coords


def frame_gradient_coords(m, P: StiefelPoint, F: LocalFrame) -> np.ndarray:
    """Coordinates <grad G, D_k> for every frame vector D_k, in frame order."""
    raw = _raw_gradient_coords(m.gradient(P.U), P, F)
    return raw if F.is_raw else F.transform @ raw


def sigma_kron_bilinear(Sigma, Z, V1: TangentVector, V2: TangentVector) -> float:
    """(Sigma (x) I_n)(V1, V2) = -tr(A1 A2 Sigma) + tr(C1^T Z C2 Sigma)."""
    if V1.base is not V2.base and not np.array_equal(V1.base.U, V2.base.U):
        raise BaseMismatch("tangent vectors are attached to different base points")
    A1, C1 = tangent_components(V1, tol=np.inf)
    A2, C2 = tangent_components(V2, tol=np.inf)
    return float(-np.trace(A1 @ A2 @ Sigma) + np.trace(C1.T @ Z @ C2 @ Sigma))


def _delta(x, y):
    return 1.0 if x == y else 0.0


def sigma_kron_closed_form(Sigma, Z, label1, label2) -> float:
    """Closed form of (Sigma (x) I_n) on a pair of raw frame vectors."""
    k1, x1, y1 = label1
    k2, x2, y2 = label2
    if k1 != k2:
        return 0.0
    if k1 == "second":
        return float(Z[x1, x2] * Sigma[y1, y2])
    a1, b1, a2, b2 = x1, y1, x2, y2
    eps = -1.0 if (a1 + b1 + a2 + b2) % 2 else 1.0
    return eps * (
        _delta(a1, a2) * Sigma[b1, b2]
        + _delta(b1, b2) * Sigma[a1, a2]
        - _delta(a2, b1) * Sigma[a1, b2]
        - _delta(a1, b2) * Sigma[a2, b1]
    )


def constraint_hessian_closed_form(constraint, label1, label2, Z) -> float:
    """Hessian of F_aa (``constraint=(a, a)``) or F_bc (``(b, c)``, b < c) on
    two raw frame vectors, from the explicit Kronecker-delta tables."""
    b, c = constraint
    k1, x1, y1 = label1
    k2, x2, y2 = label2
    if k1 != k2:
        return 0.0
    if k1 == "second":
        j1, d1, j2, d2 = x1, y1, x2, y2
        if b == c:
            return _delta(b, d1) * _delta(b, d2) * Z[j1, j2]
        return (_delta(b, d1) * _delta(c, d2) + _delta(b, d2) * _delta(c, d1)) * Z[j1, j2]
    a1, b1, a2, b2 = x1, y1, x2, y2
    eps = -1.0 if (a1 + b1 + a2 + b2) % 2 else 1.0
    if b == c:
        a = b
        return eps * (
            _delta(a, a1) * _delta(a, a2) * _delta(b1, b2) + _delta(a, b1) * _delta(a, b2) * _delta(a1, a2)
        )
    d = _delta
    return eps * (
        d(a1, b) * d(c, a2) * d(b1, b2)
        - d(a1, b) * d(c, b2) * d(b1, a2)
        + d(a1, c) * d(b, a2) * d(b1, b2)
        + d(b1, b) * d(c, b2) * d(a1, a2)
        - d(b1, c) * d(b, a2) * d(a1, b2)
        + d(b1, c) * d(b, b2) * d(a1, a2)
    )


def hessian_form_on_pair(m, P: StiefelPoint, Sigma, V1: TangentVector, V2: TangentVector) -> float:
    """Riemannian Hessian form Hess G(V1, V2) - (Sigma (x) I_n)(V1, V2)."""
    for V in (V1, V2):
        if V.base is not P and not np.array_equal(V.base.U, P.U):
            raise BaseMismatch("tangent vector is not attached to P")
    Z = P.normal_projector()
    return m.hess_bilinear(P.U, V1.delta, V2.delta) - sigma_kron_bilinear(Sigma, Z, V1, V2)


def _ambient_hessian_block(m, P: StiefelPoint, vectors) -> np.ndarray:
    d = len(vectors)
    flat = vectors.reshape(d, -1)
    probe = m.hess_apply(P.U, vectors[0]) if d else None
    if probe is not None:
        HV = np.array([m.hess_apply(P.U, V) for V in vectors]).reshape(d, -1)
        Hg = flat @ HV.T
    else:
        Hg = np.empty((d, d))
        for i in range(d):
            for j in range(i, d):
                Hg[i, j] = Hg[j, i] = m.hess_bilinear(P.U, vectors[i], vectors[j])
    return 0.5 * (Hg + Hg.T)


def _raw_sigma_block(Sigma, Z, F: LocalFrame) -> np.ndarray:
    npr = F.n_prime
    d = F.dim
    S = np.zeros((d, d))
    for i in range(npr):
        for j in range(i, npr):
            S[i, j] = S[j, i] = sigma_kron_closed_form(Sigma, Z, F.labels[i], F.labels[j])
    rows = list(F.pivots.complement(F.base.n))
    # second family is ordered (c outer, i inner), hence a Kronecker block
    S[npr:, npr:] = np.kron(Sigma, Z[np.ix_(rows, rows)])
    return S


def assemble_frame_hessian(m, P: StiefelPoint, F: LocalFrame | None = None) -> FrameHessian:
    if F is None:
        F = build_frame(P)
    Sigma = sigma_matrix(m, P)
    Z = P.normal_projector()
    raw = build_frame(P, F.pivots) if not F.is_raw else F
    Hraw = _ambient_hessian_block(m, P, raw.vectors) - _raw_sigma_block(Sigma, Z, raw)
    if F.is_raw:
        H, gram = Hraw, F.gram()
    else:
        T = F.transform
        H = T @ Hraw @ T.T
        gram = F.gram()
    H = 0.5 * (H + H.T)
    return FrameHessian(H=H, gram=0.5 * (gram + gram.T), labels=F.labels)


def classify_hessian(FH: FrameHessian, tol_eig: float = DEFAULT_TOL_EIG) -> Classification:
    if FH.H.size == 0:
        return Classification(np.zeros(0), Kind.DEGENERATE, tol_eig)
    evals = scipy.linalg.eigh(FH.H, FH.gram, eigvals_only=True)
    thr = tol_eig * max(1.0, float(np.linalg.norm(FH.H, 2)))
    if np.all(evals > thr):
        kind = Kind.LOCAL_MINIMUM
    elif np.all(evals < -thr):
        kind = Kind.LOCAL_MAXIMUM
    elif np.any(evals > thr) and np.any(evals < -thr):
        kind = Kind.SADDLE
    else:
        kind = Kind.DEGENERATE
    return Classification(np.sort(evals), kind, thr)


def classify_critical_point(
    m, P: StiefelPoint, tol_crit: float = DEFAULT_TOL_CRIT, tol_eig: float = DEFAULT_TOL_EIG
) -> Classification:
    """Min/max/saddle verdict from the generalized eigenvalues of (H, gram).

    Raises :class:`NotCritical` when P fails :func:`is_critical` at ``tol_crit``.
    """
    rep = is_critical(m, P, tol_crit)
    if not rep.is_critical:
        raise NotCritical(
            f"point is not critical at tol={tol_crit:.1e} "
            f"(residuals {rep.sym_residual:.3e}, {rep.range_residual:.3e})"
        )
    return classify_hessian(assemble_frame_hessian(m, P), tol_eig)
