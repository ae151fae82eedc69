"""Independent checks for the closed-form machinery.

The finite-difference oracles only call ``CostModel.value`` (plus
``CostModel.gradient`` for the gradient-difference Hessian variant). The frame
auditors recompute everything from the raw matrices with plain arithmetic and
``np.kron``, never through the formula paths they validate.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .errors import NotCritical
from .stiefel import StiefelPoint, TangentVector, qr_positive

GRADIENT_STEP = 1e-5
SECOND_DIFF_STEP = 1e-4


@dataclass(frozen=True)
class OracleReport:
    quantity: str
    formula: float
    oracle: float
    abs_error: float
    rel_error: float
    tol: float
    passed: bool

    def to_dict(self):
        return {
            "quantity": self.quantity,
            "formula": self.formula,
            "oracle": self.oracle,
            "abs_error": self.abs_error,
            "rel_error": self.rel_error,
            "tol": self.tol,
            "passed": self.passed,
        }

    def line(self):
        status = "PASS" if self.passed else "FAIL"
        return f"[{status}] {self.quantity}: rel_err={self.rel_error:.3e} (tol {self.tol:.1e})"


def relative_error(a, b) -> float:
    """|a - b| / max(1, |b|), Frobenius norm for arrays."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return float(np.linalg.norm(a - b) / max(1.0, np.linalg.norm(b)))


def compare(quantity, formula, oracle, tol) -> OracleReport:
    a = np.asarray(formula, dtype=float)
    b = np.asarray(oracle, dtype=float)
    abs_err = float(np.linalg.norm(a - b))
    rel = relative_error(a, b)
    scalar = a.size == 1
    return OracleReport(
        quantity=quantity,
        formula=float(a) if scalar else float(np.linalg.norm(a)),
        oracle=float(b) if scalar else float(np.linalg.norm(b)),
        abs_error=abs_err,
        rel_error=rel,
        tol=tol,
        passed=bool(rel <= tol),
    )


def _mat(U):
    if isinstance(U, StiefelPoint):
        return U.U
    if isinstance(U, TangentVector):
        return U.delta
    return np.asarray(U, dtype=float)


def fd_gradient(m, U, h: float = GRADIENT_STEP) -> np.ndarray:
    """Entry-wise central differences of ``m.value``."""
    if h <= 0:
        raise ValueError("h must be positive")
    U = _mat(U)
    out = np.empty_like(U)
    E = np.zeros_like(U)
    for idx in np.ndindex(U.shape):
        E[idx] = h
        out[idx] = (m.value(U + E) - m.value(U - E)) / (2 * h)
        E[idx] = 0.0
    return out


def fd_hessian_quadform(m, U, V, h: float = SECOND_DIFF_STEP) -> float:
    """Second difference (G(U+hV) - 2G(U) + G(U-hV)) / h^2."""
    if h <= 0:
        raise ValueError("h must be positive")
    U, V = _mat(U), _mat(V)
    return (m.value(U + h * V) - 2 * m.value(U) + m.value(U - h * V)) / (h * h)


def fd_hessian_bilinear(m, U, V1, V2, h: float = GRADIENT_STEP) -> float:
    """<V1, (grad(U + hV2) - grad(U - hV2)) / 2h>."""
    U, V1, V2 = _mat(U), _mat(V1), _mat(V2)
    return float(np.sum(V1 * (m.gradient(U + h * V2) - m.gradient(U - h * V2)))) / (2 * h)


def _qf(M):
    return qr_positive(M)[0]


def fd_criticality_residual(m, P: StiefelPoint, h: float = GRADIENT_STEP) -> float:
    """max(|U^T g - g^T U|, |g - U U^T g|) with g from finite differences."""
    U = P.U
    g = fd_gradient(m, U, h)
    UtG = U.T @ g
    return float(max(np.max(np.abs(UtG - UtG.T)), np.max(np.abs(g - U @ UtG))))


def fd_riemannian_quadform(
    m, P: StiefelPoint, V, h: float = SECOND_DIFF_STEP, crit_tol: float = 1e-8
) -> float:
    """Second difference of G along the retraction curve t -> qf(U + tV).

    This equals the Riemannian Hessian form only where the differential of
    the restricted cost vanishes, so a non-critical P raises
    :class:`NotCritical`. Criticality is judged from a finite-difference
    gradient to keep this oracle independent of the analytic gradient.
    """
    res = fd_criticality_residual(m, P)
    if res > crit_tol:
        raise NotCritical(f"finite-difference criticality residual {res:.3e} exceeds {crit_tol:.1e}")
    U, V = P.U, _mat(V)
    return (m.value(_qf(U + h * V)) - 2 * m.value(U) + m.value(_qf(U - h * V))) / (h * h)


def _vec(M):
    return np.asarray(M, dtype=float).reshape(-1, order="F")


def kron_sigma_direct(Sigma, V1, V2) -> float:
    """vec(V1)^T (Sigma (x) I_n) vec(V2), formed with an explicit Kronecker product."""
    V1, V2 = _mat(V1), _mat(V2)
    n = V1.shape[0]
    return float(_vec(V1) @ np.kron(Sigma, np.eye(n)) @ _vec(V2))


def constraint_hessian_direct(constraint, V1, V2) -> float:
    """Hess F_aa = (f_a f_a^T) (x) I_n, Hess F_bc = (f_b f_c^T + f_c f_b^T) (x) I_n."""
    V1, V2 = _mat(V1), _mat(V2)
    n, p = V1.shape
    b, c = constraint
    M = np.zeros((p, p))
    if b == c:
        M[b, b] = 1.0
    else:
        M[b, c] = M[c, b] = 1.0
    return float(_vec(V1) @ np.kron(M, np.eye(n)) @ _vec(V2))


def audit_frame(F, tol: float = 1e-12, gram_min_eig: float = 1e-8) -> list:
    """Structural audit of a local frame.

    Checks the vector count, tangency, the three orthogonality families,
    Gram nonsingularity and, for raw frames, that the second-family Gram
    block reproduces the entries of Z = I - U U^T.
    """
    U = np.asarray(F.base.U)
    n, p = U.shape
    vecs = np.asarray(F.vectors)
    labels = F.labels
    reports = []
    expected = n * p - p * (p + 1) // 2
    reports.append(compare("frame count vs np - p(p+1)/2", len(labels), expected, 0.0))

    tang = 0.0
    for V in vecs:
        S = U.T @ V
        tang = max(tang, float(np.max(np.abs(S + S.T))) if S.size else 0.0)
    reports.append(compare("tangency max|U^T D + D^T U|", tang, 0.0, tol))

    G = np.einsum("kij,lij->kl", vecs, vecs)
    prime = [k for k, lab in enumerate(labels) if lab[0] == "prime"]
    second = [k for k, lab in enumerate(labels) if lab[0] == "second"]
    off = 0.0
    for i, j in itertools.combinations(prime, 2):
        off = max(off, abs(G[i, j]))
    reports.append(compare("first family pairwise orthogonal", off, 0.0, tol))
    cross = max((abs(G[i, j]) for i in prime for j in second), default=0.0)
    reports.append(compare("first family orthogonal to second", cross, 0.0, tol))
    groups = max(
        (abs(G[i, j]) for i in second for j in second if labels[i][2] != labels[j][2]),
        default=0.0,
    )
    reports.append(compare("second-family column groups orthogonal", groups, 0.0, tol))

    min_eig = float(np.min(np.linalg.eigvalsh(G))) if G.size else 1.0
    reports.append(
        OracleReport(
            quantity="frame Gram nonsingular (min eigenvalue)",
            formula=min_eig,
            oracle=gram_min_eig,
            abs_error=0.0,
            rel_error=0.0,
            tol=gram_min_eig,
            passed=bool(min_eig > gram_min_eig),
        )
    )

    if np.array_equal(F.transform, np.eye(len(labels))):
        Z = np.eye(n) - U @ U.T
        zdev = 0.0
        for i in second:
            for j in second:
                if labels[i][2] == labels[j][2]:
                    zdev = max(zdev, abs(G[i, j] - Z[labels[i][1], labels[j][1]]))
        reports.append(compare("second-family Gram equals Z entries", zdev, 0.0, tol))
        norms = max((abs(G[i, i] - 2.0) for i in prime), default=0.0)
        reports.append(compare("first family squared norms equal 2", norms, 0.0, tol))
    return reports


def check_model(m, n_probes: int = 10, seed: int = 0, grad_tol=1e-6, hess_tol=1e-7, fd_hess_tol=1e-5):
    """Gradient and ambient-Hessian audits of a cost model on seeded random probes."""
    from .stiefel import random_stiefel

    n, p = m.shape
    rng = np.random.default_rng(seed)
    reports = []
    for k in range(n_probes):
        U = random_stiefel(n, p, seed=seed + k).U
        V1, V2 = rng.standard_normal((2, n, p))
        reports.append(compare(f"gradient vs FD (probe {k})", m.gradient(U), fd_gradient(m, U), grad_tol))
        reports.append(
            compare(
                f"Hessian quadratic form vs second difference (probe {k})",
                m.hess_bilinear(U, V1, V1),
                fd_hessian_quadform(m, U, V1),
                hess_tol,
            )
        )
        reports.append(
            compare(
                f"Hessian bilinear vs gradient difference (probe {k})",
                m.hess_bilinear(U, V1, V2),
                fd_hessian_bilinear(m, U, V1, V2),
                fd_hess_tol,
            )
        )
        reports.append(
            compare(f"Hessian symmetry (probe {k})", m.hess_bilinear(U, V1, V2), m.hess_bilinear(U, V2, V1), 1e-12)
        )
    return reports
