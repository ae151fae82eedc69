"""Explicit local frames of T_U St(n, p).

The frame consists of two families. The first holds p(p-1)/2 vectors
``U A_ab`` built from the signed skew generators
``A_ab = (-1)^(a+b) (f_a f_b^T - f_b f_a^T)``, a < b. The second holds
``(I - U U^T) e_i f_c^T`` for the rows i outside a pivot set (rows forming an
invertible p-by-p block of U) and every column c. Ordering is fixed: first
family lexicographic in (a, b), then the second family grouped by c with i
ascending inside each group.

All indices are 0-based in code. The sign factor (-1)^(a+b) has the same
parity under 0- and 1-based numbering.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateFrame, DimensionError, PivotFailure
from .stiefel import StiefelPoint, TangentVector

PIVOT_TOL = 1e-10
GS_TOL = 1e-12


def frame_dimension(n: int, p: int) -> int:
    """dim St(n, p) = np - p(p+1)/2."""
    if not (isinstance(n, (int, np.integer)) and isinstance(p, (int, np.integer))):
        raise DimensionError("n and p must be integers")
    if p < 1 or n < p:
        raise DimensionError(f"need n >= p >= 1, got n={n}, p={p}")
    return int(n * p - p * (p + 1) // 2)


@dataclass(frozen=True)
class PivotSet:
    indices: tuple

    def complement(self, n: int) -> tuple:
        chosen = set(self.indices)
        return tuple(i for i in range(n) if i not in chosen)

    def submatrix(self, P: StiefelPoint) -> np.ndarray:
        return P.U[list(self.indices), :]


def select_pivot_rows(P: StiefelPoint, tol: float = PIVOT_TOL) -> PivotSet:
    """Pick p rows of U by greedy row-pivoted Gaussian elimination.

    At each elimination step the remaining row with the largest absolute
    entry in the current column wins; ties go to the smallest row index.
    """
    W = np.array(P.U, dtype=float)
    n, p = W.shape
    remaining = list(range(n))
    chosen = []
    for k in range(p):
        col = np.abs(W[remaining, k])
        j = int(np.argmax(col))
        if col[j] < tol:
            raise PivotFailure(
                f"no admissible pivot in column {k} (largest candidate {col[j]:.3e} < {tol:.1e})"
            )
        r = remaining.pop(j)
        chosen.append(r)
        if remaining:
            factors = W[remaining, k] / W[r, k]
            W[remaining, k:] -= np.outer(factors, W[r, k:])
    return PivotSet(tuple(sorted(chosen)))


def _validate_pivots(P: StiefelPoint, pivots: PivotSet):
    idx = pivots.indices
    if len(idx) != P.p or len(set(idx)) != P.p:
        raise PivotFailure(f"pivot set {idx} must hold {P.p} distinct rows")
    if any(i < 0 or i >= P.n for i in idx) or list(idx) != sorted(idx):
        raise PivotFailure(f"pivot set {idx} must be strictly increasing rows in [0, {P.n})")
    det = abs(np.linalg.det(pivots.submatrix(P)))
    if det < PIVOT_TOL:
        raise PivotFailure(f"pivot block is singular (|det| = {det:.3e})")


@dataclass(frozen=True, eq=False)
class LocalFrame:
    """Ordered tangent basis at ``base``.

    ``vectors`` has shape (d, n, p). ``transform`` expresses each vector in
    terms of the raw frame at the same pivots: ``vectors = transform @ raw``
    (identity for a raw frame). ``labels`` entries are ``("prime", a, b)`` or
    ``("second", i, c)``.
    """

    base: StiefelPoint
    pivots: PivotSet
    vectors: np.ndarray
    labels: tuple
    transform: np.ndarray

    @property
    def n_prime(self) -> int:
        p = self.base.p
        return p * (p - 1) // 2

    @property
    def dim(self) -> int:
        return len(self.labels)

    @property
    def prime(self):
        return self.vectors[: self.n_prime]

    @property
    def second(self):
        return self.vectors[self.n_prime :]

    @property
    def is_raw(self) -> bool:
        return np.array_equal(self.transform, np.eye(self.dim))

    def tangent(self, k: int) -> TangentVector:
        return TangentVector(self.base, self.vectors[k], tol=None)

    def gram(self) -> np.ndarray:
        flat = self.vectors.reshape(self.dim, -1)
        return flat @ flat.T

    def combine(self, coeffs) -> np.ndarray:
        """Ambient matrix sum_k coeffs[k] * vectors[k]."""
        return np.tensordot(np.asarray(coeffs, dtype=float), self.vectors, axes=1)


def skew_generator(a: int, b: int, p: int) -> np.ndarray:
    A = np.zeros((p, p))
    s = -1.0 if (a + b) % 2 else 1.0
    A[a, b] = s
    A[b, a] = -s
    return A


def build_frame(P: StiefelPoint, pivots: PivotSet | None = None) -> LocalFrame:
    if pivots is None:
        pivots = select_pivot_rows(P)
    _validate_pivots(P, pivots)
    n, p = P.shape
    U = P.U
    Z = P.normal_projector()
    vecs, labels = [], []
    for a in range(p):
        for b in range(a + 1, p):
            vecs.append(U @ skew_generator(a, b, p))
            labels.append(("prime", a, b))
    rows = pivots.complement(n)
    for c in range(p):
        for i in rows:
            D = np.zeros((n, p))
            D[:, c] = Z[:, i]
            vecs.append(D)
            labels.append(("second", i, c))
    vectors = np.array(vecs).reshape(len(labels), n, p)
    vectors.setflags(write=False)
    d = len(labels)
    return LocalFrame(P, pivots, vectors, tuple(labels), np.eye(d))


def orthonormalize_frame(F: LocalFrame) -> LocalFrame:
    """Normalize the first family and run modified Gram-Schmidt inside each
    column group of the second family.

    The families and groups are already mutually orthogonal, so the result is
    an orthonormal basis of the same span.
    """
    d, n, p = F.vectors.shape
    flat = F.vectors.reshape(d, -1)
    T = np.array(F.transform, dtype=float)
    new = np.array(flat)
    groups = [[k] for k in range(F.n_prime)]
    for c in range(p):
        groups.append([k for k, lab in enumerate(F.labels) if lab[0] == "second" and lab[2] == c])
    for g in groups:
        for pos, k in enumerate(g):
            for j in g[:pos]:
                r = new[j] @ new[k]
                new[k] -= r * new[j]
                T[k] -= r * T[j]
            nrm = np.linalg.norm(new[k])
            if nrm < GS_TOL:
                raise DegenerateFrame(f"Gram-Schmidt pivot norm {nrm:.3e} for {F.labels[k]}")
            new[k] /= nrm
            T[k] /= nrm
    vectors = new.reshape(d, n, p)
    vectors.setflags(write=False)
    return LocalFrame(F.base, F.pivots, vectors, F.labels, T)
