"""Cost models: a smooth extension G of the cost to all n-by-p matrices.

Every model exposes ``value(U)``, ``gradient(U)`` (the Euclidean gradient, an
n-by-p matrix) and ``hess_bilinear(U, V1, V2)`` (the ambient Hessian of G
evaluated on two n-by-p directions). Models are immutable and reentrant.

The three built-in models all have Kronecker-structured Hessians
``M (x) S`` acting as ``tr(V1^T S V2 M^T)``; nothing of size np-by-np is ever
stored.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

from .errors import BadWeights, DimensionError, NotSymmetric, ValidationFailure
from .stiefel import StiefelPoint, random_stiefel

FD_STEP = 1e-5
CUSTOM_GRADIENT_RTOL = 1e-4


def _mat(U):
    if isinstance(U, StiefelPoint):
        return U.U
    return np.asarray(getattr(U, "delta", U), dtype=float)


def _as2d(name, M):
    M = np.asarray(M, dtype=float)
    if M.ndim == 1:
        M = M.reshape(-1, 1)
    if M.ndim != 2:
        raise DimensionError(f"{name} must be a matrix, got {M.ndim} dimensions")
    return M


class CostModel:
    """Base class. Subclasses set ``shape`` (n, p) and implement the three maps."""

    name = "cost"
    shape: tuple = None

    def value(self, U) -> float:
        raise NotImplementedError

    def gradient(self, U) -> np.ndarray:
        raise NotImplementedError

    def hess_bilinear(self, U, V1, V2) -> float:
        raise NotImplementedError

    def hess_apply(self, U, V):
        """Matrix H with hess_bilinear(U, W, V) = <W, H> for all W, or None if unavailable."""
        return None

    @property
    def descriptor(self) -> dict:
        return {"name": self.name}

    def __repr__(self):
        return f"<{type(self).__name__} {self.name} shape={self.shape}>"


class ProcrustesModel(CostModel):
    """G(U) = 1/2 ||A U - B||^2."""

    name = "procrustes"

    def __init__(self, A, B):
        A = _as2d("A", A)
        B = _as2d("B", B)
        if A.shape[0] != B.shape[0]:
            raise DimensionError(f"A is {A.shape} and B is {B.shape}: row counts differ")
        n, p = A.shape[1], B.shape[1]
        if p > n:
            raise DimensionError(f"B has {p} columns but A only {n}: need p <= n")
        self.A, self.B = A, B
        self.AtA = A.T @ A
        self.AtB = A.T @ B
        self.BtB = float(np.sum(B * B))
        self.shape = (n, p)

    def value(self, U):
        U = _mat(U)
        R = self.A @ U - self.B
        return 0.5 * float(np.sum(R * R))

    def gradient(self, U):
        return self.AtA @ _mat(U) - self.AtB

    def hess_bilinear(self, U, V1, V2):
        return float(np.sum(_mat(V1) * (self.AtA @ _mat(V2))))

    def hess_apply(self, U, V):
        return self.AtA @ _mat(V)

    @property
    def descriptor(self):
        return {"name": self.name, "A": self.A.tolist(), "B": self.B.tolist()}


class PenroseModel(CostModel):
    """G(U) = 1/2 ||A U C - B||^2 (weighted orthogonal Procrustes)."""

    name = "penrose"

    def __init__(self, A, B, C):
        A, B, C = _as2d("A", A), _as2d("B", B), _as2d("C", C)
        m, n = A.shape
        p, q = C.shape
        if B.shape != (m, q):
            raise DimensionError(f"B must be {m}x{q} to match A {A.shape} and C {C.shape}, got {B.shape}")
        if p > n:
            raise DimensionError(f"C has {p} rows but A only {n} columns: need p <= n")
        self.A, self.B, self.C = A, B, C
        self.AtA = A.T @ A
        self.CCt = C @ C.T
        self.AtBCt = A.T @ B @ C.T
        self.shape = (n, p)

    def value(self, U):
        R = self.A @ _mat(U) @ self.C - self.B
        return 0.5 * float(np.sum(R * R))

    def gradient(self, U):
        return self.AtA @ _mat(U) @ self.CCt - self.AtBCt

    def hess_bilinear(self, U, V1, V2):
        return float(np.sum(_mat(V1) * (self.AtA @ _mat(V2) @ self.CCt)))

    def hess_apply(self, U, V):
        return self.AtA @ _mat(V) @ self.CCt

    @property
    def descriptor(self):
        return {"name": self.name, "A": self.A.tolist(), "B": self.B.tolist(), "C": self.C.tolist()}


class BrockettModel(CostModel):
    """G(U) = tr(U^T A U N) with A symmetric and N = diag(mu_1 <= ... <= mu_p), mu_1 >= 0."""

    name = "brockett"

    def __init__(self, A, N, allow_unordered=False, sym_tol=1e-12):
        A = _as2d("A", A)
        N = np.asarray(N, dtype=float)
        if N.ndim == 1:
            N = np.diag(N)
        if A.shape[0] != A.shape[1]:
            raise DimensionError(f"A must be square, got {A.shape}")
        if N.ndim != 2 or N.shape[0] != N.shape[1]:
            raise DimensionError(f"N must be square, got {N.shape}")
        n, p = A.shape[0], N.shape[0]
        if p > n:
            raise DimensionError(f"N is {p}x{p} but A is {n}x{n}: need p <= n")
        asym = float(np.max(np.abs(A - A.T))) if A.size else 0.0
        if asym > sym_tol:
            raise NotSymmetric(f"A is not symmetric (max |A - A^T| = {asym:.3e})")
        if np.any(N - np.diag(np.diag(N))):
            raise BadWeights("N must be diagonal")
        mu = np.diag(N).copy()
        if np.any(mu < 0):
            raise BadWeights(f"weights must be nonnegative, got {mu.tolist()}")
        if not allow_unordered and np.any(np.diff(mu) < 0):
            raise BadWeights(f"weights must satisfy 0 <= mu_1 <= ... <= mu_p, got {mu.tolist()}")
        self.A, self.N, self.mu = A, N, mu
        self.shape = (n, p)

    def value(self, U):
        U = _mat(U)
        return float(np.sum(U * (self.A @ U) * self.mu))

    def gradient(self, U):
        return 2.0 * (self.A @ _mat(U)) * self.mu

    def hess_bilinear(self, U, V1, V2):
        return 2.0 * float(np.sum(_mat(V1) * (self.A @ _mat(V2)) * self.mu))

    def hess_apply(self, U, V):
        return 2.0 * (self.A @ _mat(V)) * self.mu

    @property
    def descriptor(self):
        return {"name": self.name, "A": self.A.tolist(), "N": self.mu.tolist()}


class CustomModel(CostModel):
    """Wraps user callables. Without ``hess_fn`` the Hessian form is the
    symmetrized central difference of the gradient with step ``FD_STEP``.

    Callables must be reentrant.
    """

    name = "custom"

    def __init__(self, value_fn, gradient_fn, hess_fn=None, shape=None, name="custom"):
        self._value, self._gradient, self._hess = value_fn, gradient_fn, hess_fn
        self.shape = tuple(shape) if shape is not None else None
        self.name = name

    def value(self, U):
        return float(self._value(_mat(U)))

    def gradient(self, U):
        return np.asarray(self._gradient(_mat(U)), dtype=float)

    def hess_bilinear(self, U, V1, V2):
        U, V1, V2 = _mat(U), _mat(V1), _mat(V2)
        if self._hess is not None:
            return float(self._hess(U, V1, V2))
        h = FD_STEP

        def dgrad(V):
            return (self.gradient(U + h * V) - self.gradient(U - h * V)) / (2 * h)

        return 0.5 * (float(np.sum(V1 * dgrad(V2))) + float(np.sum(V2 * dgrad(V1))))

    @property
    def descriptor(self):
        return {"name": self.name, "hessian": "user" if self._hess else "finite-difference"}


def procrustes_model(A, B) -> ProcrustesModel:
    return ProcrustesModel(A, B)


def penrose_model(A, B, C) -> PenroseModel:
    return PenroseModel(A, B, C)


def brockett_model(A, N, allow_unordered=False) -> BrockettModel:
    return BrockettModel(A, N, allow_unordered=allow_unordered)


def custom_model(
    value_fn: Callable,
    gradient_fn: Callable,
    hess_fn: Callable | None = None,
    *,
    shape,
    n_probes: int = 3,
    seed: int = 0,
    name: str = "custom",
) -> CustomModel:
    """Wrap user-supplied callables and self-validate them.

    The gradient is compared with central differences of ``value_fn`` at
    ``n_probes`` seeded random points of St(n, p); a relative error above
    1e-4 raises :class:`ValidationFailure`. A supplied ``hess_fn`` is checked
    the same way against differences of ``gradient_fn``.
    """
    from .oracle import fd_gradient, relative_error

    model = CustomModel(value_fn, gradient_fn, hess_fn, shape=shape, name=name)
    n, p = model.shape
    rng = np.random.default_rng(seed)
    for k in range(n_probes):
        U = random_stiefel(n, p, seed=seed + k).U
        g = model.gradient(U)
        if g.shape != (n, p):
            raise ValidationFailure(f"gradient returned shape {g.shape}, expected {(n, p)}")
        fd = fd_gradient(model, U, FD_STEP)
        err = relative_error(g, fd)
        if err > CUSTOM_GRADIENT_RTOL:
            raise ValidationFailure(f"gradient disagrees with finite differences (relative error {err:.3e})")
        if hess_fn is not None:
            V1, V2 = rng.standard_normal((2, n, p))
            h = FD_STEP
            fd_h = float(np.sum(V1 * (model.gradient(U + h * V2) - model.gradient(U - h * V2)))) / (2 * h)
            err = relative_error(model.hess_bilinear(U, V1, V2), fd_h)
            if err > CUSTOM_GRADIENT_RTOL:
                raise ValidationFailure(f"Hessian disagrees with finite differences (relative error {err:.3e})")
    return model
