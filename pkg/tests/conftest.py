import numpy as np
import pytest

from stiefel_newton import brockett_model, make_stiefel_point


@pytest.fixture
def brockett42():
    return brockett_model(np.diag([1.0, 2.0, 3.0, 4.0]), np.diag([1.0, 2.0]))


def columns(*idx, signs=None, n=4):
    """St(n, p) point whose columns are signed standard basis vectors (1-based indices)."""
    E = np.eye(n)
    signs = signs or (1,) * len(idx)
    return make_stiefel_point(np.column_stack([s * E[:, i - 1] for i, s in zip(idx, signs)]))


def random_tangent(P, rng):
    """U A + (I - U U^T) C for random skew A and random C."""
    K = rng.standard_normal((P.p, P.p))
    A = K - K.T
    C = rng.standard_normal(P.shape)
    return P.U @ A + (np.eye(P.n) - P.U @ P.U.T) @ C, A, C
