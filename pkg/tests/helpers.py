"""Shared test utilities: random group elements and independent oracles."""

import numpy as np

from bonnetlab.killing import KillingField, RigidMotion, killing_eval


def random_rotation(d: int, rng: np.random.Generator) -> np.ndarray:
    A = rng.normal(size=(d, d))
    Q, R = np.linalg.qr(A)
    Q = Q @ np.diag(np.sign(np.diag(R)))
    if np.linalg.det(Q) < 0:
        Q[:, [0, 1]] = Q[:, [1, 0]]
    return Q


def random_rigid_motion(d: int, rng: np.random.Generator) -> RigidMotion:
    return RigidMotion(random_rotation(d, rng), rng.normal(size=d))


def random_killing_field(d: int, rng: np.random.Generator) -> KillingField:
    A = rng.normal(size=(d, d))
    return KillingField(A - A.T, rng.normal(size=d))


def fd_vector_field_bracket(V, W, x: np.ndarray, h: float = 1e-5) -> np.ndarray:
    """Jacobi-Lie bracket (DW).V - (DV).W by central differences.

    Independent oracle: knows nothing about the closed-form bracket.
    """
    d = x.size
    out = np.zeros(d)
    Vx, Wx = V(x), W(x)
    for i in range(d):
        e = np.zeros(d)
        e[i] = h
        out += (W(x + e) - W(x - e)) / (2.0 * h) * Vx[i]
        out -= (V(x + e) - V(x - e)) / (2.0 * h) * Wx[i]
    return out


def fd_killing_bracket(X: KillingField, Y: KillingField, x: np.ndarray,
                       h: float = 1e-5) -> np.ndarray:
    return fd_vector_field_bracket(lambda p: killing_eval(X, p),
                                   lambda p: killing_eval(Y, p), x, h)


def rotation_z(d: int = 3) -> KillingField:
    """Generator with S e1 = e2 (rotation in the (1,2)-plane)."""
    S = np.zeros((d, d))
    S[1, 0] = 1.0
    S[0, 1] = -1.0
    return KillingField(S, np.zeros(d))
