"""Small dense linear-algebra helpers used throughout the package."""

import numpy as np


def nullspace(A: np.ndarray, rtol: float = 1e-10) -> np.ndarray:
    """Orthonormal basis for the nullspace of A, as columns.

    Singular values below ``rtol * smax`` count as zero.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    _, s, vh = np.linalg.svd(A)
    smax = s[0] if s.size else 0.0
    rank = int(np.sum(s > rtol * smax)) if smax > 0 else 0
    return vh[rank:].T


def matrix_rank(A: np.ndarray, rtol: float = 1e-10) -> int:
    """Numerical rank with a relative singular-value threshold."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    s = np.linalg.svd(A, compute_uv=False)
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int(np.sum(s > rtol * s[0]))


def orthonormalize(A: np.ndarray, rtol: float = 1e-10) -> np.ndarray:
    """Orthonormal basis (columns) for the column span of A."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    u, s, _ = np.linalg.svd(A, full_matrices=False)
    if s.size == 0 or s[0] == 0.0:
        return A[:, :0]
    rank = int(np.sum(s > rtol * s[0]))
    return u[:, :rank]


def principal_angle_sines(B1: np.ndarray, B2: np.ndarray) -> np.ndarray:
    """Sines of the principal angles between two column spans.

    Both inputs must already have orthonormal columns.  The sine formulation
    keeps small angles accurate where arccos of near-unit cosines would not.
    """
    proj = B2 - B1 @ (B1.T @ B2)
    s = np.linalg.svd(proj, compute_uv=False)
    return np.clip(s, 0.0, 1.0)


def max_principal_angle(B1: np.ndarray, B2: np.ndarray) -> float:
    """Largest principal angle (radians) between two orthonormal spans."""
    sines = principal_angle_sines(B1, B2)
    if sines.size == 0:
        return 0.0
    return float(np.arcsin(np.max(sines)))


def polar_fit(E: np.ndarray, gram: np.ndarray) -> np.ndarray:
    """Closest matrix to E whose Gram matrix equals ``gram``.

    Solves min ||E' - E|| over E' with E'^T E' = gram, via the polar
    decomposition of E against the Cholesky factor of the target Gram.
    """
    L = np.linalg.cholesky(gram)
    M = L.T
    u, _, vh = np.linalg.svd(E @ np.linalg.inv(M))
    return (u @ vh) @ M


def sym(A: np.ndarray) -> np.ndarray:
    """Symmetric part of the trailing two axes."""
    return 0.5 * (A + np.swapaxes(A, -1, -2))
