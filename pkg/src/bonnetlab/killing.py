"""Killing fields of Euclidean space as exact linear algebra.

A Killing field on R^d (d = n+1) is x -> S x + v with S skew-symmetric.
The algebra carries the inner product <(S1,v1),(S2,v2)> = tr(S1^T S2)/2 + v1.v2,
which makes the canonical basis (elementary skews, then translations)
orthonormal; coefficient vectors below always refer to that basis.
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import DegenerateSystem, DimensionMismatch, NoCommonZero

SKEW_TOL = 1e-12
ORTHONORMAL_TOL = 1e-12
RANK_RTOL = 1e-10


def _frozen(a: np.ndarray) -> np.ndarray:
    out = np.array(a, dtype=float)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class KillingField:
    """Rotational generator S (skew) plus translational part v."""

    S: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        S = np.asarray(self.S, dtype=float)
        v = np.asarray(self.v, dtype=float)
        if S.ndim != 2 or S.shape[0] != S.shape[1] or v.shape != (S.shape[0],):
            raise DimensionMismatch(f"bad shapes S{S.shape}, v{v.shape}")
        if np.max(np.abs(S + S.T)) > SKEW_TOL:
            raise ValueError("S is not skew-symmetric within 1e-12")
        object.__setattr__(self, "S", _frozen(S))
        object.__setattr__(self, "v", _frozen(v))

    @property
    def dim(self) -> int:
        """Dimension d of the ambient Euclidean space."""
        return self.v.shape[0]

    def __call__(self, x) -> np.ndarray:
        return killing_eval(self, x)

    def coeffs(self) -> np.ndarray:
        return field_to_coeffs(self)

    def norm(self) -> float:
        """Norm in the canonical inner product."""
        return float(np.linalg.norm(self.coeffs()))

    def to_json(self) -> dict:
        return {"S": self.S.tolist(), "v": self.v.tolist()}

    @staticmethod
    def from_json(data: dict) -> "KillingField":
        return KillingField(np.asarray(data["S"], float), np.asarray(data["v"], float))


@dataclass(frozen=True)
class RigidMotion:
    """Proper rigid motion x -> R x + t of R^d."""

    R: np.ndarray
    t: np.ndarray

    def __post_init__(self):
        R = np.asarray(self.R, dtype=float)
        t = np.asarray(self.t, dtype=float)
        if R.ndim != 2 or R.shape[0] != R.shape[1] or t.shape != (R.shape[0],):
            raise DimensionMismatch(f"bad shapes R{R.shape}, t{t.shape}")
        if np.max(np.abs(R.T @ R - np.eye(R.shape[0]))) > 1e-10:
            raise ValueError("R is not orthogonal")
        if np.linalg.det(R) < 0.0:
            raise ValueError("R is orientation-reversing; only proper motions are modelled")
        object.__setattr__(self, "R", _frozen(R))
        object.__setattr__(self, "t", _frozen(t))

    @property
    def dim(self) -> int:
        return self.t.shape[0]

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return x @ self.R.T + self.t

    def compose(self, other: "RigidMotion") -> "RigidMotion":
        """self after other: (self . other)(x) = self(other(x))."""
        return RigidMotion(self.R @ other.R, self.R @ other.t + self.t)

    def inverse(self) -> "RigidMotion":
        return RigidMotion(self.R.T, -self.R.T @ self.t)

    @staticmethod
    def identity(dim: int) -> "RigidMotion":
        return RigidMotion(np.eye(dim), np.zeros(dim))

    def to_json(self) -> dict:
        return {"R": self.R.tolist(), "t": self.t.tolist()}

    @staticmethod
    def from_json(data: dict) -> "RigidMotion":
        return RigidMotion(np.asarray(data["R"], float), np.asarray(data["t"], float))


@dataclass(frozen=True)
class Subspace:
    """Linearly independent Killing fields spanning a subspace of the algebra."""

    dim: int  # ambient Euclidean dimension d
    basis: tuple

    def __post_init__(self):
        basis = tuple(self.basis)
        if any(X.dim != self.dim for X in basis):
            raise DimensionMismatch("basis fields live in different dimensions")
        object.__setattr__(self, "basis", basis)
        if basis:
            C = self.coeff_matrix()
            if np.linalg.matrix_rank(C, tol=RANK_RTOL * np.linalg.norm(C, 2)) < len(basis):
                raise ValueError("basis fields are not linearly independent")

    def __len__(self) -> int:
        return len(self.basis)

    def coeff_matrix(self) -> np.ndarray:
        """Coefficient vectors of the basis as columns."""
        return np.column_stack([X.coeffs() for X in self.basis])


# -- canonical basis structure -----------------------------------------------
#
# For ambient dimension d the basis is the d(d-1)/2 elementary skews
# E_ij - E_ji (i < j, lexicographic) with v = 0, followed by the d standard
# translations.  _structure(d) caches the stacked affine representation
# B_k(x) = M[k] x + V[k] used for fast evaluation and constraint rows.


def algebra_dim(n: int) -> int:
    """dim of the Killing algebra on R^{n+1}."""
    return (n + 1) * (n + 2) // 2


def skew_dim(n: int) -> int:
    return n * (n + 1) // 2


@lru_cache(maxsize=None)
def _skew_pairs(d: int) -> tuple:
    return tuple((i, j) for i in range(d) for j in range(i + 1, d))


@lru_cache(maxsize=None)
def _structure(d: int):
    pairs = _skew_pairs(d)
    N = len(pairs) + d
    M = np.zeros((N, d, d))
    V = np.zeros((N, d))
    for k, (i, j) in enumerate(pairs):
        M[k, i, j] = 1.0
        M[k, j, i] = -1.0
    for m in range(d):
        V[len(pairs) + m, m] = 1.0
    M.setflags(write=False)
    V.setflags(write=False)
    return M, V


def canonical_basis(n: int) -> list:
    """Orthonormal basis of the Killing algebra on R^{n+1}."""
    if n < 1:
        raise ValueError("need n >= 1")
    M, V = _structure(n + 1)
    return [KillingField(M[k], V[k]) for k in range(M.shape[0])]


def field_to_coeffs(X: KillingField) -> np.ndarray:
    d = X.dim
    pairs = _skew_pairs(d)
    out = np.empty(len(pairs) + d)
    for k, (i, j) in enumerate(pairs):
        out[k] = X.S[i, j]
    out[len(pairs):] = X.v
    return out


def coeffs_to_field(a: np.ndarray, n: int) -> KillingField:
    d = n + 1
    a = np.asarray(a, dtype=float)
    if a.shape != (algebra_dim(n),):
        raise DimensionMismatch(f"expected {algebra_dim(n)} coefficients, got {a.shape}")
    M, V = _structure(d)
    return KillingField(np.einsum("k,kij->ij", a, M), a[len(_skew_pairs(d)):].copy())


def eval_coeffs(a: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Evaluate the field with coefficient vector(s) a at the point x.

    a may be (N,) or a stack (..., N); returns matching (..., d).
    """
    x = np.asarray(x, dtype=float)
    d = x.shape[-1]
    M, V = _structure(d)
    return np.einsum("...k,kij,j->...i", a, M, x) + np.asarray(a) @ V


def constraint_row(x: np.ndarray, nu: np.ndarray) -> np.ndarray:
    """Row vector c with c . a = <field_a(x), nu> over coefficient vectors a."""
    nu = np.asarray(nu, dtype=float)
    M, V = _structure(nu.shape[-1])
    return constraint_bilinear(x, nu) + nu @ V.T


def constraint_bilinear(x: np.ndarray, nu: np.ndarray) -> np.ndarray:
    """The part of constraint_row bilinear in (x, nu); its x-derivative."""
    x = np.asarray(x, dtype=float)
    nu = np.asarray(nu, dtype=float)
    M, _ = _structure(x.shape[-1])
    return np.einsum("kij,...j,...i->...k", M, x, nu)


# -- operations ---------------------------------------------------------------


def killing_eval(X: KillingField, x) -> np.ndarray:
    """Value S x + v of the field at a point (or point stack)."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != X.dim:
        raise DimensionMismatch(f"point dim {x.shape[-1]} != field dim {X.dim}")
    return x @ X.S.T + X.v


def killing_bracket(X: KillingField, Y: KillingField) -> KillingField:
    """Jacobi-Lie bracket, convention [U,V](x) = DV.U - DU.V."""
    if X.dim != Y.dim:
        raise DimensionMismatch("bracket of fields in different dimensions")
    return KillingField(Y.S @ X.S - X.S @ Y.S, Y.S @ X.v - X.S @ Y.v)


def adjoint_pushforward(phi: RigidMotion, X: KillingField) -> KillingField:
    """Pushforward of the field under the rigid motion phi."""
    if phi.dim != X.dim:
        raise DimensionMismatch("motion and field dimensions differ")
    S = phi.R @ X.S @ phi.R.T
    return KillingField(S, phi.R @ X.v - S @ phi.t)


def radical_basis(n: int) -> list:
    """Basis of the constant (pure translation) fields."""
    d = n + 1
    return [KillingField(np.zeros((d, d)), np.eye(d)[m]) for m in range(d)]


def isotropy_basis(m) -> Subspace:
    """Fields vanishing at the point m: (S, -S m) over the skew basis."""
    m = np.asarray(m, dtype=float)
    d = m.shape[0]
    M, _ = _structure(d)
    k = len(_skew_pairs(d))
    fields = [KillingField(M[i], -M[i] @ m) for i in range(k)]
    return Subspace(d, tuple(fields))


def common_zero(W: Subspace, rtol: float = 1e-8):
    """Least-squares common zero of the basis fields of W.

    Returns (m, residual).  Success requires residual < rtol * (1 + |m|);
    an inconsistent system raises NoCommonZero, a consistent but
    underdetermined one raises DegenerateSystem.
    """
    d = W.dim
    n = d - 1
    if len(W) != skew_dim(n):
        raise ValueError(f"expected a subspace of dimension {skew_dim(n)}, got {len(W)}")
    A = np.vstack([X.S for X in W.basis])
    b = -np.concatenate([X.v for X in W.basis])
    m, _, rank, _ = np.linalg.lstsq(A, b, rcond=RANK_RTOL)
    residual = float(np.linalg.norm(A @ m - b))
    if residual >= rtol * (1.0 + np.linalg.norm(m)):
        raise NoCommonZero(f"no common zero: residual {residual:.3e}")
    if rank < d:
        raise DegenerateSystem(f"common zero not unique: stacked rank {rank} < {d}")
    return m, residual


def transverse_to_radical(W: Subspace, rtol: float = 1e-10):
    """Whether W + (constant fields) spans the whole algebra.

    Returns (ok, defect) with defect the codimension of the sum.
    """
    d = W.dim
    n = d - 1
    rad = np.column_stack([X.coeffs() for X in radical_basis(n)])
    C = np.hstack([W.coeff_matrix(), rad]) if len(W) else rad
    s = np.linalg.svd(C, compute_uv=False)
    rank = int(np.sum(s > rtol * s[0]))
    defect = algebra_dim(n) - rank
    return defect == 0, defect
