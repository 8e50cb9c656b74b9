"""Fundamental forms derived from the algebroid inclusion.

The tangent inclusion iota is rebuilt the long way round: anchor preimages
in the fibre, corrected modulo the anchor kernel into the constant fields.
Its agreement with the immersion differential is therefore a checkable
property, not an assumption.  The derived metric and second form are then
compared against the classical ones.
"""

from dataclasses import dataclass

import numpy as np

from . import killing as kf
from .algebroid import AlgebroidFibre, fibre
from .errors import ChoiceDependent
from .hypersurface import (HypersurfacePatch, _normal_from_columns,
                           classical_first_form, classical_second_form)
from .linalg import sym

DNU_STEP = 1e-4
CHOICE_TOL = 1e-10


@dataclass(frozen=True)
class OmegaForms:
    """Pointwise inclusion, derived Gauss map and derived fundamental forms."""

    u: np.ndarray
    iota_matrix: np.ndarray
    nu_omega: np.ndarray
    g_omega: np.ndarray
    II_omega: np.ndarray
    asymmetry: float


def iota(patch: HypersurfacePatch, u, fib: AlgebroidFibre = None) -> np.ndarray:
    """Inclusion of the tangent space into R^{n+1} via the constant fields.

    For each chart direction, any anchor preimage a is reduced modulo the
    anchor kernel to a constant field, which is exactly the value of the
    preimage field at the base point.  Two different preimages must agree.
    """
    if fib is None:
        fib = fibre(patch, u)
    n = fib.n
    pre = np.linalg.pinv(fib.anchor_matrix)   # rank x n, min-norm preimages
    cols = []
    for j in range(n):
        c1 = pre[:, j]
        w1 = kf.eval_coeffs(fib.basis @ c1, fib.x)
        c2 = c1 + fib.kernel_coords[:, j % fib.kernel_coords.shape[1]]
        w2 = kf.eval_coeffs(fib.basis @ c2, fib.x)
        if np.linalg.norm(w1 - w2) > CHOICE_TOL * (1.0 + np.linalg.norm(w1)):
            raise ChoiceDependent(
                f"anchor preimages disagree by {np.linalg.norm(w1 - w2):.3e} at {fib.u}")
        cols.append(w1)
    return np.column_stack(cols)


def gauss_from_omega(patch: HypersurfacePatch, u, fib: AlgebroidFibre = None) -> np.ndarray:
    """Unit normal to the iota image, oriented by the determinant rule."""
    return _normal_from_columns(iota(patch, u, fib), patch.orientation)


def omega_forms(patch: HypersurfacePatch, u, step: float = DNU_STEP) -> OmegaForms:
    """Derived first and second fundamental forms at u.

    d(nu) is taken by a 5-point stencil on the derived Gauss map; the second
    form is symmetrized on return with the raw asymmetry recorded.
    """
    u = np.asarray(u, dtype=float)
    h = max(step, DNU_STEP)
    patch.chart.require_interior(u, 3.0 * h)
    fib = fibre(patch, u)
    it = iota(patch, u, fib)
    nu = gauss_from_omega(patch, u, fib)
    g = it.T @ it
    n = patch.n
    II_raw = np.empty((n, n))
    for j in range(n):
        e = np.zeros(n)
        e[j] = 1.0

        def nu_at(t):
            return gauss_from_omega(patch, u + t * e)

        dnu = (-nu_at(2 * h) + 8.0 * nu_at(h) - 8.0 * nu_at(-h) + nu_at(-2 * h)) / (12.0 * h)
        II_raw[:, j] = -(it.T @ dnu)
    asymmetry = float(np.max(np.abs(II_raw - II_raw.T)))
    return OmegaForms(u=u, iota_matrix=it, nu_omega=nu, g_omega=g,
                      II_omega=sym(II_raw), asymmetry=asymmetry)


def form_comparison_residual(patch: HypersurfacePatch, samples: int = 100, seed: int = 0,
                      step: float = DNU_STEP) -> dict:
    """Max deviation of the derived forms from the classical ones at random points."""
    rng = np.random.default_rng(seed)
    pts = patch.chart.sample(rng, samples)
    g_err = 0.0
    II_err = 0.0
    for u in pts:
        of = omega_forms(patch, u, step)
        g_err = max(g_err, float(np.max(np.abs(of.g_omega - classical_first_form(patch, u)))))
        II_err = max(II_err, float(np.max(np.abs(of.II_omega - classical_second_form(patch, u)))))
    return {"g_max_err": g_err, "II_max_err": II_err, "samples": samples}
