"""Logarithmic derivative of an embedding and the Bonnet-theorem hypotheses.

For the tautological algebroid of a patch the logarithmic derivative is the
inclusion of the fibre into the Killing algebra; the morphism equation and
the four reconstruction hypotheses (rank, transitivity, fibre injectivity,
transversality to the constant fields) are checked numerically, and the base
point is recovered as the common zero of the image of the anchor kernel.
"""

from dataclasses import dataclass, field

import numpy as np

from . import killing as kf
from .algebroid import (DERIV_STEP, AlgebroidFibre, Section,
                        _bracket_coeffs, fibre)
from .errors import BonnetLabError
from .hypersurface import HypersurfacePatch
from .linalg import max_principal_angle, orthonormalize

RANK_RTOL = 1e-8
INJECTIVITY_TOL = 1e-10
M0_TOL = 1e-8


def omega(fib: AlgebroidFibre, a: np.ndarray) -> kf.KillingField:
    """The Killing field with coefficient vector a (a must lie in the fibre span)."""
    return kf.coeffs_to_field(np.asarray(a, dtype=float), fib.n)


def omega_kernel_image(fib: AlgebroidFibre) -> kf.Subspace:
    """Image under omega of the anchor kernel at the fibre's base point."""
    fields = tuple(omega(fib, fib.kernel_basis[:, k]) for k in range(fib.kernel_dim))
    return kf.Subspace(fib.n + 1, fields)


def morphism_residual(X: Section, Y: Section, u, step: float = DERIV_STEP) -> float:
    """Difference between the two sides of the algebroid-morphism equation.

    The left side runs through the section bracket; the right side re-derives
    the flat-connection terms by direct differencing of the projected values,
    so the comparison exercises two separate code paths.
    """
    patch = X.patch
    u = np.asarray(u, dtype=float)
    patch.chart.require_interior(u, 3.0 * step + 2e-4)
    lhs, _, jet = _bracket_coeffs(X, Y, u, step)

    aX = jet.project(np.asarray(X.raw(u), float))
    aY = jet.project(np.asarray(Y.raw(u), float))
    wX = jet.anchor_of(aX)
    wY = jet.anchor_of(aY)

    def dvalue(S, w):
        speed = np.linalg.norm(w)
        if speed == 0.0:
            return np.zeros_like(aX)
        wh = w / speed
        h = 1e-4
        vals = [S.value(u + t * wh) for t in (2 * h, h, -h, -2 * h)]
        return (-vals[0] + 8.0 * vals[1] - 8.0 * vals[2] + vals[3]) * (speed / (12.0 * h))

    n = patch.n
    rhs = dvalue(Y, wX) - dvalue(X, wY) + kf.killing_bracket(
        kf.coeffs_to_field(aX, n), kf.coeffs_to_field(aY, n)).coeffs()
    return float(np.linalg.norm(lhs - rhs))


@dataclass
class ConditionEvidence:
    ok: bool
    detail: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {"pass": self.ok, **self.detail}


@dataclass
class BonnetConditionReport:
    """Numeric evidence for the four reconstruction hypotheses plus base-point
    recovery."""

    rank: ConditionEvidence
    transitive: ConditionEvidence
    injective: ConditionEvidence
    transverse: ConditionEvidence
    m0: np.ndarray = None
    m0_residual: float = float("inf")
    m0_tolerance: float = M0_TOL

    @property
    def rank_ok(self) -> bool:
        return self.rank.ok

    @property
    def transitive_ok(self) -> bool:
        return self.transitive.ok

    @property
    def injective_ok(self) -> bool:
        return self.injective.ok

    @property
    def transverse_ok(self) -> bool:
        return self.transverse.ok

    @property
    def all_ok(self) -> bool:
        return (self.rank_ok and self.transitive_ok and self.injective_ok
                and self.transverse_ok)

    @property
    def m0_ok(self) -> bool:
        return self.m0 is not None and self.m0_residual < self.m0_tolerance

    def to_json(self) -> dict:
        return {
            "rank": self.rank.to_json(),
            "transitive": self.transitive.to_json(),
            "injective": self.injective.to_json(),
            "transverse": self.transverse.to_json(),
            "base_point": {
                "m0": None if self.m0 is None else self.m0.tolist(),
                "residual": self.m0_residual,
                "tolerance": self.m0_tolerance,
                "pass": self.m0_ok,
            },
            "pass": self.all_ok and self.m0_ok,
        }


def check_bonnet_conditions(patch: HypersurfacePatch, u0, sample_points: int = 25,
                            seed: int = 0, fibre_fn=fibre,
                            m0_tolerance: float = M0_TOL) -> BonnetConditionReport:
    """Evidence for rank, transitivity, injectivity and transversality.

    The first three are sampled at ``sample_points`` interior points plus u0;
    transversality and base-point recovery use u0 alone.  Numerical failures
    are recorded in the report, never raised.
    """
    u0 = np.asarray(u0, dtype=float)
    n = patch.n
    rng = np.random.default_rng(seed)
    points = [u0] + list(patch.chart.sample(rng, sample_points))

    expected_rank = n * (n + 3) // 2
    ranks, anchor_ranks, sigma_mins = [], [], []
    failures = []
    fib0 = None
    for u in points:
        try:
            fib = fibre_fn(patch, u)
        except BonnetLabError as exc:
            failures.append(str(exc))
            continue
        if fib0 is None:
            fib0 = fib
        s = np.linalg.svd(fib.basis, compute_uv=False)
        ranks.append(int(np.sum(s > RANK_RTOL * s[0])))
        sa = np.linalg.svd(fib.anchor_matrix, compute_uv=False)
        anchor_ranks.append(int(np.sum(sa > RANK_RTOL * sa[0])))
        sigma_mins.append(float(s[-1]))

    rank_ev = ConditionEvidence(
        ok=not failures and bool(ranks) and all(r == expected_rank for r in ranks),
        detail={"expected": expected_rank, "observed": sorted(set(ranks)),
                "points": len(ranks), "errors": failures})
    trans_ev = ConditionEvidence(
        ok=not failures and bool(anchor_ranks) and all(r == n for r in anchor_ranks),
        detail={"expected": n, "observed": sorted(set(anchor_ranks)), "points": len(anchor_ranks)})
    inj_ev = ConditionEvidence(
        ok=bool(sigma_mins) and min(sigma_mins, default=0.0) > INJECTIVITY_TOL,
        detail={"min_singular_value": min(sigma_mins, default=0.0),
                "threshold": INJECTIVITY_TOL})

    m0 = None
    m0_res = float("inf")
    if fib0 is None:
        tv_ev = ConditionEvidence(ok=False, detail={"errors": failures})
    else:
        W = omega_kernel_image(fib0)
        ok, defect = kf.transverse_to_radical(W)
        tv_ev = ConditionEvidence(ok=ok, detail={"defect": defect, "kernel_dim": len(W)})
        try:
            m0, lstsq_res = kf.common_zero(W)
            m0_res = float(np.linalg.norm(m0 - patch.f(u0)))
            tv_ev.detail["common_zero_residual"] = lstsq_res
        except BonnetLabError as exc:
            tv_ev.detail["common_zero_error"] = str(exc)

    return BonnetConditionReport(rank=rank_ev, transitive=trans_ev, injective=inj_ev,
                                 transverse=tv_ev, m0=m0, m0_residual=m0_res,
                                 m0_tolerance=m0_tolerance)


def ad_equivariance_residual(patch: HypersurfacePatch, phi: kf.RigidMotion, u) -> float:
    """Largest principal angle between Ad_phi of the fibre and the moved patch's fibre."""
    u = np.asarray(u, dtype=float)
    fib = fibre(patch, u)
    moved = patch.transformed(phi)
    fib_moved = fibre(moved, u)
    pushed = np.column_stack([
        kf.adjoint_pushforward(phi, omega(fib, fib.basis[:, k])).coeffs()
        for k in range(fib.rank)])
    return max_principal_angle(orthonormalize(pushed), fib_moved.basis)
