"""The Lie algebroid of Killing fields tangent to a hypersurface patch.

The fibre at a chart point u is the hyperplane of the Killing algebra cut
out by <X(f(u)), nu(u)> = 0.  Sections are represented as raw algebra-valued
maps projected pointwise onto the fibre; only projection operators
(basis-independent) enter differentiated quantities, so per-point SVD sign
flips cannot corrupt derivatives.  Section derivatives apply the chain rule
through the projector, with d(nu) supplied by the Weingarten relation; raw
maps are differenced only when they carry no derivative callback.
"""

from dataclasses import dataclass
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import killing as kf
from .errors import NotTangent
from .hypersurface import (HypersurfacePatch, gauss_map, immersion_hessian,
                           jacobian)
from .linalg import nullspace

DERIV_STEP = 1e-5
NESTED_STEP = 1e-4
# raw maps without a derivative callback are differenced with a 4th-order
# stencil at this step; smaller steps let round-off jitter dominate once the
# result feeds a second stencil level
RAW_FD_STEP = 1e-3
# second-derivative step inside section jets when the patch has no analytic
# Hessian; larger than the plain Hessian step to keep round-off jitter out of
# downstream stencils
JET_HESS_STEP = 1e-3
RANK_RTOL = 1e-8
ANCHOR_RTOL = 1e-9


@dataclass(frozen=True)
class AlgebroidFibre:
    """Fibre data at one chart point."""

    u: np.ndarray
    x: np.ndarray
    normal: np.ndarray
    basis: np.ndarray          # dim g x rank, orthonormal columns
    anchor_matrix: np.ndarray  # n x rank, chart coordinates of basis values
    kernel_coords: np.ndarray  # rank x kdim, anchor nullspace in fibre coords
    kernel_basis: np.ndarray   # dim g x kdim, same in canonical coordinates
    jac: np.ndarray            # (n+1) x n immersion differential
    jac_pinv: np.ndarray

    @property
    def n(self) -> int:
        return self.u.shape[0]

    @property
    def rank(self) -> int:
        return self.basis.shape[1]

    @property
    def kernel_dim(self) -> int:
        return self.kernel_basis.shape[1]


def fibre(patch: HypersurfacePatch, u) -> AlgebroidFibre:
    """Construct the fibre, its anchor matrix and the anchor kernel at u."""
    u = np.asarray(u, dtype=float)
    x = patch.f(u)
    J = jacobian(patch, u)
    nu = gauss_map(patch, u)
    c = kf.constraint_row(x, nu)
    basis = nullspace(c[None, :], rtol=RANK_RTOL)
    values = kf.eval_coeffs(basis.T, x)            # rank x (n+1)
    pinv = np.linalg.pinv(J)
    anchor_matrix = pinv @ values.T                # n x rank
    kernel_coords = nullspace(anchor_matrix, rtol=RANK_RTOL)
    kernel_basis = basis @ kernel_coords
    return AlgebroidFibre(u=u, x=x, normal=nu, basis=basis, anchor_matrix=anchor_matrix,
                          kernel_coords=kernel_coords, kernel_basis=kernel_basis,
                          jac=J, jac_pinv=pinv)


def anchor(fib: AlgebroidFibre, a: np.ndarray, rtol: float = ANCHOR_RTOL) -> np.ndarray:
    """Chart coordinates w of the value field_a(x), solved from J w = field_a(x)."""
    a = np.asarray(a, dtype=float)
    value = kf.eval_coeffs(a, fib.x)
    w = fib.jac_pinv @ value
    residual = np.linalg.norm(fib.jac @ w - value)
    if residual > rtol * (1.0 + np.linalg.norm(value)):
        raise NotTangent(f"anchor solve residual {residual:.3e}")
    return w


class PointJet:
    """First-order data of the constraint at one chart point.

    Carries everything needed to evaluate fibre projections and their
    directional derivatives: immersion value, Jacobian, oriented normal,
    metric, second form and the constraint row.
    """

    def __init__(self, patch: HypersurfacePatch, u, fib: AlgebroidFibre = None):
        self.patch = patch
        self.u = np.asarray(u, dtype=float)
        if fib is not None:
            self.x, self.J, self.nu = fib.x, fib.jac, fib.normal
            self._pinv = fib.jac_pinv
        else:
            self.x = patch.f(self.u)
            self.J = jacobian(patch, self.u)
            self.nu = gauss_map(patch, self.u)
            self._pinv = None
        self.g = self.J.T @ self.J
        self.c = kf.constraint_row(self.x, self.nu)
        self.gamma = float(self.c @ self.c)
        self._II = None

    @property
    def pinv(self) -> np.ndarray:
        if self._pinv is None:
            self._pinv = np.linalg.pinv(self.J)
        return self._pinv

    @property
    def second_form(self) -> np.ndarray:
        if self._II is None:
            H = immersion_hessian(self.patch, self.u, step=JET_HESS_STEP)
            self._II = np.einsum("iab,i->ab", H, self.nu)
        return self._II

    def anchor_of(self, a: np.ndarray, rtol: float = 1e-5) -> np.ndarray:
        value = kf.eval_coeffs(a, self.x)
        w = self.pinv @ value
        if np.linalg.norm(self.J @ w - value) > rtol * (1.0 + np.linalg.norm(value)):
            raise NotTangent("anchor solve residual above tolerance")
        return w

    def dnu(self, w: np.ndarray) -> np.ndarray:
        """Weingarten derivative of the oriented normal along chart vector w."""
        return -self.J @ np.linalg.solve(self.g, self.second_form @ w)

    def dc(self, w: np.ndarray) -> np.ndarray:
        """Derivative of the constraint row along chart vector w.

        The row is affine in x, so the x-derivative keeps only the bilinear
        part; the nu-derivative keeps the full row.
        """
        return (kf.constraint_bilinear(self.J @ w, self.nu)
                + kf.constraint_row(self.x, self.dnu(w)))

    def project(self, r: np.ndarray) -> np.ndarray:
        return r - ((self.c @ r) / self.gamma) * self.c

    def dproject(self, r: np.ndarray, dr: np.ndarray, w: np.ndarray) -> np.ndarray:
        """Derivative of u -> P(u) r(u) along w, given dr = d(raw)/dw."""
        c, gamma = self.c, self.gamma
        dc = self.dc(w)
        alpha = c @ r
        dalpha = dc @ r + c @ dr
        dgamma = 2.0 * (c @ dc)
        return dr - ((dalpha * gamma - alpha * dgamma) / gamma**2) * c - (alpha / gamma) * dc


def project_coeffs(x: np.ndarray, nu: np.ndarray, a: np.ndarray) -> np.ndarray:
    """Orthogonal projection of coefficient vector(s) a onto the fibre at (x, nu)."""
    c = kf.constraint_row(x, nu)
    a = np.asarray(a, dtype=float)
    return a - np.multiply.outer(a @ c, c / (c @ c)).reshape(a.shape)


class Section:
    """Smooth algebra-valued map on the chart, constrained pointwise to the fibre.

    ``raw`` maps a chart point to a coefficient vector in the canonical
    algebra basis; ``raw_jac`` (optional) maps it to the (dim g, n) matrix of
    its partial derivatives.  Evaluation projects raw values onto the fibre.
    """

    def __init__(self, patch: HypersurfacePatch, raw, raw_jac=None, name: str = ""):
        self.patch = patch
        self.raw = raw
        self.raw_jac = raw_jac
        self.name = name

    def value(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        x = self.patch.f(u)
        nu = gauss_map(self.patch, u)
        return project_coeffs(x, nu, np.asarray(self.raw(u), dtype=float))

    def field(self, u) -> kf.KillingField:
        return kf.coeffs_to_field(self.value(u), self.patch.n)

    def _draw(self, u, w, step: float) -> np.ndarray:
        """Derivative of the raw map along w (callback, else 5-point central)."""
        if self.raw_jac is not None:
            return np.asarray(self.raw_jac(u), dtype=float) @ w
        speed = np.linalg.norm(w)
        if speed == 0.0:
            return np.zeros(kf.algebra_dim(self.patch.n))
        wh = w / speed
        h = max(step, RAW_FD_STEP)

        def r(t):
            return np.asarray(self.raw(u + t * wh), dtype=float)

        d = (-r(2 * h) + 8.0 * r(h) - 8.0 * r(-h) + r(-2 * h)) / (12.0 * h)
        return d * speed

    def deriv_at(self, jet: PointJet, w, step: float = DERIV_STEP) -> np.ndarray:
        """Flat-connection derivative of the projected map along w at jet.u."""
        w = np.asarray(w, dtype=float)
        r = np.asarray(self.raw(jet.u), dtype=float)
        return jet.dproject(r, self._draw(jet.u, w, step), w)

    def directional(self, u, w, step: float = DERIV_STEP) -> np.ndarray:
        return self.deriv_at(PointJet(self.patch, u), w, step)

    def scaled(self, fn, grad=None) -> "Section":
        """Pointwise scalar multiple fn * self."""
        raw_jac = None
        if grad is not None and self.raw_jac is not None:
            raw_jac = lambda u: (np.multiply.outer(np.asarray(self.raw(u), float), grad(u))
                                 + fn(u) * np.asarray(self.raw_jac(u), float))
        return Section(self.patch, lambda u: fn(u) * np.asarray(self.raw(u), float),
                       raw_jac=raw_jac, name=f"f*{self.name}")


def _bracket_coeffs(X: Section, Y: Section, u, step: float = DERIV_STEP,
                    jet: PointJet = None):
    """Coefficients of [X, Y](u) plus the tangency residual of the result."""
    if jet is None:
        jet = PointJet(X.patch, u)
    aX = jet.project(np.asarray(X.raw(jet.u), dtype=float))
    aY = jet.project(np.asarray(Y.raw(jet.u), dtype=float))
    wX = jet.anchor_of(aX)
    wY = jet.anchor_of(aY)
    nablaXY = Y.deriv_at(jet, wX, step)
    nablaYX = X.deriv_at(jet, wY, step)
    n = X.patch.n
    alg = kf.killing_bracket(kf.coeffs_to_field(aX, n), kf.coeffs_to_field(aY, n)).coeffs()
    out = nablaXY - nablaYX + alg
    tangency = abs(float(kf.eval_coeffs(out, jet.x) @ jet.nu))
    return out, tangency, jet


def section_bracket(X: Section, Y: Section, u, step: float = DERIV_STEP):
    """Bracket of two sections at u; returns (value field, tangency residual)."""
    X.patch.chart.require_interior(u, 3.0 * step)
    out, tangency, _ = _bracket_coeffs(X, Y, u, step)
    return kf.coeffs_to_field(out, X.patch.n), tangency


def bracket_section(X: Section, Y: Section, step: float = DERIV_STEP) -> Section:
    """[X, Y] packaged as a section (values are tangent up to stencil error)."""
    def raw(u):
        out, _, _ = _bracket_coeffs(X, Y, u, step)
        return out

    return Section(X.patch, raw, name=f"[{X.name},{Y.name}]")


def action_algebroid_bracket(action, X, Y, m, step: float = DERIV_STEP) -> kf.KillingField:
    """Bracket on the trivial bundle over a chart of the action manifold.

    ``action(field, point)`` evaluates the infinitesimal action; X and Y map
    points of the manifold to Killing fields.
    """
    m = np.asarray(m, dtype=float)
    Xm, Ym = X(m), Y(m)
    wX = np.asarray(action(Xm, m), dtype=float)
    wY = np.asarray(action(Ym, m), dtype=float)

    def deriv(F, w):
        speed = np.linalg.norm(w)
        if speed == 0.0:
            return np.zeros_like(Xm.coeffs())
        wh = w / speed
        return (F(m + step * wh).coeffs() - F(m - step * wh).coeffs()) * (speed / (2.0 * step))

    out = deriv(Y, wX) - deriv(X, wY) + kf.killing_bracket(Xm, Ym).coeffs()
    return kf.coeffs_to_field(out, m.shape[0] - 1)


def _poly2_monomials(u: np.ndarray) -> np.ndarray:
    n = u.shape[0]
    quad = [u[i] * u[j] for i in range(n) for j in range(i, n)]
    return np.concatenate([[1.0], u, quad])


def _poly2_monomial_grads(u: np.ndarray) -> np.ndarray:
    n = u.shape[0]
    rows = [np.zeros(n)] + [np.eye(n)[i] for i in range(n)]
    for i in range(n):
        for j in range(i, n):
            grad = np.zeros(n)
            grad[i] += u[j]
            grad[j] += u[i]
            rows.append(grad)
    return np.stack(rows)


def poly2_count(n: int) -> int:
    return 1 + n + n * (n + 1) // 2


def random_section(patch: HypersurfacePatch, seed, with_jac: bool = True) -> Section:
    """Projected degree-2 polynomial raw map with coefficients from the seed."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    N = kf.algebra_dim(patch.n)
    C = rng.uniform(-1.0, 1.0, size=(N, poly2_count(patch.n)))

    def raw(u):
        return C @ _poly2_monomials(np.asarray(u, dtype=float))

    def raw_jac(u):
        return C @ _poly2_monomial_grads(np.asarray(u, dtype=float))

    return Section(patch, raw, raw_jac=raw_jac if with_jac else None, name="rand")


def random_scalar(n: int, seed):
    """Random degree-2 scalar; returns (value_fn, grad_fn)."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    c0 = rng.uniform(-1.0, 1.0)
    c1 = rng.uniform(-1.0, 1.0, size=n)
    C2 = rng.uniform(-1.0, 1.0, size=(n, n))
    C2 = 0.5 * (C2 + C2.T)

    def value(u):
        u = np.asarray(u, dtype=float)
        return c0 + c1 @ u + u @ C2 @ u

    def grad(u):
        u = np.asarray(u, dtype=float)
        return c1 + 2.0 * C2 @ u

    return value, grad


# -- residual suite ------------------------------------------------------------


@dataclass
class ResidualStat:
    max: float
    mean: float
    samples: int
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.max < self.tolerance

    def to_json(self) -> dict:
        return {"max": self.max, "mean": self.mean, "samples": self.samples,
                "tolerance": self.tolerance, "pass": self.passed}


class ResidualReport:
    """Named residual maxima/means with their tolerances."""

    def __init__(self, stats: dict):
        self.stats = dict(stats)

    def __getitem__(self, key: str) -> ResidualStat:
        return self.stats[key]

    def keys(self):
        return self.stats.keys()

    @property
    def passed(self) -> bool:
        return all(s.passed for s in self.stats.values())

    def to_json(self) -> dict:
        return {k: v.to_json() for k, v in sorted(self.stats.items())}

    @staticmethod
    def from_samples(values: dict, tolerances: dict) -> "ResidualReport":
        stats = {}
        for key, vals in values.items():
            arr = np.asarray(vals, dtype=float)
            stats[key] = ResidualStat(max=float(arr.max()), mean=float(arr.mean()),
                                      samples=arr.size, tolerance=tolerances[key])
        return ResidualReport(stats)

    def merge(self, other: "ResidualReport") -> "ResidualReport":
        """Componentwise combination (max of maxima, sample-weighted means)."""
        stats = {}
        for key in set(self.stats) | set(other.stats):
            if key not in self.stats:
                stats[key] = other.stats[key]
            elif key not in other.stats:
                stats[key] = self.stats[key]
            else:
                a, b = self.stats[key], other.stats[key]
                ns = a.samples + b.samples
                stats[key] = ResidualStat(
                    max=max(a.max, b.max),
                    mean=(a.mean * a.samples + b.mean * b.samples) / ns,
                    samples=ns, tolerance=a.tolerance)
        return ResidualReport(stats)


IDENTITY_KEYS = ("leibniz", "jacobi", "anchor_morphism", "closure", "well_definedness")


def _fd_chart_bracket(V, W, u, n, step):
    """Jacobi-Lie bracket (DW).V - (DV).W of chart vector fields at u."""
    out = np.zeros(n)
    Vu, Wu = V(u), W(u)
    for i in range(n):
        e = np.zeros(n)
        e[i] = step
        out += (W(u + e) - W(u - e)) / (2.0 * step) * Vu[i]
        out -= (V(u + e) - V(u - e)) / (2.0 * step) * Wu[i]
    return out


def _identity_sample(patch, sample_seed, step, nested_step, analytic_raw):
    rng = np.random.default_rng(sample_seed)
    n = patch.n
    X = random_section(patch, rng, with_jac=analytic_raw)
    Y = random_section(patch, rng, with_jac=analytic_raw)
    Z = random_section(patch, rng, with_jac=analytic_raw)
    fval, fgrad = random_scalar(n, rng)
    u = patch.chart.sample(rng, 1, margin_frac=0.05)[0]
    patch.chart.require_interior(u, 3.0 * (step + nested_step) + 2.0 * RAW_FD_STEP)

    jet = PointJet(patch, u)
    bXY, tangency, _ = _bracket_coeffs(X, Y, u, step, jet)

    # Leibniz: [X, fY] = f [X, Y] + df(#X) Y
    fY = Y.scaled(fval, fgrad)
    bXfY, _, _ = _bracket_coeffs(X, fY, u, step, jet)
    wX = jet.anchor_of(jet.project(np.asarray(X.raw(u), float)))
    leib = np.linalg.norm(bXfY - fval(u) * bXY - (fgrad(u) @ wX) * jet.project(
        np.asarray(Y.raw(u), float)))

    # Jacobi: cyclic sum of nested brackets, wider outer step
    cyc = np.zeros_like(bXY)
    for A, B, C in ((X, Y, Z), (Y, Z, X), (Z, X, Y)):
        W = bracket_section(A, B, step)
        out, _, _ = _bracket_coeffs(W, C, u, nested_step, jet)
        cyc += out
    jac_res = np.linalg.norm(cyc)

    # anchor morphism: #[X, Y] vs finite-difference bracket of anchored fields
    lhs = jet.anchor_of(jet.project(bXY))
    chart_step = step if patch.has_analytic else 1e-3

    def VX(up):
        j = PointJet(patch, up)
        return j.anchor_of(j.project(np.asarray(X.raw(up), float)))

    def VY(up):
        j = PointJet(patch, up)
        return j.anchor_of(j.project(np.asarray(Y.raw(up), float)))

    rhs = _fd_chart_bracket(VX, VY, u, n, chart_step)
    anchor_res = np.linalg.norm(lhs - rhs)

    # well-definedness: perturb the raw map off the fibre, same section values
    q = rng.uniform(-1.0, 1.0, size=kf.algebra_dim(n))

    def raw2(up):
        x = patch.f(up)
        nu = gauss_map(patch, up)
        return X.raw(up) + (q - project_coeffs(x, nu, q))

    def raw2_jac(up):
        j = jet if np.array_equal(up, jet.u) else PointJet(patch, up)
        base = np.asarray(X.raw_jac(up), float)
        cols = []
        for a in range(n):
            e = np.zeros(n)
            e[a] = 1.0
            # d[(I - P) q] = -dP q, assembled from the jet's constraint data
            cols.append(-j.dproject(q, np.zeros_like(q), e))
        return base + np.column_stack(cols)

    X2 = Section(patch, raw2, raw_jac=raw2_jac if analytic_raw else None)
    bX2Y, _, _ = _bracket_coeffs(X2, Y, u, step, jet)
    well = np.linalg.norm(bX2Y - bXY)

    return {"leibniz": leib, "jacobi": jac_res, "anchor_morphism": anchor_res,
            "closure": tangency, "well_definedness": well}


def identity_residuals(patch: HypersurfacePatch, samples: int = 100, seed: int = 0,
                       step: float = DERIV_STEP, nested_step: float = NESTED_STEP,
                       tolerance: float = 1e-4, tolerances: dict = None,
                       raw_derivatives: str = "analytic",
                       threads: int = 1) -> ResidualReport:
    """Leibniz / Jacobi / anchor-morphism / closure / well-definedness residuals
    over random sections, scalars and interior points.

    ``raw_derivatives``: "analytic" lets test sections supply derivative
    callbacks; "fd" forces central differencing of the raw maps.
    """
    if samples < 1:
        raise ValueError("need samples >= 1")
    if raw_derivatives not in ("analytic", "fd"):
        raise ValueError("raw_derivatives must be 'analytic' or 'fd'")
    tols = {k: tolerance for k in IDENTITY_KEYS}
    if tolerances:
        tols.update(tolerances)
    seeds = np.random.SeedSequence(seed).spawn(samples)

    def work(s):
        return _identity_sample(patch, s, step, nested_step, raw_derivatives == "analytic")

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(work, seeds))
    else:
        results = [work(s) for s in seeds]

    values = {k: [r[k] for r in results] for k in IDENTITY_KEYS}
    return ResidualReport.from_samples(values, tols)
