"""Parametrized hypersurface patches, Gauss map and classical fundamental forms.

All geometric queries accept a single chart point of shape (n,) or a batch
of shape (m, n) and return correspondingly shaped results.  Preset patches
carry analytic, batch-vectorized immersion/Jacobian/Hessian callbacks;
user-supplied callbacks may be scalar (set ``vectorized=False``).
"""

from dataclasses import dataclass, replace

import numpy as np

from .errors import RankDeficient, StencilOutOfDomain, UnknownPreset
from .killing import RigidMotion

JACOBIAN_REL_STEP = 1e-6
HESSIAN_STEP = 1e-4
RANK_RTOL = 1e-8

PRESET_NAMES = ("plane", "sphere", "cylinder", "graph", "torus")


@dataclass(frozen=True)
class Chart:
    """Open box in R^n with a sampling grid."""

    lower: np.ndarray
    upper: np.ndarray
    grid: tuple

    def __post_init__(self):
        lower = np.asarray(self.lower, dtype=float)
        upper = np.asarray(self.upper, dtype=float)
        grid = tuple(int(g) for g in np.atleast_1d(self.grid))
        if lower.shape != upper.shape or lower.ndim != 1:
            raise ValueError("lower/upper must be 1-d arrays of equal length")
        if len(grid) == 1 and lower.size > 1:
            grid = grid * lower.size
        if len(grid) != lower.size:
            raise ValueError("grid must give one sample count per axis")
        if not np.all(lower < upper):
            raise ValueError("need lower < upper componentwise")
        if any(g < 2 for g in grid):
            raise ValueError("need at least 2 grid samples per axis")
        lower.setflags(write=False)
        upper.setflags(write=False)
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)
        object.__setattr__(self, "grid", grid)

    @property
    def n(self) -> int:
        return self.lower.size

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (self.lower + self.upper)

    @property
    def span(self) -> np.ndarray:
        return self.upper - self.lower

    @property
    def diameter(self) -> float:
        return float(np.linalg.norm(self.span))

    def spacing(self) -> np.ndarray:
        return self.span / (np.asarray(self.grid) - 1)

    def axes(self) -> list:
        return [np.linspace(self.lower[a], self.upper[a], self.grid[a]) for a in range(self.n)]

    def node_grid(self) -> np.ndarray:
        """All grid nodes, shape grid + (n,)."""
        mesh = np.meshgrid(*self.axes(), indexing="ij")
        return np.stack(mesh, axis=-1)

    def contains(self, u, margin: float = 0.0) -> bool:
        u = np.asarray(u, dtype=float)
        return bool(np.all(u >= self.lower + margin) and np.all(u <= self.upper - margin))

    def require_interior(self, u, margin: float) -> None:
        if not self.contains(u, margin):
            raise StencilOutOfDomain(f"point {np.asarray(u)} within {margin} of chart boundary")

    def sample(self, rng: np.random.Generator, count: int, margin_frac: float = 0.05) -> np.ndarray:
        """Uniform interior points, shape (count, n)."""
        m = margin_frac * self.span
        return rng.uniform(self.lower + m, self.upper - m, size=(count, self.n))

    def to_json(self) -> dict:
        return {"lower": self.lower.tolist(), "upper": self.upper.tolist(), "grid": list(self.grid)}

    @staticmethod
    def from_json(data: dict) -> "Chart":
        return Chart(np.asarray(data["lower"], float), np.asarray(data["upper"], float),
                     tuple(data["grid"]))


@dataclass(frozen=True)
class HypersurfacePatch:
    """Immersion of a chart box into R^{n+1} with optional analytic derivatives."""

    chart: Chart
    immersion: object
    jac: object = None
    hess: object = None
    orientation: int = 1
    vectorized: bool = False
    name: str = ""
    params: tuple = ()

    @property
    def n(self) -> int:
        return self.chart.n

    @property
    def has_analytic(self) -> bool:
        return self.jac is not None and self.hess is not None

    def _ev(self, fn, U: np.ndarray) -> np.ndarray:
        if self.vectorized or U.ndim == 1:
            return np.asarray(fn(U), dtype=float)
        return np.stack([np.asarray(fn(u), dtype=float) for u in U])

    def f(self, u) -> np.ndarray:
        """Immersion value(s)."""
        return self._ev(self.immersion, np.asarray(u, dtype=float))

    def without_analytic(self) -> "HypersurfacePatch":
        """Copy that forces finite-difference derivatives."""
        return replace(self, jac=None, hess=None)

    def transformed(self, phi: RigidMotion) -> "HypersurfacePatch":
        """The patch moved by a rigid motion (same chart, same orientation)."""
        R = phi.R
        base_f, base_j, base_h = self.immersion, self.jac, self.hess
        vec = self.vectorized

        def f(U):
            val = np.asarray(base_f(U), dtype=float)
            return val @ R.T + phi.t

        jac = None if base_j is None else (lambda U: np.einsum(
            "ij,...ja->...ia", R, np.asarray(base_j(U), dtype=float)))
        hess = None if base_h is None else (lambda U: np.einsum(
            "ij,...jab->...iab", R, np.asarray(base_h(U), dtype=float)))
        return replace(self, immersion=f, jac=jac, hess=hess, vectorized=vec,
                       name=self.name + "+moved")


def _flatten(u):
    U = np.asarray(u, dtype=float)
    single = U.ndim == 1
    return (U[None, :] if single else U), single


def jacobian(patch: HypersurfacePatch, u) -> np.ndarray:
    """Differential of the immersion, columns spanning the tangent space."""
    U, single = _flatten(u)
    if patch.jac is not None:
        J = patch._ev(patch.jac, U)
    else:
        h = JACOBIAN_REL_STEP * (1.0 + np.abs(U))
        cols = []
        for a in range(patch.n):
            Up = U.copy()
            Um = U.copy()
            Up[:, a] += h[:, a]
            Um[:, a] -= h[:, a]
            cols.append((patch.f(Up) - patch.f(Um)) / (2.0 * h[:, a, None]))
        J = np.stack(cols, axis=-1)
    s = np.linalg.svd(J, compute_uv=False)
    if np.any(s[:, -1] <= RANK_RTOL * s[:, 0]):
        raise RankDeficient("immersion differential is rank deficient at a queried point")
    return J[0] if single else J


def gauss_map(patch: HypersurfacePatch, u) -> np.ndarray:
    """Oriented unit normal(s); sign fixed by det[J | nu] * orientation > 0."""
    U, single = _flatten(u)
    J = jacobian(patch, U)
    nu = _normal_from_columns(J, patch.orientation)
    return nu[0] if single else nu


def _normal_from_columns(J: np.ndarray, orientation: int) -> np.ndarray:
    full_u, _, _ = np.linalg.svd(J)
    nu = full_u[..., :, -1]
    det = np.linalg.det(np.concatenate([J, nu[..., :, None]], axis=-1))
    flip = det * orientation < 0
    nu = nu.copy()
    nu[flip] *= -1.0
    return nu


def classical_first_form(patch: HypersurfacePatch, u) -> np.ndarray:
    """Induced metric J^T J."""
    U, single = _flatten(u)
    J = jacobian(patch, U)
    g = np.einsum("mia,mib->mab", J, J)
    return g[0] if single else g


def immersion_hessian(patch: HypersurfacePatch, u, step: float = HESSIAN_STEP) -> np.ndarray:
    """Second derivatives of the immersion, shape (..., n+1, n, n)."""
    U, single = _flatten(u)
    n = patch.n
    if patch.hess is not None:
        H = patch._ev(patch.hess, U)
        H = H[None] if single and H.ndim == 3 else H
    else:
        h = step
        f0 = patch.f(U)
        d = f0.shape[-1]
        H = np.empty((U.shape[0], d, n, n))
        for a in range(n):
            Up = U.copy()
            Um = U.copy()
            Up[:, a] += h
            Um[:, a] -= h
            H[:, :, a, a] = (patch.f(Up) - 2.0 * f0 + patch.f(Um)) / h**2
            for b in range(a + 1, n):
                Upp = Up.copy()
                Upm = Up.copy()
                Ump = Um.copy()
                Umm = Um.copy()
                Upp[:, b] += h
                Upm[:, b] -= h
                Ump[:, b] += h
                Umm[:, b] -= h
                mixed = (patch.f(Upp) - patch.f(Upm) - patch.f(Ump) + patch.f(Umm)) / (4.0 * h**2)
                H[:, :, a, b] = mixed
                H[:, :, b, a] = mixed
    return H[0] if single else H


def classical_second_form(patch: HypersurfacePatch, u) -> np.ndarray:
    """Second fundamental form <d2f, nu> w.r.t. the oriented normal."""
    U, single = _flatten(u)
    H = immersion_hessian(patch, U)
    nu = gauss_map(patch, U)
    II = np.einsum("miab,mi->mab", H, nu)
    return II[0] if single else II


# -- presets -------------------------------------------------------------------


def _default_chart(lower, upper, grid):
    return Chart(np.asarray(lower, float), np.asarray(upper, float), grid)


def _plane(n: int, grid) -> HypersurfacePatch:
    def f(U):
        U = np.atleast_2d(U)
        return np.concatenate([U, np.zeros(U.shape[:-1] + (1,))], axis=-1).squeeze()

    def fv(U):
        U = np.asarray(U, float)
        return np.concatenate([U, np.zeros(U.shape[:-1] + (1,))], axis=-1)

    def jac(U):
        U = np.asarray(U, float)
        J = np.zeros(U.shape[:-1] + (n + 1, n))
        idx = np.arange(n)
        J[..., idx, idx] = 1.0
        return J

    def hess(U):
        U = np.asarray(U, float)
        return np.zeros(U.shape[:-1] + (n + 1, n, n))

    chart = _default_chart([-1.0] * n, [1.0] * n, grid)
    return HypersurfacePatch(chart, fv, jac, hess, orientation=1, vectorized=True,
                             name="plane", params=())


def _sphere_factor_kinds(n: int):
    # coordinate i is R * prod_j factor(i,j); kinds: 's'in, 'c'os, constant '1'
    kinds = []
    for i in range(n):
        kinds.append(["s"] * i + ["c"] + ["1"] * (n - i - 1))
    kinds.append(["s"] * n)
    return kinds


def _sphere_tables(U: np.ndarray, n: int):
    s, c = np.sin(U), np.cos(U)
    one = np.ones(U.shape[:-1])
    zero = np.zeros(U.shape[:-1])
    kinds = _sphere_factor_kinds(n)
    F = np.empty(U.shape[:-1] + (n + 1, n))
    D = np.empty_like(F)
    const = np.zeros((n + 1, n), dtype=bool)
    for i in range(n + 1):
        for j in range(n):
            k = kinds[i][j]
            if k == "s":
                F[..., i, j] = s[..., j]
                D[..., i, j] = c[..., j]
            elif k == "c":
                F[..., i, j] = c[..., j]
                D[..., i, j] = -s[..., j]
            else:
                F[..., i, j] = one
                D[..., i, j] = zero
                const[i, j] = True
    return F, D, const


def _prod_except(F: np.ndarray, skip) -> np.ndarray:
    keep = [j for j in range(F.shape[-1]) if j not in skip]
    if not keep:
        return np.ones(F.shape[:-1])
    return np.prod(F[..., keep], axis=-1)


def _sphere(n: int, radius: float, grid) -> HypersurfacePatch:
    R = float(radius)
    if R <= 0:
        raise ValueError("sphere radius must be positive")

    def fv(U):
        U = np.asarray(U, float)
        F, _, _ = _sphere_tables(U, n)
        return R * np.prod(F, axis=-1)

    def jac(U):
        U = np.asarray(U, float)
        F, D, _ = _sphere_tables(U, n)
        J = np.empty(U.shape[:-1] + (n + 1, n))
        for i in range(n + 1):
            for k in range(n):
                J[..., i, k] = R * D[..., i, k] * _prod_except(F[..., i, :], {k})
        return J

    def hess(U):
        U = np.asarray(U, float)
        F, D, const = _sphere_tables(U, n)
        H = np.empty(U.shape[:-1] + (n + 1, n, n))
        for i in range(n + 1):
            for k in range(n):
                # sin'' = -sin and cos'' = -cos, so pure second factors negate
                if const[i, k]:
                    H[..., i, k, k] = 0.0
                else:
                    H[..., i, k, k] = -R * F[..., i, k] * _prod_except(F[..., i, :], {k})
                for l in range(k + 1, n):
                    mixed = R * D[..., i, k] * D[..., i, l] * _prod_except(F[..., i, :], {k, l})
                    H[..., i, k, l] = mixed
                    H[..., i, l, k] = mixed
        return H

    chart = _default_chart([0.2] * n, [np.pi - 0.2] * n, grid)
    patch = HypersurfacePatch(chart, fv, jac, hess, orientation=1, vectorized=True,
                              name="sphere", params=(("radius", R),))
    return replace(patch, orientation=_outward_orientation(patch, lambda x: x / R))


def _cylinder(n: int, radius: float, grid) -> HypersurfacePatch:
    R = float(radius)
    if R <= 0:
        raise ValueError("cylinder radius must be positive")

    def fv(U):
        U = np.asarray(U, float)
        th = U[..., 0]
        out = np.empty(U.shape[:-1] + (n + 1,))
        out[..., 0] = R * np.cos(th)
        out[..., 1] = R * np.sin(th)
        out[..., 2:] = U[..., 1:]
        return out

    def jac(U):
        U = np.asarray(U, float)
        th = U[..., 0]
        J = np.zeros(U.shape[:-1] + (n + 1, n))
        J[..., 0, 0] = -R * np.sin(th)
        J[..., 1, 0] = R * np.cos(th)
        for a in range(1, n):
            J[..., a + 1, a] = 1.0
        return J

    def hess(U):
        U = np.asarray(U, float)
        th = U[..., 0]
        H = np.zeros(U.shape[:-1] + (n + 1, n, n))
        H[..., 0, 0, 0] = -R * np.cos(th)
        H[..., 1, 0, 0] = -R * np.sin(th)
        return H

    lower = [0.2] + [-1.0] * (n - 1)
    upper = [np.pi] + [1.0] * (n - 1)
    chart = _default_chart(lower, upper, grid)
    patch = HypersurfacePatch(chart, fv, jac, hess, orientation=1, vectorized=True,
                              name="cylinder", params=(("radius", R),))

    def outward(x):
        out = np.zeros_like(x)
        out[:2] = x[:2] / np.linalg.norm(x[:2])
        return out

    return replace(patch, orientation=_outward_orientation(patch, outward))


def _graph(n: int, quad, grid, h=None, dh=None, d2h=None) -> HypersurfacePatch:
    """Graph patch f(u) = (u, h(u)); default height is the quadratic u.Q.u/2."""
    if h is None:
        Q = np.eye(n) if quad is None else np.asarray(quad, dtype=float) * np.eye(n) \
            if np.isscalar(quad) else np.asarray(quad, dtype=float)
        Q = 0.5 * (Q + Q.T)
        if Q.shape != (n, n):
            raise ValueError(f"graph quadratic must be {n}x{n} or scalar")
        h = lambda U: 0.5 * np.einsum("...a,ab,...b->...", U, Q, U)
        dh = lambda U: np.asarray(U, float) @ Q.T
        d2h = lambda U: np.broadcast_to(Q, np.asarray(U).shape[:-1] + (n, n))
        params = (("quad", tuple(map(tuple, Q.tolist()))),)
    else:
        params = (("height", getattr(h, "__name__", "callable")),)

    def fv(U):
        U = np.asarray(U, float)
        return np.concatenate([U, np.asarray(h(U), float)[..., None]], axis=-1)

    def jac(U):
        U = np.asarray(U, float)
        J = np.zeros(U.shape[:-1] + (n + 1, n))
        idx = np.arange(n)
        J[..., idx, idx] = 1.0
        J[..., n, :] = np.asarray(dh(U), float)
        return J

    def hess(U):
        U = np.asarray(U, float)
        H = np.zeros(U.shape[:-1] + (n + 1, n, n))
        H[..., n, :, :] = np.asarray(d2h(U), float)
        return H

    chart = _default_chart([-1.0] * n, [1.0] * n, grid)
    analytic = dh is not None and d2h is not None
    return HypersurfacePatch(chart, fv, jac if analytic else None,
                             hess if analytic else None, orientation=1,
                             vectorized=True, name="graph", params=params)


def _torus(radius_major: float, radius_minor: float, grid) -> HypersurfacePatch:
    Rm, rm = float(radius_major), float(radius_minor)
    if not Rm > rm > 0:
        raise ValueError("torus needs radius_major > radius_minor > 0")

    def fv(U):
        U = np.asarray(U, float)
        th, ph = U[..., 0], U[..., 1]
        w = Rm + rm * np.cos(ph)
        return np.stack([w * np.cos(th), w * np.sin(th), rm * np.sin(ph)], axis=-1)

    def jac(U):
        U = np.asarray(U, float)
        th, ph = U[..., 0], U[..., 1]
        w = Rm + rm * np.cos(ph)
        J = np.empty(U.shape[:-1] + (3, 2))
        J[..., 0, 0] = -w * np.sin(th)
        J[..., 1, 0] = w * np.cos(th)
        J[..., 2, 0] = 0.0
        J[..., 0, 1] = -rm * np.sin(ph) * np.cos(th)
        J[..., 1, 1] = -rm * np.sin(ph) * np.sin(th)
        J[..., 2, 1] = rm * np.cos(ph)
        return J

    def hess(U):
        U = np.asarray(U, float)
        th, ph = U[..., 0], U[..., 1]
        w = Rm + rm * np.cos(ph)
        H = np.zeros(U.shape[:-1] + (3, 2, 2))
        H[..., 0, 0, 0] = -w * np.cos(th)
        H[..., 1, 0, 0] = -w * np.sin(th)
        H[..., 0, 0, 1] = H[..., 0, 1, 0] = rm * np.sin(ph) * np.sin(th)
        H[..., 1, 0, 1] = H[..., 1, 1, 0] = -rm * np.sin(ph) * np.cos(th)
        H[..., 0, 1, 1] = -rm * np.cos(ph) * np.cos(th)
        H[..., 1, 1, 1] = -rm * np.cos(ph) * np.sin(th)
        H[..., 2, 1, 1] = -rm * np.sin(ph)
        return H

    chart = _default_chart([0.2, 0.2], [np.pi, np.pi], grid)
    patch = HypersurfacePatch(chart, fv, jac, hess, orientation=1, vectorized=True,
                              name="torus", params=(("radius_major", Rm), ("radius_minor", rm)))

    def outward(x):
        rho = np.linalg.norm(x[:2])
        c = np.array([Rm * x[0] / rho, Rm * x[1] / rho, 0.0])
        d = x - c
        return d / np.linalg.norm(d)

    return replace(patch, orientation=_outward_orientation(patch, outward))


def _outward_orientation(patch: HypersurfacePatch, outward_fn) -> int:
    """Orientation value making the det-rule normal agree with outward_fn."""
    c = patch.chart.center
    J = jacobian(patch, c)
    nu_out = outward_fn(patch.f(c))
    det = np.linalg.det(np.column_stack([J, nu_out]))
    return 1 if det > 0 else -1


def preset(name: str, n: int = 2, grid=17, **params) -> HypersurfacePatch:
    """Build a named patch: plane, sphere(radius), cylinder(radius),
    graph(quad), torus(radius_major, radius_minor)."""
    if n < 1:
        raise ValueError("need n >= 1")
    if name == "plane":
        return _plane(n, grid)
    if name == "sphere":
        return _sphere(n, params.pop("radius", 1.0), grid)
    if name == "cylinder":
        return _cylinder(n, params.pop("radius", 1.0), grid)
    if name == "graph":
        return _graph(n, params.pop("quad", None), grid, h=params.pop("h", None),
                      dh=params.pop("dh", None), d2h=params.pop("d2h", None))
    if name == "torus":
        if n != 2:
            raise UnknownPreset("torus preset exists only for n = 2")
        return _torus(params.pop("radius_major", 2.0), params.pop("radius_minor", 0.5), grid)
    raise UnknownPreset(f"unknown preset {name!r}; valid: {', '.join(PRESET_NAMES)}")


def available_presets(n: int) -> list:
    return [p for p in PRESET_NAMES if p != "torus" or n == 2]
