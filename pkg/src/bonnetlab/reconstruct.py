"""Numerical Bonnet engine: from (metric, second form) data to an immersion.

The moving frame [e_1 .. e_n, nu] and the position are carried in one
homogeneous (n+2) x (n+2) matrix and advanced by classical RK4 on the
Gauss-Weingarten system along axis-aligned paths.  Flatness of that system
is equivalent to the Gauss-Codazzi equations, so path independence and loop
holonomy double as integrability diagnostics.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (DegenerateCloud, GramDriftError, PathOutsideChart,
                     SingularMetric)
from .hypersurface import Chart, HypersurfacePatch, classical_first_form, \
    classical_second_form
from .killing import RigidMotion
from .linalg import polar_fit

CALLABLE_FD_STEP = 1e-5
CALLABLE_FD_STEP2 = 1e-4
REORTH_EVERY = 16
GRAM_DRIFT_LIMIT = 1e-3
GRAM_START_TOL = 1e-6


class TensorFieldPair:
    """Metric and second-form fields over a chart.

    Backed either by callables (batched if ``vectorized``) or by per-node
    grids with multilinear interpolation.
    """

    def __init__(self, chart: Chart, g_fn, II_fn, vectorized: bool = False,
                 fd_steps=None, source: str = "callable"):
        self.chart = chart
        self._g = g_fn
        self._II = II_fn
        self.vectorized = vectorized
        self.source = source
        if fd_steps is None:
            fd_steps = np.full(chart.n, CALLABLE_FD_STEP)
        self.fd_steps = np.asarray(fd_steps, dtype=float)

    @property
    def n(self) -> int:
        return self.chart.n

    def _eval(self, fn, u):
        U = np.asarray(u, dtype=float)
        single = U.ndim == 1
        if single:
            U = U[None, :]
        if self.vectorized:
            out = np.asarray(fn(U), dtype=float)
        else:
            out = np.stack([np.asarray(fn(p), dtype=float) for p in U])
        return out[0] if single else out

    def g(self, u) -> np.ndarray:
        return self._eval(self._g, u)

    def II(self, u) -> np.ndarray:
        return self._eval(self._II, u)

    @staticmethod
    def from_patch(patch: HypersurfacePatch, source: str = "classical") -> "TensorFieldPair":
        """Sample the classical (or algebroid-derived) forms of a patch."""
        if source == "classical":
            return TensorFieldPair(
                patch.chart,
                lambda U: classical_first_form(patch, U),
                lambda U: classical_second_form(patch, U),
                vectorized=True, source="classical")
        if source == "omega":
            from .forms import DNU_STEP, omega_forms

            def g_fn(u):
                return omega_forms(patch, u).g_omega

            def II_fn(u):
                return omega_forms(patch, u).II_omega

            # inset so the d(nu) stencil of the derived forms stays inside
            margin = 4.0 * DNU_STEP
            chart = Chart(patch.chart.lower + margin, patch.chart.upper - margin,
                          patch.chart.grid)
            return TensorFieldPair(chart, g_fn, II_fn, vectorized=False, source="omega")
        raise ValueError("source must be 'classical' or 'omega'")

    @staticmethod
    def from_grids(chart: Chart, g_grid: np.ndarray, II_grid: np.ndarray) -> "TensorFieldPair":
        """Gridded fields, shape grid + (n, n), interpolated multilinearly."""
        n = chart.n
        g_grid = np.asarray(g_grid, dtype=float)
        II_grid = np.asarray(II_grid, dtype=float)
        want = tuple(chart.grid) + (n, n)
        if g_grid.shape != want or II_grid.shape != want:
            raise ValueError(f"grids must have shape {want}")
        if np.max(np.abs(II_grid - np.swapaxes(II_grid, -1, -2))) > 1e-10:
            raise ValueError("second-form grid is not symmetric to 1e-10")
        try:
            np.linalg.cholesky(g_grid.reshape(-1, n, n))
        except np.linalg.LinAlgError:
            raise SingularMetric("metric grid is not positive definite at every node")
        interp_g = _MultilinearInterpolator(chart, g_grid)
        interp_II = _MultilinearInterpolator(chart, II_grid)
        return TensorFieldPair(chart, interp_g, interp_II, vectorized=True,
                               fd_steps=chart.spacing(), source="grid")


class _MultilinearInterpolator:
    def __init__(self, chart: Chart, values: np.ndarray):
        self.lower = chart.lower
        self.spacing = chart.spacing()
        self.shape = chart.grid
        self.values = values

    def __call__(self, U: np.ndarray) -> np.ndarray:
        U = np.asarray(U, dtype=float)
        n = self.lower.size
        t = (U - self.lower) / self.spacing
        idx = np.clip(np.floor(t).astype(int), 0, np.asarray(self.shape) - 2)
        frac = t - idx
        out = 0.0
        for corner in range(2 ** n):
            bits = [(corner >> a) & 1 for a in range(n)]
            w = np.ones(U.shape[0])
            ind = []
            for a, b in enumerate(bits):
                w = w * (frac[:, a] if b else 1.0 - frac[:, a])
                ind.append(idx[:, a] + b)
            out = out + w[:, None, None] * self.values[tuple(ind)]
        return out


# -- curvature ------------------------------------------------------------------


def _dg_many(fields: TensorFieldPair, U: np.ndarray, steps=None) -> np.ndarray:
    """Metric first derivatives, shape (m, axis, n, n).

    Transport always differences at a small step so that the Christoffel
    symbols match the field actually being integrated (gridded fields are
    only piecewise smooth); diagnostics pass grid-spacing steps instead.
    """
    n = fields.n
    m = U.shape[0]
    if steps is None:
        steps = np.full(n, CALLABLE_FD_STEP)
    pts = []
    for a in range(n):
        h = steps[a]
        Up = U.copy()
        Um = U.copy()
        Up[:, a] += h
        Um[:, a] -= h
        pts.extend([Up, Um])
    vals = fields.g(np.concatenate(pts, axis=0)).reshape(n, 2, m, n, n)
    steps = np.asarray(steps).reshape(n, 1, 1, 1)
    return np.moveaxis((vals[:, 0] - vals[:, 1]) / (2.0 * steps), 0, 1)


def christoffel_many(fields: TensorFieldPair, U: np.ndarray, steps=None):
    """Levi-Civita symbols Gamma[k, i, j] plus (g, ginv, II) at each point."""
    U = np.asarray(U, dtype=float)
    g0 = fields.g(U)
    try:
        np.linalg.cholesky(g0)
    except np.linalg.LinAlgError:
        raise SingularMetric("metric not positive definite along the evaluation set")
    ginv = np.linalg.inv(g0)
    dg = _dg_many(fields, U, steps)
    # Gamma^k_ij = 1/2 g^{kl} (d_i g_jl + d_j g_il - d_l g_ij)
    term = (np.einsum("mijl->mijl", dg[:, :, :, :])
            + np.einsum("mjil->mijl", dg)
            - np.einsum("mlij->mijl", dg))
    gamma = 0.5 * np.einsum("mkl,mijl->mkij", ginv, term)
    II0 = fields.II(U)
    return gamma, g0, ginv, II0


def christoffel(fields: TensorFieldPair, u) -> np.ndarray:
    """Christoffel symbols Gamma[k, i, j] of the metric at one point."""
    gamma, _, _, _ = christoffel_many(fields, np.asarray(u, dtype=float)[None, :])
    return gamma[0]


def riemann_lowered(fields: TensorFieldPair, u) -> np.ndarray:
    """Fully lowered curvature R[i, j, k, l]; R_1212 > 0 on a round sphere."""
    u = np.asarray(u, dtype=float)
    n = fields.n
    steps = np.maximum(fields.fd_steps, CALLABLE_FD_STEP2)
    dGamma = np.empty((n, n, n, n))  # axis a, then Gamma indices
    for a in range(n):
        e = np.zeros(n)
        e[a] = steps[a]
        dGamma[a] = (christoffel(fields, u + e) - christoffel(fields, u - e)) / (2.0 * steps[a])
    gamma, g0, _, _ = christoffel_many(fields, u[None, :])
    gamma = gamma[0]
    g0 = g0[0]
    # R^m_jkl = d_k Gamma^m_lj - d_l Gamma^m_kj + Gamma^m_kp Gamma^p_lj - Gamma^m_lp Gamma^p_kj
    upper = (np.einsum("kmlj->mjkl", dGamma)
             - np.einsum("lmkj->mjkl", dGamma)
             + np.einsum("mkp,plj->mjkl", gamma, gamma)
             - np.einsum("mlp,pkj->mjkl", gamma, gamma))
    return np.einsum("im,mjkl->ijkl", g0, upper)


def gauss_codazzi_residual(fields: TensorFieldPair, u):
    """(gauss_res, codazzi_res) of the data at one point."""
    u = np.asarray(u, dtype=float)
    n = fields.n
    R = riemann_lowered(fields, u)
    gamma, _, _, II = christoffel_many(fields, u[None, :])
    gamma, II = gamma[0], II[0]
    wedge = np.einsum("ik,jl->ijkl", II, II) - np.einsum("il,jk->ijkl", II, II)
    gauss_res = float(np.max(np.abs(R - wedge)))

    steps = np.maximum(fields.fd_steps, CALLABLE_FD_STEP2)
    dII = np.empty((n, n, n))
    for a in range(n):
        e = np.zeros(n)
        e[a] = steps[a]
        dII[a] = (fields.II(u + e) - fields.II(u - e)) / (2.0 * steps[a])
    # covariant derivative: nabla_i II_jk = d_i II_jk - Gamma^m_ij II_mk - Gamma^m_ik II_jm
    nabla = (dII
             - np.einsum("mij,mk->ijk", gamma, II)
             - np.einsum("mik,jm->ijk", gamma, II))
    codazzi_res = float(np.max(np.abs(nabla - np.swapaxes(nabla, 0, 1))))
    return gauss_res, codazzi_res


# -- frame transport -------------------------------------------------------------


def _theta_dir_many(fields: TensorFieldPair, U: np.ndarray, direction: np.ndarray) -> np.ndarray:
    """Frame-form contraction Theta(u) . direction at each point, (m, n+2, n+2)."""
    n = fields.n
    gamma, _, ginv, II = christoffel_many(fields, U)
    m = U.shape[0]
    theta = np.zeros((m, n + 2, n + 2))
    theta[:, :n, :n] = np.einsum("mkij,j->mki", gamma, direction)
    theta[:, n, :n] = II @ direction
    theta[:, :n, n] = -np.einsum("mkl,mlj,j->mk", ginv, II, direction)
    theta[:, :n, n + 1] = direction
    return theta


def frame_form(fields: TensorFieldPair, u) -> list:
    """The n coefficient matrices Theta_j of the Gauss-Weingarten system at u."""
    u = np.asarray(u, dtype=float)
    n = fields.n
    out = []
    for j in range(n):
        e = np.zeros(n)
        e[j] = 1.0
        out.append(_theta_dir_many(fields, u[None, :], e)[0])
    return out


@dataclass
class FrameState:
    """Homogeneous frame [[E, p], [0, 1]] at a chart point."""

    matrix: np.ndarray
    u: np.ndarray

    @property
    def d(self) -> int:
        return self.matrix.shape[0] - 1

    @property
    def frame(self) -> np.ndarray:
        return self.matrix[:self.d, :self.d]

    @property
    def position(self) -> np.ndarray:
        return self.matrix[:self.d, self.d]

    def gram_residual(self, fields: TensorFieldPair) -> float:
        E = self.frame
        target = _target_gram(fields, self.u)
        return float(np.max(np.abs(E.T @ E - target)))

    def copy(self) -> "FrameState":
        return FrameState(self.matrix.copy(), self.u.copy())


def _target_gram(fields: TensorFieldPair, u) -> np.ndarray:
    d = fields.n + 1
    G = np.eye(d)
    G[:fields.n, :fields.n] = fields.g(u)
    return G


def default_initial_frame(fields: TensorFieldPair, u0, orientation: int = 1) -> FrameState:
    """Gram-compatible frame at the origin with the normal on the last axis.

    ``orientation`` fixes the handedness det[e_1 .. e_n, nu]; the second-form
    data determines the shape only together with this sign.
    """
    u0 = np.asarray(u0, dtype=float)
    n = fields.n
    d = n + 1
    L = np.linalg.cholesky(fields.g(u0))
    M = np.eye(d + 1)
    M[:n, :n] = L.T
    M[n, n] = 1.0 if orientation >= 0 else -1.0
    return FrameState(M, u0)


def frame_from_patch(patch: HypersurfacePatch, u0) -> FrameState:
    """The true frame of a patch, for tracking ground truth in tests."""
    from .hypersurface import gauss_map, jacobian

    u0 = np.asarray(u0, dtype=float)
    d = patch.n + 1
    M = np.eye(d + 1)
    M[:d, :patch.n] = jacobian(patch, u0)
    M[:d, patch.n] = gauss_map(patch, u0)
    M[:d, d] = patch.f(u0)
    return FrameState(M, u0)


class Polyline:
    """Piecewise-linear path through chart points."""

    def __init__(self, points):
        self.points = np.atleast_2d(np.asarray(points, dtype=float))
        if self.points.shape[0] < 2:
            raise ValueError("a path needs at least two vertices")
        self.seg_lengths = np.linalg.norm(np.diff(self.points, axis=0), axis=1)

    @property
    def length(self) -> float:
        return float(self.seg_lengths.sum())

    @property
    def is_closed(self) -> bool:
        return bool(np.allclose(self.points[0], self.points[-1]))

    @staticmethod
    def rectangle(lo, hi) -> "Polyline":
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        return Polyline([lo, [hi[0], lo[1]], hi, [lo[0], hi[1]], lo])


class _Integrator:
    """Carries the frame along segments with periodic re-orthonormalization."""

    def __init__(self, fields: TensorFieldPair, state: FrameState):
        self.fields = fields
        self.F = state.matrix.copy()
        self.u = state.u.copy()
        self.count = 0

    def run_segment(self, a, b, steps: int) -> None:
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        if np.array_equal(a, b):
            return
        ts = np.linspace(0.0, 1.0, 2 * steps + 1)
        P = a[None, :] + ts[:, None] * (b - a)[None, :]
        theta = _theta_dir_many(self.fields, P, b - a)
        h = 1.0 / steps
        F = self.F
        for k in range(steps):
            T0 = theta[2 * k]
            Tm = theta[2 * k + 1]
            T1 = theta[2 * k + 2]
            k1 = F @ T0
            k2 = (F + 0.5 * h * k1) @ Tm
            k3 = (F + 0.5 * h * k2) @ Tm
            k4 = (F + h * k3) @ T1
            F = F + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            self.count += 1
            if self.count % REORTH_EVERY == 0:
                F = self._reorthonormalize(F, P[2 * k + 2])
        self.F = F
        self.u = b

    def _reorthonormalize(self, F: np.ndarray, u: np.ndarray) -> np.ndarray:
        d = self.fields.n + 1
        target = _target_gram(self.fields, u)
        E = F[:d, :d]
        drift = float(np.max(np.abs(E.T @ E - target)))
        if drift > GRAM_DRIFT_LIMIT:
            raise GramDriftError(
                f"Gram drift {drift:.3e} before correction; reduce the step size")
        F = F.copy()
        F[:d, :d] = polar_fit(E, target)
        return F

    def state(self) -> FrameState:
        return FrameState(self.F, self.u)


def _segment_steps(length: float, steps_per_unit: float) -> int:
    return max(1, math.ceil(length * steps_per_unit))


def integrate_path(fields: TensorFieldPair, path, initial: FrameState,
                   steps_per_unit: float = 512) -> FrameState:
    """Transport the initial frame along the path by RK4 on the frame ODE.

    ``path`` is a Polyline or an array of vertices; ``steps_per_unit`` fixes
    the RK4 resolution per unit of chart length.
    """
    if not isinstance(path, Polyline):
        path = Polyline(path)
    for p in path.points:
        if not fields.chart.contains(p):
            raise PathOutsideChart(f"path vertex {p} outside chart box")
    if np.linalg.norm(initial.u - path.points[0]) > 1e-12:
        raise ValueError("initial frame is anchored away from the path start")
    start_drift = initial.gram_residual(fields)
    if start_drift > GRAM_START_TOL:
        raise GramDriftError(f"initial frame Gram residual {start_drift:.3e}")
    walker = _Integrator(fields, initial)
    for a, b, L in zip(path.points[:-1], path.points[1:], path.seg_lengths):
        walker.run_segment(a, b, _segment_steps(L, steps_per_unit))
    return walker.state()


def holonomy_loop(fields: TensorFieldPair, loop, steps_per_unit: float = 512,
                  initial: FrameState = None) -> float:
    """Frobenius deviation of the frame after one circuit of a closed loop."""
    if not isinstance(loop, Polyline):
        loop = Polyline(loop)
    if not loop.is_closed:
        raise ValueError("holonomy needs a closed loop")
    if initial is None:
        initial = default_initial_frame(fields, loop.points[0])
    final = integrate_path(fields, loop, initial, steps_per_unit)
    return float(np.linalg.norm(final.matrix - initial.matrix))


# -- grid reconstruction ---------------------------------------------------------


@dataclass
class ReconstructionResult:
    """Grid of reconstructed positions plus integrability diagnostics."""

    positions: np.ndarray
    chart: Chart
    path_independence: float
    holonomy_log: list
    verification: dict
    steps_per_unit: float
    meta: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "grid": list(self.chart.grid),
            "steps_per_unit": self.steps_per_unit,
            "path_independence_residual": self.path_independence,
            "holonomy": self.holonomy_log,
            "verification": self.verification,
            **self.meta,
        }


def _node_point(chart: Chart, idx) -> np.ndarray:
    return chart.lower + np.asarray(idx, dtype=float) * chart.spacing()


def _staircase_to(fields, idx0, target, F0: FrameState, order, steps_per_unit) -> FrameState:
    """Integrate from node idx0 to node target walking one axis at a time."""
    chart = fields.chart
    walker = _Integrator(fields, F0)
    cur = list(idx0)
    for axis in order:
        lo = _node_point(chart, cur)
        cur[axis] = target[axis]
        hi = _node_point(chart, cur)
        L = float(np.linalg.norm(hi - lo))
        if L > 0:
            walker.run_segment(lo, hi, _segment_steps(L, steps_per_unit))
    return walker.state()


def reconstruct_grid(fields: TensorFieldPair, u0=None, initial: FrameState = None,
                     steps_per_unit: float = 512, pi_nodes: int = 8, seed: int = 0,
                     with_holonomy: bool = True, orientation: int = 1) -> ReconstructionResult:
    """Reconstruct positions at every grid node from (g, II) data.

    Frames propagate along axis-ordered staircase paths that reuse shared
    prefixes; a node sample is re-integrated with the reversed axis order to
    measure path independence, and the classical forms recovered from the
    grid by finite differences are compared against the inputs.
    """
    chart = fields.chart
    n = chart.n
    shape = tuple(chart.grid)
    spacing = chart.spacing()
    if u0 is None:
        u0 = chart.center
    idx0 = tuple(int(round(t)) for t in (np.asarray(u0, dtype=float) - chart.lower) / spacing)
    idx0 = tuple(min(max(i, 0), s - 1) for i, s in zip(idx0, shape))
    start = _node_point(chart, idx0)
    if initial is None:
        initial = default_initial_frame(fields, start, orientation)
    elif np.linalg.norm(initial.u - start) > 1e-9:
        raise ValueError("initial frame must sit at the grid node nearest u0")
    if initial.gram_residual(fields) > GRAM_START_TOL:
        raise GramDriftError("initial frame incompatible with the metric at u0")

    d = n + 1
    frames = {idx0: initial.matrix.copy()}
    level = [idx0]
    for axis in range(n):
        new_level = []
        for idx in level:
            base = frames[idx]
            new_level.append(idx)
            for direction in (-1, +1):
                walker = _Integrator(fields, FrameState(base, _node_point(chart, idx)))
                cur = list(idx)
                nxt = cur[axis] + direction
                while 0 <= nxt < shape[axis]:
                    a = _node_point(chart, cur)
                    cur[axis] = nxt
                    b = _node_point(chart, cur)
                    walker.run_segment(a, b, _segment_steps(float(spacing[axis]), steps_per_unit))
                    frames[tuple(cur)] = walker.F.copy()
                    new_level.append(tuple(cur))
                    nxt += direction
        level = new_level

    positions = np.empty(shape + (d,))
    for idx in np.ndindex(shape):
        positions[idx] = frames[idx][:d, d]

    # reversed-axis-order re-integration at corners plus random nodes
    corners = list(np.ndindex(*(2,) * n))
    sample = [tuple((s - 1) * b for s, b in zip(shape, bits)) for bits in corners]
    rng = np.random.default_rng(seed)
    while len(sample) < pi_nodes:
        sample.append(tuple(int(rng.integers(0, s)) for s in shape))
    order_rev = list(range(n))[::-1]
    pi_res = 0.0
    for idx in sample:
        st = _staircase_to(fields, idx0, idx, FrameState(initial.matrix.copy(), start),
                           order_rev, steps_per_unit)
        pi_res = max(pi_res, float(np.linalg.norm(st.position - positions[idx])))

    holonomy_log = []
    if with_holonomy and n >= 2:
        lo01 = [chart.lower[0], chart.lower[1]]
        hi01 = [chart.upper[0], chart.upper[1]]
        rect = Polyline.rectangle(lo01, hi01)
        pts = rect.points
        if n > 2:
            rest = start[2:]
            pts = np.column_stack([pts, np.tile(rest, (pts.shape[0], 1))])
        dev = holonomy_loop(fields, Polyline(pts), steps_per_unit)
        holonomy_log.append({"loop": "chart boundary (axes 0,1)", "deviation": dev})

    orientation = 1 if np.linalg.det(initial.frame) > 0 else -1
    verification = _verify_forms(fields, positions, orientation)
    return ReconstructionResult(positions=positions, chart=chart,
                                path_independence=pi_res, holonomy_log=holonomy_log,
                                verification=verification, steps_per_unit=steps_per_unit,
                                meta={"start_node": list(idx0)})


def _verify_forms(fields: TensorFieldPair, positions: np.ndarray, orientation: int) -> dict:
    """Recover g, II from the position grid by differencing and compare to inputs."""
    from .hypersurface import _normal_from_columns

    chart = fields.chart
    n = chart.n
    shape = tuple(chart.grid)
    spacing = chart.spacing()
    interior = [idx for idx in np.ndindex(shape)
                if all(1 <= i <= s - 2 for i, s in zip(idx, shape))]
    if len(interior) > 256:
        rng = np.random.default_rng(1)
        pick = rng.choice(len(interior), size=256, replace=False)
        interior = [interior[i] for i in pick]
    if not interior:
        return {"g_max_err": float("nan"), "II_max_err": float("nan"), "samples": 0}

    g_err = 0.0
    II_err = 0.0
    for idx in interior:
        u = _node_point(chart, idx)
        J = np.empty((n + 1, n))
        for a in range(n):
            up = list(idx)
            um = list(idx)
            up[a] += 1
            um[a] -= 1
            J[:, a] = (positions[tuple(up)] - positions[tuple(um)]) / (2.0 * spacing[a])
        H = np.empty((n + 1, n, n))
        for a in range(n):
            up = list(idx)
            um = list(idx)
            up[a] += 1
            um[a] -= 1
            H[:, a, a] = (positions[tuple(up)] - 2.0 * positions[idx]
                          + positions[tuple(um)]) / spacing[a] ** 2
            for b in range(a + 1, n):
                pp = list(idx)
                pm = list(idx)
                mp = list(idx)
                mm = list(idx)
                pp[a] += 1
                pp[b] += 1
                pm[a] += 1
                pm[b] -= 1
                mp[a] -= 1
                mp[b] += 1
                mm[a] -= 1
                mm[b] -= 1
                mixed = (positions[tuple(pp)] - positions[tuple(pm)]
                         - positions[tuple(mp)] + positions[tuple(mm)]) \
                    / (4.0 * spacing[a] * spacing[b])
                H[:, a, b] = mixed
                H[:, b, a] = mixed
        nu = _normal_from_columns(J[None], orientation)[0]
        g_rec = J.T @ J
        II_rec = np.einsum("iab,i->ab", H, nu)
        g_err = max(g_err, float(np.max(np.abs(g_rec - fields.g(u)))))
        II_err = max(II_err, float(np.max(np.abs(II_rec - fields.II(u)))))
    return {"g_max_err": g_err, "II_max_err": II_err, "samples": len(interior)}


# -- rigid alignment -------------------------------------------------------------


def align_rigid(cloud_a: np.ndarray, cloud_b: np.ndarray):
    """Proper rigid motion minimizing RMS distance from cloud_a onto cloud_b.

    Returns (motion, rms).  Cross-covariance SVD with determinant correction;
    clouds whose covariance drops two ranks below full are rejected.
    """
    A = np.asarray(cloud_a, dtype=float)
    B = np.asarray(cloud_b, dtype=float)
    if A.shape != B.shape or A.ndim != 2:
        raise ValueError("clouds must be equal-shape (m, d) arrays")
    m, d = A.shape
    if m < d:
        raise ValueError(f"need at least {d} points")
    ca = A.mean(axis=0)
    cb = B.mean(axis=0)
    H = (A - ca).T @ (B - cb)
    U, s, Vt = np.linalg.svd(H)
    if s[0] == 0.0 or (d >= 2 and s[d - 2] <= 1e-12 * s[0]):
        raise DegenerateCloud("point cloud spread is rank deficient")
    D = np.eye(d)
    D[-1, -1] = np.sign(np.linalg.det(Vt.T @ U.T))
    R = Vt.T @ D @ U.T
    t = cb - R @ ca
    rms = float(np.sqrt(np.mean(np.sum((A @ R.T + t - B) ** 2, axis=1))))
    return RigidMotion(R, t), rms
