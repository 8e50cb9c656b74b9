import numpy as np
import pytest

from bonnetlab import hypersurface as hs
from bonnetlab import reconstruct as rc
from bonnetlab.errors import (DegenerateCloud, GramDriftError, PathOutsideChart,
                              SingularMetric)

from helpers import random_rigid_motion


def sphere_fields(grid=17):
    p = hs.preset("sphere", n=2, grid=grid)
    return p, rc.TensorFieldPair.from_patch(p)


def test_christoffel_euclidean_zero():
    _, fields = sphere_fields()
    flat = rc.TensorFieldPair(fields.chart, lambda U: np.tile(np.eye(2), U.shape[:-1] + (1, 1)),
                              lambda U: np.zeros(U.shape[:-1] + (2, 2)), vectorized=True)
    G = rc.christoffel(flat, np.array([1.0, 1.0]))
    assert np.max(np.abs(G)) < 1e-12


def test_christoffel_sphere_value():
    _, fields = sphere_fields()
    th = 1.0
    G = rc.christoffel(fields, np.array([th, 1.3]))
    assert abs(G[0, 1, 1] + np.sin(th) * np.cos(th)) < 1e-8
    assert abs(G[1, 0, 1] - np.cos(th) / np.sin(th)) < 1e-8


def test_christoffel_symmetry():
    _, fields = sphere_fields()
    rng = np.random.default_rng(0)
    for u in fields.chart.sample(rng, 5):
        G = rc.christoffel(fields, u)
        assert np.max(np.abs(G - np.swapaxes(G, 1, 2))) < 1e-10


def test_singular_metric_raises():
    p = hs.preset("plane", n=2)
    bad = rc.TensorFieldPair(p.chart,
                             lambda U: np.tile(np.diag([1.0, -1.0]), U.shape[:-1] + (1, 1)),
                             lambda U: np.zeros(U.shape[:-1] + (2, 2)), vectorized=True)
    with pytest.raises(SingularMetric):
        rc.christoffel(bad, np.zeros(2))


def test_gauss_codazzi_sphere_data():
    _, fields = sphere_fields()
    rng = np.random.default_rng(1)
    for u in fields.chart.sample(rng, 5):
        gres, cres = rc.gauss_codazzi_residual(fields, u)
        assert gres < 1e-5 and cres < 1e-5


def test_gauss_codazzi_plane_exact():
    p = hs.preset("plane", n=2)
    fields = rc.TensorFieldPair.from_patch(p)
    gres, cres = rc.gauss_codazzi_residual(fields, np.array([0.2, -0.4]))
    assert gres == 0.0 and cres == 0.0


def test_gauss_codazzi_detects_tampering():
    p, fields = sphere_fields()
    tampered = rc.TensorFieldPair(p.chart,
                                  lambda U: hs.classical_first_form(p, U),
                                  lambda U: 1.1 * hs.classical_second_form(p, U),
                                  vectorized=True)
    gres, _ = rc.gauss_codazzi_residual(tampered, np.array([1.3, 1.1]))
    assert gres > 0.1


def test_frame_form_plane_position_only():
    p = hs.preset("plane", n=2)
    fields = rc.TensorFieldPair.from_patch(p)
    thetas = rc.frame_form(fields, np.array([0.1, 0.2]))
    for j, T in enumerate(thetas):
        expected = np.zeros((4, 4))
        expected[j, 3] = 1.0
        assert np.max(np.abs(T - expected)) < 1e-12


def test_frame_form_flatness_on_consistent_data():
    # flatness d_i Theta_j - d_j Theta_i + [Theta_i, Theta_j] = 0 <=> integrability
    _, fields = sphere_fields()
    h = 1e-4
    rng = np.random.default_rng(2)
    for u in fields.chart.sample(rng, 3):
        dT = []
        for a in range(2):
            e = np.zeros(2)
            e[a] = h
            Tp = rc.frame_form(fields, u + e)
            Tm = rc.frame_form(fields, u - e)
            dT.append([(tp - tm) / (2 * h) for tp, tm in zip(Tp, Tm)])
        T = rc.frame_form(fields, u)
        curv = dT[0][1] - dT[1][0] + T[0] @ T[1] - T[1] @ T[0]
        assert np.max(np.abs(curv)) < 1e-4


def test_frame_form_linear_in_second_form():
    p, fields = sphere_fields()
    doubled = rc.TensorFieldPair(p.chart, lambda U: hs.classical_first_form(p, U),
                                 lambda U: 2.0 * hs.classical_second_form(p, U),
                                 vectorized=True)
    u = np.array([1.2, 1.4])
    n = 2
    for T1, T2 in zip(rc.frame_form(fields, u), rc.frame_form(doubled, u)):
        assert np.allclose(T2[n, :n], 2.0 * T1[n, :n])        # second-form row
        assert np.allclose(T2[:n, n], 2.0 * T1[:n, n])        # Weingarten column
        assert np.allclose(T2[:n, :n], T1[:n, :n])            # metric block unchanged
        assert np.allclose(T2[:n, n + 1], T1[:n, n + 1])      # position column


def test_integrate_plane_straight_path():
    p = hs.preset("plane", n=2)
    fields = rc.TensorFieldPair.from_patch(p)
    init = rc.default_initial_frame(fields, np.array([0.0, 0.0]))
    st = rc.integrate_path(fields, [[0.0, 0.0], [0.75, 0.0]], init, steps_per_unit=32)
    assert np.allclose(st.position, [0.75, 0.0, 0.0], atol=1e-12)
    assert np.allclose(st.frame, init.frame, atol=1e-12)


def test_integrate_sphere_loop_closes():
    _, fields = sphere_fields()
    start = np.array([1.0, 1.0])
    init = rc.default_initial_frame(fields, start)
    loop = rc.Polyline.rectangle([1.0, 1.0], [1.9, 2.0])
    st = rc.integrate_path(fields, loop, init, steps_per_unit=512)
    assert np.linalg.norm(st.position - init.position) < 1e-6


def test_integrate_convergence_order():
    p, fields = sphere_fields()
    a = np.array([0.7, 0.6])
    b = np.array([2.3, 2.1])
    init = rc.frame_from_patch(p, a)
    errs = []
    for spu in (4, 8, 16):
        st = rc.integrate_path(fields, [a, b], init.copy(), steps_per_unit=spu)
        errs.append(np.linalg.norm(st.position - p.f(b)))
    orders = [np.log2(errs[i] / errs[i + 1]) for i in range(len(errs) - 1)]
    for o in orders:
        assert 3.5 <= o <= 4.5, orders


def test_integrate_tracks_ground_truth():
    p, fields = sphere_fields()
    a = np.array([0.9, 0.8])
    b = np.array([2.0, 1.7])
    st = rc.integrate_path(fields, [a, b], rc.frame_from_patch(p, a), steps_per_unit=256)
    assert np.linalg.norm(st.position - p.f(b)) < 1e-8
    assert st.gram_residual(fields) < 1e-6


def test_integrate_path_exits_chart():
    _, fields = sphere_fields()
    init = rc.default_initial_frame(fields, np.array([1.0, 1.0]))
    with pytest.raises(PathOutsideChart):
        rc.integrate_path(fields, [[1.0, 1.0], [5.0, 1.0]], init, steps_per_unit=16)


def test_integrate_rejects_incompatible_start():
    _, fields = sphere_fields()
    wrong = rc.default_initial_frame(fields, np.array([0.4, 0.4]))
    wrong = rc.FrameState(wrong.matrix, np.array([1.5, 1.5]))  # frame from elsewhere
    with pytest.raises(GramDriftError):
        rc.integrate_path(fields, [[1.5, 1.5], [2.0, 1.5]], wrong, steps_per_unit=16)


def test_default_initial_frame_gram():
    _, fields = sphere_fields()
    u0 = np.array([1.1, 0.9])
    st = rc.default_initial_frame(fields, u0)
    assert st.gram_residual(fields) < 1e-12
    assert np.allclose(st.position, 0)
    assert np.allclose(st.matrix[:3, 2], [0, 0, 1.0])  # normal on the last axis
    assert np.linalg.det(st.frame) > 0


def test_reconstruct_sphere_grid_small():
    p, fields = sphere_fields(grid=17)
    res = rc.reconstruct_grid(fields, steps_per_unit=128)
    truth = p.f(p.chart.node_grid().reshape(-1, 2))
    _, rms = rc.align_rigid(res.positions.reshape(-1, 3), truth)
    assert rms < 1e-6
    assert res.path_independence < 1e-8
    assert res.verification["II_max_err"] < 1e-2  # 17x17 differencing floor
    assert res.holonomy_log[0]["deviation"] < 1e-6


@pytest.mark.parametrize("name", ["cylinder", "graph"])
def test_reconstruct_round_trip_other_presets(name):
    p = hs.preset(name, n=2, grid=17)
    fields = rc.TensorFieldPair.from_patch(p)
    res = rc.reconstruct_grid(fields, steps_per_unit=128)
    truth = p.f(p.chart.node_grid().reshape(-1, 2))
    _, rms = rc.align_rigid(res.positions.reshape(-1, 3), truth)
    assert rms < 1e-4 * p.chart.diameter
    assert res.path_independence < 1e-6


def test_reconstruct_n1_circle():
    p = hs.preset("sphere", n=1, grid=33)
    fields = rc.TensorFieldPair.from_patch(p)
    # the curve is congruent to the source arc only with matching handedness
    res = rc.reconstruct_grid(fields, steps_per_unit=256, orientation=p.orientation)
    truth = p.f(p.chart.node_grid().reshape(-1, 1))
    _, rms = rc.align_rigid(res.positions.reshape(-1, 2), truth)
    assert rms < 1e-8


def test_reconstruct_orientation_mirror():
    # opposite handedness yields the mirror curve: same shape, improper match
    p = hs.preset("sphere", n=1, grid=17)
    fields = rc.TensorFieldPair.from_patch(p)
    res = rc.reconstruct_grid(fields, steps_per_unit=128, orientation=-p.orientation)
    truth = p.f(p.chart.node_grid().reshape(-1, 1))
    _, rms = rc.align_rigid(res.positions.reshape(-1, 2), truth)
    assert rms > 1e-3
    _, rms_mirror = rc.align_rigid(res.positions.reshape(-1, 2) * [1.0, -1.0], truth)
    assert rms_mirror < 1e-8


def test_holonomy_plane_any_loop():
    p = hs.preset("plane", n=2)
    fields = rc.TensorFieldPair.from_patch(p)
    loop = rc.Polyline.rectangle([-0.8, -0.8], [0.8, 0.8])
    assert rc.holonomy_loop(fields, loop, steps_per_unit=256) < 1e-10


def test_holonomy_zero_area_loop():
    p = hs.preset("plane", n=2)
    fields = rc.TensorFieldPair.from_patch(p)
    out_and_back = rc.Polyline([[-0.5, -0.5], [0.5, -0.5], [-0.5, -0.5]])
    assert rc.holonomy_loop(fields, out_and_back, steps_per_unit=512) < 1e-12


def test_holonomy_consistent_sphere_loop():
    _, fields = sphere_fields()
    loop = rc.Polyline.rectangle([1.05, 1.05], [2.05, 2.05])
    assert rc.holonomy_loop(fields, loop, steps_per_unit=512) < 1e-6


def test_holonomy_detects_codazzi_violation():
    p, fields = sphere_fields()
    center = np.array([1.55, 1.55])

    def bumped_II(U):
        U = np.asarray(U, float)
        II = hs.classical_second_form(p, U)
        bump = 0.1 * np.exp(-np.sum((U - center) ** 2, axis=-1) / 0.18)
        pert = np.zeros_like(II)
        pert[..., 0, 0] = bump
        return II + pert

    bad = rc.TensorFieldPair(p.chart, lambda U: hs.classical_first_form(p, U),
                             bumped_II, vectorized=True)
    loop = rc.Polyline.rectangle([1.05, 1.05], [2.05, 2.05])
    assert rc.holonomy_loop(bad, loop, steps_per_unit=512) > 1e-3


def test_holonomy_requires_closed_loop():
    _, fields = sphere_fields()
    with pytest.raises(ValueError):
        rc.holonomy_loop(fields, [[1.0, 1.0], [2.0, 1.0]], steps_per_unit=16)


def test_align_rigid_self():
    rng = np.random.default_rng(3)
    A = rng.normal(size=(12, 3))
    motion, rms = rc.align_rigid(A, A)
    assert rms < 1e-12
    assert np.allclose(motion.R, np.eye(3), atol=1e-12)
    assert np.allclose(motion.t, 0, atol=1e-12)


def test_align_rigid_recovers_motion():
    rng = np.random.default_rng(4)
    A = rng.normal(size=(20, 3))
    phi = random_rigid_motion(3, rng)
    B = phi(A)
    motion, rms = rc.align_rigid(A, B)
    assert rms < 1e-10
    assert np.allclose(motion.R, phi.R, atol=1e-10)
    assert np.allclose(motion.t, phi.t, atol=1e-10)


def test_align_rigid_excludes_reflections():
    A = np.array([[0.0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1]])
    B = A @ np.diag([1.0, 1.0, -1.0])
    _, rms = rc.align_rigid(A, B)
    assert rms > 0.1


def test_align_rigid_degenerate_cloud():
    line = np.outer(np.arange(5, dtype=float), [1.0, 1.0, 1.0])
    with pytest.raises(DegenerateCloud):
        rc.align_rigid(line, line)


def test_align_rigid_planar_cloud_ok():
    # coplanar points are fine: the determinant correction fixes the normal
    rng = np.random.default_rng(5)
    A = np.column_stack([rng.normal(size=(10, 2)), np.zeros(10)])
    phi = random_rigid_motion(3, rng)
    _, rms = rc.align_rigid(A, phi(A))
    assert rms < 1e-10


def test_fields_from_grids_interpolation():
    p, fields = sphere_fields(grid=33)
    nodes = p.chart.node_grid()
    g_grid = hs.classical_first_form(p, nodes.reshape(-1, 2)).reshape(33, 33, 2, 2)
    II_grid = hs.classical_second_form(p, nodes.reshape(-1, 2)).reshape(33, 33, 2, 2)
    gridded = rc.TensorFieldPair.from_grids(p.chart, g_grid, II_grid)
    rng = np.random.default_rng(6)
    for u in p.chart.sample(rng, 10):
        assert np.max(np.abs(gridded.g(u) - fields.g(u))) < 5e-3
        assert np.max(np.abs(gridded.II(u) - fields.II(u))) < 5e-3
    # exact at the nodes
    u = nodes[7, 9]
    assert np.max(np.abs(gridded.g(u) - fields.g(u))) < 1e-12


def test_reconstruct_from_gridded_fields():
    p, _ = sphere_fields(grid=33)
    nodes = p.chart.node_grid()
    g_grid = hs.classical_first_form(p, nodes.reshape(-1, 2)).reshape(33, 33, 2, 2)
    II_grid = hs.classical_second_form(p, nodes.reshape(-1, 2)).reshape(33, 33, 2, 2)
    gridded = rc.TensorFieldPair.from_grids(p.chart, g_grid, II_grid)
    res = rc.reconstruct_grid(gridded, steps_per_unit=64)
    truth = p.f(nodes.reshape(-1, 2))
    _, rms = rc.align_rigid(res.positions.reshape(-1, 3), truth)
    # bilinear interpolation of the data limits the accuracy, not the integrator
    assert rms < 5e-3
