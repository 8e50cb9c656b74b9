import numpy as np
import pytest

from bonnetlab import algebroid as ag
from bonnetlab import killing as kf
from bonnetlab.hypersurface import preset

from helpers import fd_vector_field_bracket


@pytest.mark.parametrize("n", [1, 2, 3])
def test_fibre_ranks(n):
    p = preset("sphere", n=n)
    fib = ag.fibre(p, p.chart.center)
    assert fib.rank == n * (n + 3) // 2
    assert fib.kernel_dim == n * (n + 1) // 2


def test_fibre_basis_tangency():
    p = preset("torus", n=2)
    rng = np.random.default_rng(0)
    for u in p.chart.sample(rng, 5):
        fib = ag.fibre(p, u)
        for k in range(fib.rank):
            val = kf.eval_coeffs(fib.basis[:, k], fib.x)
            assert abs(val @ fib.normal) < 1e-10


def test_kernel_fields_vanish():
    p = preset("sphere", n=2)
    fib = ag.fibre(p, np.array([1.0, 1.5]))
    for k in range(fib.kernel_dim):
        val = kf.eval_coeffs(fib.kernel_basis[:, k], fib.x)
        assert np.linalg.norm(val) < 1e-10


def test_anchor_of_kernel_is_zero():
    p = preset("graph", n=2)
    fib = ag.fibre(p, np.array([0.2, -0.1]))
    for k in range(fib.kernel_dim):
        assert np.linalg.norm(ag.anchor(fib, fib.kernel_basis[:, k])) < 1e-10


def test_anchor_rejects_non_tangent_vector():
    from bonnetlab.errors import NotTangent

    p = preset("sphere", n=2)
    u = np.array([1.2, 1.0])
    fib = ag.fibre(p, u)
    normal_dir = kf.constraint_row(fib.x, fib.normal)
    with pytest.raises(NotTangent):
        ag.anchor(fib, normal_dir / np.linalg.norm(normal_dir))


def test_anchor_plane_constant_field():
    p = preset("plane", n=2)
    fib = ag.fibre(p, np.array([0.4, 0.7]))
    a = np.zeros(6)
    a[3] = 1.0  # translation along e1 in the canonical ordering
    assert np.allclose(ag.anchor(fib, a), [1.0, 0.0])


def test_anchor_surjective_on_presets():
    rng = np.random.default_rng(1)
    for name in ("plane", "sphere", "graph", "cylinder", "torus"):
        p = preset(name, n=2)
        for u in p.chart.sample(rng, 5):
            fib = ag.fibre(p, u)
            s = np.linalg.svd(fib.anchor_matrix, compute_uv=False)
            assert int(np.sum(s > 1e-8 * s[0])) == 2


def test_bracket_constant_commuting_sections():
    p = preset("plane", n=2)
    e1 = np.zeros(6)
    e1[3] = 1.0
    e2 = np.zeros(6)
    e2[4] = 1.0
    X = ag.Section(p, lambda u: e1)
    Y = ag.Section(p, lambda u: e2)
    field, tang = ag.section_bracket(X, Y, np.array([0.1, 0.2]))
    assert field.norm() < 1e-12
    assert tang < 1e-12


def test_bracket_tangency_random_sections():
    p = preset("sphere", n=2)
    rng = np.random.default_rng(2)
    for k in range(100):
        X = ag.random_section(p, rng)
        Y = ag.random_section(p, rng)
        u = p.chart.sample(rng, 1)[0]
        _, tang = ag.section_bracket(X, Y, u)
        assert tang < 1e-6


def test_bracket_antisymmetry():
    p = preset("sphere", n=2)
    rng = np.random.default_rng(3)
    for k in range(10):
        X = ag.random_section(p, rng)
        Y = ag.random_section(p, rng)
        u = p.chart.sample(rng, 1)[0]
        XY, _ = ag.section_bracket(X, Y, u)
        YX, _ = ag.section_bracket(Y, X, u)
        assert np.linalg.norm(XY.coeffs() + YX.coeffs()) < 1e-8


def test_bracket_boundary_margin():
    from bonnetlab.errors import StencilOutOfDomain

    p = preset("plane", n=2)
    X = ag.random_section(p, 0)
    Y = ag.random_section(p, 1)
    with pytest.raises(StencilOutOfDomain):
        ag.section_bracket(X, Y, np.array([1.0, 0.0]))


def test_action_bracket_constant_maps():
    rng = np.random.default_rng(4)
    from helpers import random_killing_field

    A = random_killing_field(3, rng)
    B = random_killing_field(3, rng)
    out = ag.action_algebroid_bracket(kf.killing_eval, lambda m: A, lambda m: B,
                                      np.array([0.3, -0.5, 1.0]))
    expect = kf.killing_bracket(A, B)
    assert np.linalg.norm(out.coeffs() - expect.coeffs()) < 1e-12


def _poly_field_map(n, rng):
    N = kf.algebra_dim(n)
    C = rng.uniform(-1.0, 1.0, size=(N, ag.poly2_count(n + 1)))

    def family(m):
        m = np.asarray(m, float)
        return kf.coeffs_to_field(C @ ag._poly2_monomials(m), n)

    return family


def test_action_anchor_morphism():
    # appendix identity for the Killing action: #[X, Y] = [#X, #Y]
    rng = np.random.default_rng(5)
    n = 2
    X = _poly_field_map(n, rng)
    Y = _poly_field_map(n, rng)
    for m in rng.uniform(-1, 1, size=(50, 3)):
        lhs = kf.killing_eval(ag.action_algebroid_bracket(kf.killing_eval, X, Y, m), m)
        rhs = fd_vector_field_bracket(lambda p: kf.killing_eval(X(p), p),
                                      lambda p: kf.killing_eval(Y(p), p), m)
        assert np.linalg.norm(lhs - rhs) < 1e-5


def test_action_bracket_jacobi():
    rng = np.random.default_rng(6)
    n = 2
    X, Y, Z = (_poly_field_map(n, rng) for _ in range(3))
    act = kf.killing_eval

    def nested(A, B, C, m, step=1e-4):
        AB = lambda q: ag.action_algebroid_bracket(act, A, B, q)
        return ag.action_algebroid_bracket(act, AB, C, m, step=step)

    for m in rng.uniform(-1, 1, size=(5, 3)):
        total = (nested(X, Y, Z, m).coeffs() + nested(Y, Z, X, m).coeffs()
                 + nested(Z, X, Y, m).coeffs())
        assert np.linalg.norm(total) < 1e-5


def test_random_section_determinism():
    p = preset("sphere", n=2)
    X1 = ag.random_section(p, 42)
    X2 = ag.random_section(p, 42)
    u = np.array([1.2, 0.8])
    assert np.array_equal(X1.value(u), X2.value(u))


def test_random_section_tangency():
    p = preset("cylinder", n=2)
    X = ag.random_section(p, 7)
    rng = np.random.default_rng(8)
    for u in p.chart.sample(rng, 10):
        x = p.f(u)
        from bonnetlab.hypersurface import gauss_map

        nu = gauss_map(p, u)
        val = kf.eval_coeffs(X.value(u), x)
        assert abs(val @ nu) < 1e-10


def test_random_sections_differ():
    p = preset("sphere", n=2)
    X1 = ag.random_section(p, 1)
    X2 = ag.random_section(p, 2)
    u = np.array([1.3, 1.1])
    assert np.linalg.norm(X1.value(u) - X2.value(u)) > 1e-3


def test_identity_residuals_plane_analytic():
    rep = ag.identity_residuals(preset("plane", n=2), samples=100, seed=0,
                                tolerance=1e-8)
    for key in ag.IDENTITY_KEYS:
        assert rep[key].max < 1e-8, (key, rep[key].max)
    assert rep.passed


def test_identity_residuals_sphere_fd():
    rep = ag.identity_residuals(preset("sphere", n=2), samples=100, seed=0,
                                raw_derivatives="fd")
    for key in ag.IDENTITY_KEYS:
        assert rep[key].max < 1e-4, (key, rep[key].max)


def test_leibniz_with_unit_scalar_degenerates():
    p = preset("sphere", n=2)
    X = ag.random_section(p, 3)
    Y = ag.random_section(p, 4)
    u = np.array([1.4, 1.0])
    fY = Y.scaled(lambda _: 1.0, lambda _: np.zeros(2))
    b1, _ = ag.section_bracket(X, Y, u)
    b2, _ = ag.section_bracket(X, fY, u)
    assert np.linalg.norm(b1.coeffs() - b2.coeffs()) < 1e-12


def test_well_definedness_direct():
    # two raw extensions with identical projected values give the same bracket
    p = preset("sphere", n=2)
    rng = np.random.default_rng(9)
    X = ag.random_section(p, rng)
    Y = ag.random_section(p, rng)
    q = rng.uniform(-1, 1, size=6)

    def raw2(u):
        from bonnetlab.hypersurface import gauss_map

        x = p.f(u)
        nu = gauss_map(p, u)
        return X.raw(u) + (q - ag.project_coeffs(x, nu, q))

    X2 = ag.Section(p, raw2)
    u = np.array([1.1, 1.6])
    b1, _ = ag.section_bracket(X, Y, u)
    b2, _ = ag.section_bracket(X2, Y, u)
    assert np.linalg.norm(b1.coeffs() - b2.coeffs()) < 1e-6


def test_residual_report_merge_and_json():
    p = preset("plane", n=2)
    r1 = ag.identity_residuals(p, samples=3, seed=0)
    r2 = ag.identity_residuals(p, samples=4, seed=1)
    merged = r1.merge(r2)
    for key in ag.IDENTITY_KEYS:
        assert merged[key].samples == 7
        assert merged[key].max == max(r1[key].max, r2[key].max)
    blob = merged.to_json()
    assert set(blob) == set(ag.IDENTITY_KEYS)
    assert all(set(v) == {"max", "mean", "samples", "tolerance", "pass"}
               for v in blob.values())


def test_identity_residuals_threaded_matches_serial():
    p = preset("sphere", n=2)
    serial = ag.identity_residuals(p, samples=8, seed=5, threads=1)
    threaded = ag.identity_residuals(p, samples=8, seed=5, threads=4)
    for key in ag.IDENTITY_KEYS:
        assert serial[key].max == threaded[key].max
        assert serial[key].mean == threaded[key].mean
