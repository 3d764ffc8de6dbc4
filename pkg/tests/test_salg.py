import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gaudin_lab import salg
from gaudin_lab.efun import EllipticContext, wp

SIGMA = {
    1: np.array([[0, 1], [1, 0]]),
    2: np.array([[0, -1j], [1j, 0]]),
    3: np.array([[1, 0], [0, -1]]),
}


def random_traceless(rng, N, shape=()):
    A = rng.normal(size=shape + (N, N)) + 1j * rng.normal(size=shape + (N, N))
    return A - np.trace(A, axis1=-2, axis2=-1)[..., None, None] / N * np.eye(N)


def test_pauli_basis():
    assert np.array_equal(salg.basis_matrix((0, 1), 2), SIGMA[1])
    assert np.allclose(salg.basis_matrix((1, 1), 2), SIGMA[2], atol=1e-15)
    assert np.allclose(-salg.basis_matrix((1, 0), 2), SIGMA[3], atol=1e-15)
    assert np.array_equal(salg.basis_matrix((0, 0), 3), np.eye(3))


def test_product_rule_n3():
    N = 3
    for a in salg.labels(N):
        for b in salg.labels(N):
            lhs = salg.basis_matrix(a, N) @ salg.basis_matrix(b, N)
            rhs = salg.e_N(-salg.cross(a, b) / 2, N) * salg.basis_matrix((a[0] + b[0], a[1] + b[1]), N)
            assert np.max(np.abs(lhs - rhs)) < 1e-14


def test_structure_constant_values():
    # commutator-consistent sign: [-sigma3, sigma1] = -2i sigma2
    assert salg.structure_constant((1, 0), (0, 1), 2) == pytest.approx(-2j)
    N = 4
    for a in salg.labels(N):
        for b in salg.labels(N):
            assert salg.structure_constant(a, b, N) + salg.structure_constant(b, a, N) == 0


def test_commutator_exact_n3():
    N = 3
    for a in salg.labels(N):
        for b in salg.labels(N):
            Ta, Tb = salg.basis_matrix(a, N), salg.basis_matrix(b, N)
            c = salg.structure_constant(a, b, N)
            res = Ta @ Tb - Tb @ Ta - c * salg.basis_matrix((a[0] + b[0], a[1] + b[1]), N)
            assert np.max(np.abs(res)) < 1e-14


def test_killing_values():
    T10 = salg.basis_matrix((1, 0), 2)
    assert salg.killing(T10, T10) == pytest.approx(2)
    assert salg.killing(np.eye(3), np.eye(3)) == pytest.approx(3)
    for a in salg.labels(3):
        for b in salg.labels(3):
            if salg.reduce_label((a[0] + b[0], a[1] + b[1]), 3) != (0, 0):
                assert abs(salg.killing(salg.basis_matrix(a, 3), salg.basis_matrix(b, 3))) < 1e-14
    with pytest.raises(ValueError):
        salg.killing(np.eye(2), np.eye(3))


def test_decompose_examples():
    S = salg.SpinCoeffs.from_matrix(SIGMA[3])
    assert S[(1, 0)] == pytest.approx(-1)
    assert abs(S[(0, 1)]) < 1e-15 and abs(S[(1, 1)]) < 1e-15
    assert np.all(salg.decompose(np.zeros((3, 3))) == 0)
    with pytest.raises(ValueError):
        salg.decompose(np.eye(2))


@pytest.mark.parametrize("N", [2, 3, 4])
def test_decompose_roundtrip(N):
    A = random_traceless(np.random.default_rng(N), N, (5,))
    back = salg.reconstruct(salg.decompose(A), N)
    assert np.max(np.abs(back - A)) / np.max(np.abs(A)) <= 1e-13


@pytest.mark.parametrize("N", [2, 3])
def test_structure_tensor_matches_commutator(N):
    rng = np.random.default_rng(10 + N)
    A, B = random_traceless(rng, N), random_traceless(rng, N)
    C = salg.structure_tensor(N)
    got = salg.reconstruct(np.einsum("gab,a,b->g", C, salg.decompose(A), salg.decompose(B)), N)
    assert np.max(np.abs(got - (A @ B - B @ A))) < 1e-13


def test_section_quasi_periodicity_n3():
    ctx = EllipticContext(tau=0.3 + 1j)
    z = np.array([0.1 + 0.2j, -0.3 + 0.1j, 0.25 - 0.3j])
    for g in salg.labels(3):
        v = salg.section_function("phi", g, z, ctx, 3)
        assert np.max(np.abs(salg.section_function("phi", g, z + 1, ctx, 3) - salg.e_N(g[1], 3) * v)) < 1e-12
        F = salg.section_function("F", g, z, ctx, 3)
        Ft = salg.section_function("F", g, z + ctx.tau, ctx, 3)
        assert np.max(np.abs(Ft - salg.e_N(-g[0], 3) * F)) < 1e-11


def test_sl2_phi_square():
    ctx = EllipticContext(tau=0.3 + 1j)
    z = np.array([0.11 + 0.2j, -0.3 + 0.15j])
    for a in salg.labels(2):
        v = salg.section_function("phi", a, z, ctx, 2)
        assert np.max(np.abs(v * v - (wp(z, ctx) - wp(salg.omega(a, 2, ctx.tau), ctx)))) <= 1e-10


def test_hat_adjoint_rules():
    ctx = EllipticContext(tau=0.25 + 0.8j)
    rng = np.random.default_rng(3)
    N = 3
    S, Sp = (salg.decompose(random_traceless(rng, N)) for _ in range(2))
    za, zb = 0.1 + 0.2j, -0.2 + 0.35j

    def pair(kind, X, Y, p, q):
        return salg.killing(salg.reconstruct(X, N), salg.reconstruct(salg.apply_hat(kind, Y, p, q, ctx), N))

    assert abs(pair("phi_ab", S, Sp, za, zb) + pair("phi_ab", Sp, S, zb, za)) < 1e-12
    assert abs(pair("f_ab", S, Sp, za, zb) - pair("f_ab", Sp, S, zb, za)) < 1e-12
    assert abs(pair("F_ab", S, Sp, za, zb) - pair("F_ab", Sp, S, zb, za)) < 1e-11
    assert np.all(salg.apply_hat("wp", np.zeros(8), ctx=ctx) == 0)
    with pytest.raises(ValueError):
        salg.apply_hat("phi_ab", S, za, za, ctx)


def test_hat_phi_ab_phi_ba_sl2():
    ctx = EllipticContext(tau=0.3 + 1j)
    za, zb = 0.31 + 0.2j, -0.1 - 0.05j
    d = za - zb
    for k, (lab, _) in salg.PAULI.items():
        S = np.zeros(3, dtype=complex)
        S[salg.label_index(lab, 2)] = 1
        out = salg.apply_hat("phi_ab", salg.apply_hat("phi_ab", S, zb, za, ctx), za, zb, ctx)
        # phi_a(d) phi_a(-d) = -phi_a(d)^2 for odd sl(2) sections
        expect = -(wp(d, ctx) - wp(salg.omega(lab, 2, ctx.tau), ctx)) * S
        assert np.max(np.abs(out - expect)) < 1e-11


def test_sl2_tables():
    tab = salg.sl2_tables(EllipticContext(tau=0.2 + 1.3j))
    assert tab["checks"]["E1_additivity"] <= 1e-10
    assert abs(tab["constants"][(1, 0)]["E1"]) <= 1e-10
    assert tab["checks"]["F_equals_minus_derivative"] <= 1e-8
    assert tab["checks"]["F_equals_product"] <= 1e-10


@pytest.mark.parametrize("tau", [0.3 + 1j, 0.25 + 0.8j])
def test_algebra_suite(tau):
    rep = salg.algebra_suite(EllipticContext(tau=tau), n_samples=50, seed=5)
    bad = {k: v for k, v in rep.items() if v > salg.suite_tolerance(k)}
    assert not bad


labels3 = st.sampled_from(salg.labels(3))


@settings(max_examples=50, deadline=None)
@given(labels3, labels3)
def test_structure_constant_properties(a, b):
    N = 3
    c = salg.structure_constant(a, b, N)
    assert c == salg.structure_constant(a, (a[0] + b[0], a[1] + b[1]), N)
    assert c == salg.structure_constant(b, (-a[0], -a[1]), N)


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 5), st.integers(0, 2**32 - 1))
def test_roundtrip_property(N, seed):
    A = random_traceless(np.random.default_rng(seed), N)
    assert np.max(np.abs(salg.reconstruct(salg.decompose(A), N) - A)) <= 1e-13 * max(1, np.max(np.abs(A)))


@pytest.mark.parametrize("N", [2, 3])
def test_sections_where_phi_vanishes(N):
    # z = -omega_g: phi_g = 0, f_g and F_g finite and consistent with F = -d phi
    ctx = EllipticContext(tau=0.3 + 1j)
    for lab in salg.labels(N):
        w = salg.omega(lab, N, ctx.tau)
        z = -w
        assert abs(salg.section_function("phi", lab, z, ctx, N)) < 1e-12
        d = salg.richardson_derivative(lambda x: salg.section_function("phi", lab, x, ctx, N), z)
        assert abs(salg.section_function("F", lab, z, ctx, N) + d) < 1e-8
