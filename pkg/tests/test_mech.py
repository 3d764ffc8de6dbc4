import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gaudin_lab import mech, salg
from gaudin_lab.efun import E1, EllipticContext, wp
from gaudin_lab.mech import (
    H0,
    First,
    Flow,
    GaudinModel,
    Second,
    SpinState,
    Unsupported,
    coefficient_gradient,
    eom_rhs,
    gradient,
    hamiltonian,
    lax,
    lax_residual,
    m_matrix,
    poisson_bracket,
    random_state,
)

CTX = EllipticContext(tau=0.3 + 1j)
Z3 = (0.1 + 0.05j, 0.37 + 0.3j, -0.2 + 0.45j)
LAM3 = (1.0, 0.7, 1.3)

CASES = [
    ("rational", 2, True),
    ("rational", 2, False),
    ("rational", 3, False),
    ("elliptic", 2, True),
    ("elliptic", 2, False),
    ("elliptic", 3, False),
]


def make(kind, N, mode, z=Z3, lam=LAM3):
    return GaudinModel(kind, N, z, lam, ctx=CTX if kind == "elliptic" else None, sl2_mode=mode)


def flows_for(model):
    out = [First(a) for a in range(model.n)] + [Second(a) for a in range(model.n)]
    if model.kind == "elliptic":
        out.append(H0)
    return out


def spectral_points(rng, model, count):
    pts = []
    while len(pts) < count:
        z = complex(rng.uniform(-0.5, 0.5) + rng.uniform(-0.5, 0.5) * (model.ctx.tau if model.ctx else 1j))
        if model.kind == "elliptic":
            ok = all(salg_distance(z - zc, model.ctx) > 0.1 for zc in model.z)
        else:
            ok = all(abs(z - zc) > 0.1 for zc in model.z)
        if ok:
            pts.append(z)
    return pts


def salg_distance(w, ctx):
    from gaudin_lab.efun import _lattice_distance

    return _lattice_distance(w, ctx)


def traceless(rng, shape, N):
    X = rng.normal(size=shape) + 1j * rng.normal(size=shape)
    return X - np.trace(X, axis1=-2, axis2=-1)[..., None, None] * np.eye(N) / N


# -- basic shape and trivial examples ---------------------------------------


def test_single_site_rational_lax():
    m = GaudinModel("rational", 2, (0.0,), (1.0,))
    s3 = np.diag([1.0, -1.0]).astype(complex)
    assert np.allclose(lax(m, s3[None], 2.0), s3 / 2, atol=1e-15)
    assert hamiltonian(m, s3[None], First(0)) == 0
    assert np.allclose(m_matrix(m, s3[None], First(0), 0.7), lax(m, s3[None], 0.7))


def test_residue_of_lax():
    # (z - z_a) L(z) = S^a + (z - z_a) * (regular part at z_a) + ...
    rng = np.random.default_rng(0)
    fine = EllipticContext(tau=CTX.tau, pole_radius=1e-7)  # 1e-5 sits inside the default pole radius
    for kind in ("rational", "elliptic"):
        for z_pts in (Z3, (0.0, 0.5, 0.25 + 0.5j)):
            m = GaudinModel(kind, 2, z_pts, LAM3, ctx=fine if kind == "elliptic" else None)
            S = random_state(m, rng, scale=1.0 if z_pts == Z3 else 0.3).S
            for a in range(m.n):
                r = 1e-5
                z = m.z[a] + r * np.exp(0.3j)
                err = np.linalg.norm((z - m.z[a]) * lax(m, S, z) - S[a])
                assert err <= 1.01 * r * np.linalg.norm(mech.eta_prime(m.with_(sl2_mode=False), S, a))
                if z_pts != Z3:
                    assert err <= 1e-4 * np.linalg.norm(S[a])


def test_model_validation():
    with pytest.raises(ValueError):
        GaudinModel("rational", 2, (0.1, 0.1), (1, 1))
    with pytest.raises(ValueError):
        GaudinModel("rational", 2, (0.1, 0.2), (1, 0))
    with pytest.raises(Unsupported):
        GaudinModel("rational", 3, (0.1, 0.2), (1, 1), sl2_mode=True)
    assert GaudinModel("rational", 2, (0.1, 0.2), (1, 1)).sl2_mode
    assert not GaudinModel("rational", 3, (0.1, 0.2), (1, 1)).sl2_mode
    with pytest.raises(ValueError):
        lax(make("rational", 2, True), np.zeros((3, 2, 2)), Z3[0])


def test_rational_h0_unsupported():
    m = make("rational", 2, True)
    S = random_state(m, np.random.default_rng(0)).S
    with pytest.raises(Unsupported):
        hamiltonian(m, S, H0)
    with pytest.raises(Unsupported):
        eom_rhs(m, S, H0)


def test_flow_parse():
    assert Flow.parse("First(1)") == First(0)
    assert Flow.parse("second(3)") == Second(2)
    assert Flow.parse("H0") == H0
    assert str(Second(1)) == "Second(2)"
    assert all(Flow.parse(str(f)) == f for f in (First(0), Second(2), H0))
    with pytest.raises(ValueError):
        Flow("first")


def test_state_json_roundtrip():
    m = make("elliptic", 3, False)
    st_ = random_state(m, np.random.default_rng(3))
    back = SpinState.from_json(st_.to_json())
    assert np.array_equal(back.S, st_.S)
    assert back.on_shell


def test_on_shell_casimir():
    m = make("elliptic", 2, True)
    S = random_state(m, np.random.default_rng(4)).S
    for a in range(m.n):
        assert abs(np.trace(S[a] @ S[a]) - 2 * m.lam[a] ** 2) < 1e-12


# -- Lax equations ------------------------------------------------------------


@pytest.mark.parametrize("kind,N,mode", CASES)
def test_lax_residual_all_flows(kind, N, mode):
    m = make(kind, N, mode)
    rng = np.random.default_rng(5)
    tol = 1e-12 if kind == "rational" else 1e-9
    for _ in range(10):
        S = random_state(m, rng).S
        for z in spectral_points(rng, m, 3):
            for fl in flows_for(m):
                assert lax_residual(m, S, fl, z) <= tol * max(1, np.abs(S).max() ** 2), (fl, z)


def test_lax_residual_many_states():
    m = make("elliptic", 2, True)
    rng = np.random.default_rng(6)
    worst = 0.0
    for _ in range(100):
        S = random_state(m, rng).S
        for z in spectral_points(rng, m, 10):
            worst = max(worst, lax_residual(m, S, First(0), z), lax_residual(m, S, Second(1), z))
    assert worst <= 1e-9


@pytest.mark.parametrize("N", [2, 3])
def test_m_tilde_linear_combination(N):
    m = make("elliptic", N, False)
    rng = np.random.default_rng(7)
    S = random_state(m, rng).S
    for z in spectral_points(rng, m, 5):
        for a in range(m.n):
            Mt = m_matrix(m, S, Second(a), z)
            rhs = E1(z - m.z[a], CTX) * lax(m, S, z) + m_matrix(m, S, H0, z)
            for c in range(m.n):
                if c != a:
                    rhs = rhs + E1(m.z[a] - m.z[c], CTX) * m_matrix(m, S, First(c), z)
            assert np.abs(Mt - rhs).max() <= 1e-9


@pytest.mark.parametrize("mode", [True, False])
def test_rational_m_tilde_form(mode):
    m = make("rational", 2, mode)
    rng = np.random.default_rng(8)
    S = random_state(m, rng).S
    z = 0.9 - 0.4j
    for a in range(m.n):
        eta = mech.eta_prime(m, S, a)
        expected = (m_matrix(m, S, First(a), z) + eta) / (z - m.z[a])
        assert np.abs(m_matrix(m, S, Second(a), z) - expected).max() <= 1e-13
        plain = sum(S[c] / (m.z[a] - m.z[c]) for c in range(m.n) if c != a)
        extra = hamiltonian(m, S, First(a)) / m.lam[a] ** 2 * S[a] if mode else 0
        assert np.abs(eta - plain - extra).max() <= 1e-13


@pytest.mark.parametrize("N", [2, 3])
def test_quasi_periodicity_of_lax(N):
    # L(z + 1) = Q^{-1} L Q and L(z + tau) = Lambda^{-1} L Lambda
    m = make("elliptic", N, False)
    rng = np.random.default_rng(9)
    S = random_state(m, rng).S
    Q = salg.basis_matrix((1, 0), N)
    Lam = salg.basis_matrix((0, 1), N)
    for z in spectral_points(rng, m, 5):
        L = lax(m, S, z)
        assert np.abs(lax(m, S, z + 1) - np.linalg.inv(Q) @ L @ Q).max() <= 1e-10
        assert np.abs(lax(m, S, z + CTX.tau) - np.linalg.inv(Lam) @ L @ Lam).max() <= 1e-10


# -- Hamiltonians ------------------------------------------------------------


def test_sum_of_first_hamiltonians_vanishes():
    m = make("elliptic", 2, True)
    rng = np.random.default_rng(10)
    for _ in range(10):
        S = random_state(m, rng).S
        assert abs(sum(hamiltonian(m, S, First(a)) for a in range(3))) <= 1e-12


@pytest.mark.parametrize("kind,N,mode", CASES)
def test_reformulated_hamiltonian_bookkeeping(kind, N, mode):
    m = make(kind, N, mode)
    rng = np.random.default_rng(11)
    for _ in range(5):
        S = random_state(m, rng).S
        H1 = [hamiltonian(m, S, First(c)) for c in range(m.n)]
        for a in range(m.n):
            others = [c for c in range(m.n) if c != a]
            d = {c: m.z[a] - m.z[c] for c in others}
            cas = {c: np.trace(S[c] @ S[c]) / (2 * N) for c in others}
            Ht = hamiltonian(m, S, Second(a))
            if kind == "rational":
                diff = Ht - sum(H1[c] / d[c] for c in others)
                const = sum(cas[c] / d[c] ** 2 for c in others)
                tol = 1e-12
            else:
                diff = Ht - hamiltonian(m, S, H0) - sum(E1(d[c], CTX) * H1[c] for c in others)
                const = sum(cas[c] * wp(d[c], CTX) for c in others)
                tol = 1e-10
            extra = H1[a] ** 2 / (2 * m.lam[a] ** 2) if mode else 0
            assert abs(diff - (extra - const)) <= tol * max(1, abs(const))


def test_sl2_rational_chain():
    # sum_c H_c/(z_a-z_c) + H_a^2/(2 lam^2) expanded term by term
    m = make("rational", 2, True)
    rng = np.random.default_rng(12)
    S = random_state(m, rng).S
    tr = lambda A, B: np.trace(A @ B)
    a = 0
    others = [1, 2]
    d = {c: m.z[a] - m.z[c] for c in others}
    H = [hamiltonian(m, S, First(c)) for c in range(3)]
    lhs = sum(H[c] / d[c] for c in others) + H[a] ** 2 / (2 * m.lam[a] ** 2)
    eta = sum(S[c] / d[c] for c in others)
    terms = (
        0.5 * sum(tr(S[a], S[c]) / d[c] ** 2 for c in others)
        + 0.25 * sum(tr(S[c], S[c]) / d[c] ** 2 for c in others)
        - 0.25 * tr(eta, eta)
        + H[a] ** 2 / (2 * m.lam[a] ** 2)
    )
    assert abs(lhs - terms) <= 1e-12
    const = 0.25 * sum(tr(S[c], S[c]) / d[c] ** 2 for c in others)
    assert abs(lhs - hamiltonian(m, S, Second(a)) - const) <= 1e-12


@pytest.mark.parametrize("kind", ["rational", "elliptic"])
def test_generating_function(kind):
    m = make(kind, 2, True, z=Z3[:2], lam=LAM3[:2])
    rng = np.random.default_rng(13)
    S = random_state(m, rng).S
    tol = 1e-12 if kind == "rational" else 1e-9
    for z in spectral_points(rng, m, 20):
        assert mech.generating_check(m, S, z) <= tol


def test_generating_function_single_site():
    m = make("elliptic", 2, True, z=(0.2 + 0.1j,), lam=(1.0,))
    rng = np.random.default_rng(14)
    S = random_state(m, rng).S
    for z in spectral_points(rng, m, 5):
        L = lax(m, S, z)
        H2 = np.trace(S[0] @ S[0]) / 4
        res = np.trace(L @ L) / 4 - H2 * wp(z - m.z[0], CTX) + hamiltonian(m, S, H0)
        assert abs(res) <= 1e-9


# -- gradients, equations of motion, brackets ---------------------------------


@pytest.mark.parametrize("kind,N,mode", CASES)
def test_gradients_match_finite_differences(kind, N, mode):
    m = make(kind, N, mode)
    rng = np.random.default_rng(15)
    S = random_state(m, rng).S
    for fl in flows_for(m):
        G = gradient(m, S, fl)
        dS = traceless(rng, S.shape, N)
        exact = np.einsum("cij,cji->", G, dS)
        errs = []
        for h in (1e-4, 1e-5, 1e-6):
            fd = (hamiltonian(m, S + h * dS, fl) - hamiltonian(m, S - h * dS, fl)) / (2 * h)
            errs.append(abs(fd - exact))
        assert min(errs) <= 1e-6 * max(1, abs(exact)), (fl, errs)


@pytest.mark.parametrize("kind,N,mode", CASES)
def test_eom_is_hamiltonian_flow(kind, N, mode):
    m = make(kind, N, mode)
    rng = np.random.default_rng(16)
    S = random_state(m, rng).S
    for fl in flows_for(m):
        rhs = eom_rhs(m, S, fl)
        assert np.abs(rhs - mech.flow_from_gradient(m, S, fl)).max() <= 1e-12 * max(1, np.abs(rhs).max())
        assert np.abs(rhs - mech.bracket_flow(m, S, fl)).max() <= 1e-12 * max(1, np.abs(rhs).max())


@pytest.mark.parametrize("kind,N,mode", CASES)
def test_casimir_tangency(kind, N, mode):
    m = make(kind, N, mode)
    S = random_state(m, np.random.default_rng(17)).S
    for fl in flows_for(m):
        dS = eom_rhs(m, S, fl)
        assert np.abs(np.einsum("cij,cji->c", S, dS)).max() <= 1e-12 * max(1, np.abs(dS).max())


def test_total_spin_conserved_rational_two_sites():
    m = make("rational", 2, True, z=(0.0, 0.8), lam=(1.0, 1.5))
    S = random_state(m, np.random.default_rng(18)).S
    dS = eom_rhs(m, S, First(0)) - eom_rhs(m, S, First(1))
    assert np.abs(dS.sum(axis=0)).max() <= 1e-14


def test_first_hamiltonians_commute():
    m = make("elliptic", 2, True)
    rng = np.random.default_rng(19)
    S = random_state(m, rng).S
    grads = [coefficient_gradient(gradient(m, S, First(a))) for a in range(3)]
    for a, b in itertools.combinations(range(3), 2):
        assert abs(poisson_bracket(m, grads[a], grads[b], S)) <= 1e-11
    # every pair of flows in the hierarchy commutes as well
    allg = [coefficient_gradient(gradient(m, S, fl)) for fl in flows_for(m)]
    for ga, gb in itertools.combinations(allg, 2):
        assert abs(poisson_bracket(m, ga, gb, S)) <= 1e-10


def test_bracket_antisymmetry_and_jacobi():
    N = 2
    m = make("rational", N, True, z=(0.0,), lam=(1.0,))
    rng = np.random.default_rng(20)
    S = random_state(m, rng).S
    gF = rng.normal(size=(1, 3)) + 1j * rng.normal(size=(1, 3))
    gG = rng.normal(size=(1, 3)) + 1j * rng.normal(size=(1, 3))
    assert poisson_bracket(m, gF, gG, S) + poisson_bracket(m, gG, gF, S) == 0
    # Jacobi on coordinates: {S_a,{S_b,S_c}} + cyclic = 0 with {S_a,S_b} = C^g_ab S_g
    Ct = salg.structure_tensor(N)
    e = np.eye(3)
    C = salg.decompose(S)
    for a, b, c in itertools.product(range(3), repeat=3):
        # {S_b, S_c} is linear with gradient Ct[:, b, c]
        def inner(i, j, k):
            return poisson_bracket(m, e[i][None], Ct[:, j, k][None], S)

        total = inner(a, b, c) + inner(b, c, a) + inner(c, a, b)
        assert abs(total) <= 1e-12
    assert C.shape == (1, 3)


@pytest.mark.parametrize("N", [2, 3])
def test_eta_prime_as_residue(N):
    m = make("elliptic", N, False)
    rng = np.random.default_rng(21)
    S = random_state(m, rng).S
    C = salg.decompose(S)
    const = mech.phi_constant_term(m)
    for a in range(m.n):
        res = mech.eta_prime_residue(m, S, a)
        expected = mech.eta_prime(m, S, a) + salg.reconstruct(C[a] * const, N)
        assert np.abs(res - expected).max() <= 1e-8
    if N == 2:
        assert np.abs(const).max() <= 1e-12


def test_sl2_mode_adds_first_flow():
    m_on, m_off = make("elliptic", 2, True), make("elliptic", 2, False)
    S = random_state(m_on, np.random.default_rng(22)).S
    a = 1
    Ha = hamiltonian(m_on, S, First(a))
    diff = eom_rhs(m_on, S, Second(a)) - eom_rhs(m_off, S, Second(a))
    assert np.abs(diff - Ha / m_on.lam[a] ** 2 * eom_rhs(m_on, S, First(a))).max() <= 1e-12


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from(CASES))
def test_lax_residual_property(seed, case):
    m = make(*case)
    rng = np.random.default_rng(seed)
    S = random_state(m, rng).S
    z = spectral_points(rng, m, 1)[0]
    fl = flows_for(m)[rng.integers(len(flows_for(m)))]
    tol = 1e-12 if m.kind == "rational" else 1e-9
    assert lax_residual(m, S, fl, z) <= tol * max(1, np.abs(S).max() ** 2)
