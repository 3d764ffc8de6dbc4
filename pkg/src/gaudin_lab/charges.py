"""Conserved densities of the sl(2) 1+1 Gaudin models.

The 2x2 linear problem (k d_x + L) psi = 0 is gauged to Schrodinger form
(-k^2 d_x^2 + T) psi_1 = 0.  Expanding T and the Riccati solution
chi = chi_{-1}/(z - z_a) + chi_0 + (z - z_a) chi_1 + ... at a marked point
gives the densities h_{a,1} = -lambda_a chi_0 and h_{a,2} = -lambda_a chi_1.

Densities are only defined up to total derivatives, so equalities with the
explicit Hamiltonians are asserted as integrals over the circle.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import salg
from .field import Jets, LoopState, _jets, field_eom_rhs
from .mech import First, GaudinModel, Second, Unsupported

__all__ = [
    "GaugeSingularity",
    "LocalExpansion",
    "DensityReport",
    "local_lax_coeffs",
    "laurent_by_contour",
    "schrodinger_T",
    "riccati_densities",
    "explicit_densities",
    "momentum_density",
    "momentum_gradient",
    "momentum_bracket_check",
    "density_gradients",
    "variational_eom",
    "integral_identity_sides",
    "circle_integral",
    "loop_integral",
    "integral_identity",
    "discrete_functional",
    "gradient_fd_check",
]

GAUGE_TOL = 1e-8


class GaugeSingularity(ArithmeticError):
    """L^{a,-1}_{12} vanishes on the grid; the gauge transform divides by it."""


def _comm(A, B):
    return A @ B - B @ A


def _tr(A, B):
    return np.einsum("...ij,...ji->...", A, B)


def circle_integral(values, axis=-1):
    """Trapezoid rule on the equispaced periodic grid of [0, 2 pi)."""
    values = np.asarray(values)
    return 2 * np.pi * values.mean(axis=axis)


def loop_integral(state, density, tol=1e-13, max_points=2**15):
    """Integral over the circle of density(jets), refined until converged.

    Densities with 1/S_12 factors are much rougher than the field itself, so
    the state's own grid is not always enough for spectral accuracy.  For a
    LoopState the exact fields are re-evaluated on doubled grids until two
    successive trapezoid sums agree to ``tol`` relative; plain jets are
    integrated on their own grid.  Returns a complex scalar or array.
    """
    if not isinstance(state, LoopState):
        return circle_integral(density(state))
    P = state.G
    prev = circle_integral(density(state.jets()))
    while P < max_points:
        P *= 2
        x = 2 * np.pi * np.arange(P) / P
        cur = circle_integral(density(state.jets(x)))
        if np.all(np.abs(cur - prev) <= tol * max(1.0, float(np.max(np.abs(cur))))):
            return cur
        prev = cur
    return prev


def _require_sl2(model):
    if model.N != 2:
        raise Unsupported("the gauge transform to Schrodinger form is 2x2")


@dataclass
class LocalExpansion:
    a: int
    Lm1: np.ndarray  # L^{a,-1} = S^a, shape (P, 2, 2)
    L0: np.ndarray
    L1: np.ndarray
    Lm1_x: np.ndarray
    Lm1_xx: np.ndarray
    L0_x: np.ndarray
    T_m2: np.ndarray | None = None
    T_m1: np.ndarray | None = None
    T_0: np.ndarray | None = None


@dataclass
class DensityReport:
    a: int
    h1: np.ndarray
    h2: np.ndarray
    P: np.ndarray
    chi0: np.ndarray
    chi1: np.ndarray
    H1: complex  # integral of h1
    H2: complex  # integral of h2
    branch: int = 1


def _sum_hat(model, W_row, C):
    return salg.reconstruct(np.einsum("cd,cpd->pd", W_row, C), model.N)


def local_lax_coeffs(model: GaudinModel, state, a: int) -> LocalExpansion:
    """Laurent coefficients L^{a,-1}, L^{a,0}, L^{a,1} of L(z) at z_a, pointwise in x.

    L^{a,1} = -(1/2) wp-hat S^a - sum F-hat_{ac} S^c; the first term is the
    z-linear part of phi_gamma at zero, absent in the rational model.
    """
    J = _jets(model, state)
    N = model.N
    C, Cx = salg.decompose(J.S), salg.decompose(J.Sx)
    phiW, FW = model.pair_weights("phi"), model.pair_weights("F")
    L0 = _sum_hat(model, phiW[a], C)
    L0_x = _sum_hat(model, phiW[a], Cx)
    L1 = -_sum_hat(model, FW[a], C) - 0.5 * salg.reconstruct(C[a] * model.wp_weights, N)
    return LocalExpansion(a, J.S[a], L0, L1, J.Sx[a], J.Sxx[a], L0_x)


def laurent_by_contour(model: GaudinModel, S, a: int, order: int, radius=1e-2, nodes=64):
    """(1/2 pi i) contour integral of L(z) (z - z_a)^{-order-1}: coefficient L^{a,order}.

    ``S`` has shape (n, N, N) (one point of the loop).
    """
    from .mech import lax

    th = 2 * np.pi * np.arange(nodes) / nodes
    w = radius * np.exp(1j * th)
    vals = np.array([lax(model, S, model.z[a] + wi) for wi in w])
    return np.mean(vals * (w ** (-order))[:, None, None], axis=0)


def _entries(X):
    return X[..., 0, 0], X[..., 0, 1], X[..., 1, 0]


def schrodinger_T(model: GaudinModel, state, a: int, squared: bool = True) -> LocalExpansion:
    """T_{a,-2}, T_{a,-1}, T_{a,0} from the gauge-transformed problem.

    ``squared=False`` reproduces the last term of the printed T_{a,0} without
    its square, for comparison only.
    """
    _require_sl2(model)
    E = local_lax_coeffs(model, state, a)
    k = model.k
    a11, a12, a21 = _entries(E.Lm1)
    b11, b12, b21 = _entries(E.L0)
    c11, c12, c21 = _entries(E.L1)
    a11x, a12x, _ = _entries(E.Lm1_x)
    _, a12xx, _ = _entries(E.Lm1_xx)
    b11x, b12x, _ = _entries(E.L0_x)
    if np.min(np.abs(a12)) <= GAUGE_TOL:
        raise GaugeSingularity(f"L^{{a,-1}}_12 vanishes on the grid (min {np.min(np.abs(a12)):.2e})")
    r = a12x / a12
    E.T_m2 = a12 * a21 + a11 * a11
    E.T_m1 = a12 * b21 + b12 * a21 + 2 * b11 * a11 + k * a11 * r - k * a11x
    last = r**2 if squared else r
    E.T_0 = (
        c12 * a21
        + a12 * c21
        + 2 * c11 * a11
        + b12 * b21
        + b11 * b11
        + (k / a12) * (b11 * a12x + a11 * b12x - b12 * a11 * r)
        - k * b11x
        - (k**2 / 2) * a12xx / a12
        + (3 * k**2 / 4) * last
    )
    return E


def momentum_density(model: GaudinModel, state, a: int):
    """P_a = -(k/2) L^{a,-1}_11 d_x L^{a,-1}_12 / L^{a,-1}_12."""
    _require_sl2(model)
    J = _jets(model, state)
    s11, s12 = J.S[a][:, 0, 0], J.S[a][:, 0, 1]
    if np.min(np.abs(s12)) <= GAUGE_TOL:
        raise GaugeSingularity("S_12 vanishes on the grid")
    return -(model.k / 2) * s11 * J.Sx[a][:, 0, 1] / s12


def riccati_densities(model: GaudinModel, state, a: int, branch: int = 1) -> DensityReport:
    """h_{a,1}, h_{a,2} from the Riccati recursion on the branch chi_{-1} = branch * lambda_a."""
    if branch not in (1, -1):
        raise ValueError("branch must be +1 or -1")
    lam = model.lam[a]
    chi_m1 = branch * lam  # constant in x, so its derivative drops out

    def dens(J):
        E = schrodinger_T(model, J, a)
        chi0 = E.T_m1 / (2 * chi_m1)
        chi1 = (E.T_0 - E.T_m1**2 / (4 * E.T_m2)) / (2 * chi_m1)
        return np.array([chi0, chi1])

    J = _jets(model, state)
    chi0, chi1 = dens(J)
    H1, H2 = -lam * loop_integral(state, dens)
    P = momentum_density(model, J, a)
    return DensityReport(a, -lam * chi0, -lam * chi1, P, chi0, chi1, complex(H1), complex(H2), branch)


def explicit_densities(model: GaudinModel, state, a: int):
    """(P_a + H_a, H-tilde_a - (k/4 lambda^2) <L0 S_x S> + (k^2/16 lambda^2) <S_x^2>) pointwise."""
    _require_sl2(model)
    J = _jets(model, state)
    E = local_lax_coeffs(model, J, a)
    k, lam2, N = model.k, model.lam[a] ** 2, model.N
    S, Sx = E.Lm1, E.Lm1_x
    H = -_tr(S, E.L0) / N
    P = momentum_density(model, J, a)
    C = salg.decompose(S)
    Ht = (
        _tr(S, salg.reconstruct(C * model.wp_weights, N)) / (2 * N)
        - _tr(S, E.L1 + 0.5 * salg.reconstruct(C * model.wp_weights, N)) / N
        - _tr(E.L0, E.L0) / (2 * N)
    )
    if model.sl2_mode:
        Ht = Ht + H**2 / (2 * lam2)
    h2 = Ht - (k / (4 * lam2)) * _tr(E.L0 @ Sx, S) + (k**2 / (16 * lam2)) * _tr(Sx, Sx)
    return P + H, h2


def integral_identity_sides(model: GaudinModel, state, a: int, squared: bool = True):
    """Both sides of 4 lambda^2 T_0 - T_{-1}^2 = 2<L^-1 L^-1>(<L0 L0>/2 + <L1 L^-1>) - <L^-1 L0>^2
    + 2k <L0 d_x L^-1 L^-1> - (k^2/2) <(d_x L^-1)^2>, pointwise."""
    E = schrodinger_T(model, state, a, squared=squared)
    lam2, k = model.lam[a] ** 2, model.k
    lhs = 4 * lam2 * E.T_0 - E.T_m1**2
    S, Sx = E.Lm1, E.Lm1_x
    rhs = (
        2 * _tr(S, S) * (0.5 * _tr(E.L0, E.L0) + _tr(E.L1, S))
        - _tr(S, E.L0) ** 2
        + 2 * k * _tr(E.L0 @ Sx, S)
        - (k**2 / 2) * _tr(Sx, Sx)
    )
    return lhs, rhs


def integral_identity(model: GaudinModel, state, a: int, squared: bool = True):
    """Converged integrals of both sides of the T0 integral identity."""
    lhs, rhs = loop_integral(state, lambda J: np.array(integral_identity_sides(model, J, a, squared)))
    return complex(lhs), complex(rhs)


# ---------------------------------------------------------------------------
# functional derivatives and the variational equations of motion


def momentum_gradient(model: GaudinModel, state, a: int) -> np.ndarray:
    """Matrix G with d(integral P_a) = integral Tr(G dS^a) dx."""
    J = _jets(model, state)
    S, Sx = J.S[a], J.Sx[a]
    s12 = S[:, 0, 1]
    if np.min(np.abs(s12)) <= GAUGE_TOL:
        raise GaugeSingularity("S_12 vanishes on the grid")
    k = model.k
    g11 = -(k / 2) * Sx[:, 0, 1] / s12  # coefficient of dS_11
    g12 = (k / 2) * Sx[:, 0, 0] / s12  # coefficient of dS_12
    G = np.zeros_like(S)
    G[:, 0, 0], G[:, 1, 1], G[:, 1, 0] = g11 / 2, -g11 / 2, g12
    return G


def momentum_bracket_check(model: GaudinModel, state, a: int) -> dict:
    """max |{integral P_a, S^b(y)} - k delta_ab d_y S^b(y)| from the ultralocal bracket.

    {F, S^b(y)} = N [S^b(y), dF/dS^b(y)]; P_a depends on site a only, so the
    b != a block vanishes identically.
    """
    J = _jets(model, state)
    G = momentum_gradient(model, J, a)
    out = {}
    for b in range(model.n):
        br = model.N * _comm(J.S[b], G) if b == a else np.zeros_like(J.S[b])
        target = model.k * J.Sx[b] if b == a else 0 * J.Sx[b]
        out[b] = float(np.abs(br - target).max())
    return out


def density_gradients(model: GaudinModel, state, a: int, order: int) -> np.ndarray:
    """Matrix functional derivatives dH/dS^c - d_x dH/dS^c_x of the explicit densities.

    Shape (n, P, 2, 2); d(integral h) = sum_c integral Tr(G^c dS^c) dx.
    """
    _require_sl2(model)
    J = _jets(model, state)
    N, k, lam2 = model.N, model.k, model.lam[a] ** 2
    C = salg.decompose(J.S)
    phiW, FW = model.pair_weights("phi"), model.pair_weights("F")
    E = local_lax_coeffs(model, J, a)
    S, Sx, Sxx, L0, L0x = J.S[a], J.Sx[a], J.Sxx[a], E.L0, E.L0_x
    G = np.zeros_like(J.S)
    # H_a = -(1/N) <S^a L0>
    G1 = np.zeros_like(J.S)
    G1[a] = -L0 / N
    for c in range(model.n):
        if c != a:
            G1[c] = salg.reconstruct(C[a] * phiW[c, a], N) / N
    if order == 1:
        G = G1
        G[a] = G[a] + momentum_gradient(model, J, a)
        return G
    if order != 2:
        raise Unsupported("densities are available for the first and second flows")
    H = -_tr(S, L0) / N
    Ceta = salg.decompose(L0)
    G[a] = (salg.reconstruct(C[a] * model.wp_weights, N) + _sum_hat(model, FW[a], C)) / N
    for c in range(model.n):
        if c != a:
            G[c] = (salg.reconstruct(C[a] * FW[c, a], N) + salg.reconstruct(Ceta * phiW[c, a], N)) / N
    if model.sl2_mode:
        G = G + (H / lam2)[None, :, None, None] * G1
    # -(k / 4 lambda^2) <L0 S_x S>
    G[a] = G[a] - (k / (4 * lam2)) * (L0 @ Sx - Sx @ L0 - S @ L0x)
    SxS = Sx @ S
    SxS = SxS - 0.5 * np.trace(SxS, axis1=-2, axis2=-1)[:, None, None] * np.eye(2)
    Cs = salg.decompose(SxS)
    for c in range(model.n):
        if c != a:
            G[c] = G[c] + (k / (4 * lam2)) * salg.reconstruct(Cs * phiW[c, a], N)
    # (k^2 / 16 lambda^2) <S_x^2>
    G[a] = G[a] - (k**2 / (8 * lam2)) * Sxx
    return G


def variational_eom(model: GaudinModel, state, a: int, order: int):
    """d_t S^c = N [S^c, G^c] from the densities; returns (rhs, max distance to field_eom_rhs)."""
    J = _jets(model, state)
    G = density_gradients(model, J, a, order)
    rhs = model.N * _comm(J.S, G)
    ref = field_eom_rhs(model, J, First(a) if order == 1 else Second(a))
    return rhs, float(np.abs(rhs - ref).max())


def discrete_functional(model: GaudinModel, S_grid, a: int, order: int) -> complex:
    """Trapezoid integral of the explicit density with spectral x-derivatives of grid values.

    ``S_grid`` has shape (n, G, 2, 2).
    """
    G = S_grid.shape[1]
    kk = np.fft.fftfreq(G, 1 / G)
    if G % 2 == 0:
        kk[G // 2] = 0  # Nyquist derivative set to zero keeps D antisymmetric
    F = np.fft.fft(S_grid, axis=1)
    Sx = np.fft.ifft(F * (1j * kk)[None, :, None, None], axis=1)
    Sxx = np.fft.ifft(F * (-(kk**2))[None, :, None, None], axis=1)
    eye = np.eye(S_grid.shape[-1]) / S_grid.shape[-1]
    Sx = Sx - np.trace(Sx, axis1=-2, axis2=-1)[..., None, None] * eye  # FFT roundoff
    Sxx = Sxx - np.trace(Sxx, axis1=-2, axis2=-1)[..., None, None] * eye
    J = Jets(S_grid, Sx, Sxx)
    h1, h2 = explicit_densities(model, J, a)
    return complex(circle_integral(h1 if order == 1 else h2))


def gradient_fd_check(
    model: GaudinModel, state: LoopState, a: int, order: int, seed: int = 0, eps=(1e-4, 1e-5), tol=1e-12, max_points=2**14
) -> float:
    """Worst relative gap between the functional derivative and central differences.

    The direction is a smooth random traceless loop with modes 1..3.  The
    discrete functional uses spectral derivatives, so the grid is doubled
    until it agrees with the next finer grid to ``tol`` relative.
    """
    P = state.G
    while P < max_points:
        x = 2 * np.pi * np.arange(2 * P) / (2 * P)
        coarse = discrete_functional(model, state.jets(x[::2]).S, a, order)
        fine = discrete_functional(model, state.jets(x).S, a, order)
        if abs(fine - coarse) <= tol * max(1.0, abs(fine)):
            break
        P *= 2
    x = 2 * np.pi * np.arange(P) / P
    J = state.jets(x)
    rng = np.random.default_rng(seed)
    dim = model.dim
    C = np.zeros((model.n, P, dim), complex)
    for q in range(1, 4):
        amp = rng.normal(size=(model.n, 1, dim)) + 1j * rng.normal(size=(model.n, 1, dim))
        C += amp * np.cos(q * x + rng.uniform(0, 2 * np.pi))[None, :, None] / q**2
    dS = salg.reconstruct(C, model.N)
    grad = density_gradients(model, J, a, order)
    pred = circle_integral(_tr(grad, dS).sum(0))
    errs = []
    for e in eps:
        fd = (discrete_functional(model, J.S + e * dS, a, order) - discrete_functional(model, J.S - e * dS, a, order)) / (2 * e)
        errs.append(abs(fd - pred) / abs(pred))
    return float(max(errs))
