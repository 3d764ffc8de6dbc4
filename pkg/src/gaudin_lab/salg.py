"""The sin-algebra basis of sl(N) and the section functions attached to it.

Matrices in sl(N) are expanded as A = sum_alpha S_alpha T_alpha over the
labels alpha in {0..N-1}^2 minus (0,0).  Coefficient vectors are numpy arrays
whose last axis runs over ``labels(N)``; hat operators act on that axis by
multiplication.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import efun
from .efun import E1, EllipticContext, f, phi, wp

__all__ = [
    "labels",
    "label_index",
    "basis_matrix",
    "basis_tensor",
    "structure_constant",
    "structure_tensor",
    "killing",
    "decompose",
    "reconstruct",
    "SpinCoeffs",
    "omega",
    "section_function",
    "section_table",
    "hat_weights",
    "apply_hat",
    "sl2_tables",
    "PAULI",
    "algebra_suite",
]


def e_N(x, N):
    return np.exp(2j * np.pi * np.asarray(x) / N)


def cross(a, b):
    return a[0] * b[1] - a[1] * b[0]


@lru_cache(maxsize=None)
def labels(N: int) -> tuple[tuple[int, int], ...]:
    """Representatives of the nonzero classes of (Z/NZ)^2, row-major."""
    if N < 2:
        raise ValueError("N must be >= 2")
    return tuple((a, b) for a in range(N) for b in range(N) if (a, b) != (0, 0))


@lru_cache(maxsize=None)
def _label_lookup(N):
    return {lab: i for i, lab in enumerate(labels(N))}


def reduce_label(alpha, N):
    return (int(alpha[0]) % N, int(alpha[1]) % N)


def label_index(alpha, N: int) -> int:
    lab = reduce_label(alpha, N)
    if lab == (0, 0):
        raise ValueError("label (0,0) is not in sl(N)")
    return _label_lookup(N)[lab]


@lru_cache(maxsize=None)
def _q_lambda(N):
    Q = np.diag(e_N(np.arange(1, N + 1), N))
    Lam = np.roll(np.eye(N), 1, axis=1)
    return Q, Lam


def basis_matrix(alpha, N: int) -> np.ndarray:
    """T_alpha = e_N(a1 a2 / 2) Q^a1 Lambda^a2 for any integer pair (no reduction)."""
    a1, a2 = int(alpha[0]), int(alpha[1])
    Q, Lam = _q_lambda(N)
    Qa = np.diag(np.diag(Q) ** a1)
    La = np.linalg.matrix_power(Lam, a2 % N)
    return e_N(a1 * a2 / 2, N) * Qa @ La


@lru_cache(maxsize=None)
def basis_tensor(N: int) -> np.ndarray:
    """Array (N^2-1, N, N) of the representative basis matrices."""
    out = np.array([basis_matrix(a, N) for a in labels(N)])
    out.setflags(write=False)
    return out


def structure_constant(alpha, beta, N: int) -> complex:
    """c with [T_alpha, T_beta] = c T_{alpha+beta}, the sum taken literally.

    Follows from T_a T_b = e_N(-a x b / 2) T_{a+b}; equals -2i sin(pi a x b / N).
    """
    return complex(-2j * np.sin(np.pi * cross(alpha, beta) / N))


def label_phase(alpha, N: int) -> complex:
    """p with T_alpha (literal) = p T_rep(alpha)."""
    rep = reduce_label(alpha, N)
    T = basis_matrix(alpha, N)
    R = basis_matrix(rep, N)
    return complex(np.trace(T @ R.conj().T) / N)


@lru_cache(maxsize=None)
def structure_tensor(N: int) -> np.ndarray:
    """C[g, a, b] with [T_a, T_b] = sum_g C[g, a, b] T_g over representatives."""
    labs = labels(N)
    n = len(labs)
    C = np.zeros((n, n, n), dtype=complex)
    for i, a in enumerate(labs):
        for j, b in enumerate(labs):
            s = (a[0] + b[0], a[1] + b[1])
            if reduce_label(s, N) == (0, 0):
                continue
            C[label_index(s, N), i, j] = structure_constant(a, b, N) * label_phase(s, N)
    C.setflags(write=False)
    return C


def killing(A, B) -> complex:
    A = np.asarray(A)
    B = np.asarray(B)
    if A.shape[-2:] != B.shape[-2:] or A.shape[-1] != A.shape[-2]:
        raise ValueError(f"size mismatch {A.shape} vs {B.shape}")
    return np.einsum("...ij,...ji->...", A, B)


def decompose(A, tol: float = 1e-12) -> np.ndarray:
    """Coefficients S_alpha = Tr(A T_alpha^dagger) / N along the last axis."""
    A = np.asarray(A, dtype=complex)
    N = A.shape[-1]
    tr = np.trace(A, axis1=-2, axis2=-1)
    norm = np.linalg.norm(A, axis=(-2, -1))
    if np.any(np.abs(tr) > tol * np.maximum(norm, 1e-300)):
        raise ValueError("matrix is not traceless")
    return np.einsum("...ij,kij->...k", A, basis_tensor(N).conj()) / N


def reconstruct(S, N: int | None = None) -> np.ndarray:
    S = np.asarray(S, dtype=complex)
    if N is None:
        N = int(round(np.sqrt(S.shape[-1] + 1)))
    return np.einsum("...k,kij->...ij", S, basis_tensor(N))


@dataclass(frozen=True)
class SpinCoeffs:
    """Label -> coefficient view of an sl(N) element."""

    N: int
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=complex)
        if v.shape[-1] != self.N**2 - 1:
            raise ValueError("coefficient axis must have length N^2 - 1")
        object.__setattr__(self, "values", v)

    @classmethod
    def from_matrix(cls, A):
        A = np.asarray(A)
        return cls(A.shape[-1], decompose(A))

    def matrix(self):
        return reconstruct(self.values, self.N)

    def __getitem__(self, alpha):
        return self.values[..., label_index(alpha, self.N)]


# ---------------------------------------------------------------------------
# section functions


def omega(alpha, N: int, tau: complex):
    return (np.asarray(alpha[0]) + np.asarray(alpha[1]) * tau) / N


def _omegas(N, ctx):
    return np.array([omega(a, N, ctx.tau) for a in labels(N)])


def section_function(kind: str, gamma, z, ctx: EllipticContext, N: int):
    """phi_gamma, f_gamma or F_gamma at z.

    ``gamma`` is a pair of integers or of integer arrays broadcasting with z;
    it is used as given, so E1 terms see the literal half-period.
    """
    z = np.asarray(z, dtype=complex)
    g1, g2 = np.asarray(gamma[0]), np.asarray(gamma[1])
    if np.any((g1 % N == 0) & (g2 % N == 0)):
        raise ValueError("gamma must be nonzero mod N")
    w = (g1 + g2 * ctx.tau) / N
    vf = e_N(g2 * z, N) * phi(w, z, ctx)
    if kind in ("phi", "vf"):
        return vf
    if kind not in ("f", "F"):
        raise ValueError(f"unknown kind {kind!r}")
    # f from efun stays finite where phi(w, z) vanishes (w + z on the lattice)
    fg = e_N(g2 * z, N) * f(w, z, ctx)
    if kind == "f":
        return fg
    # phi_g (E1(z) + E1(w) - E1(w + z)) rewritten without the E1(w + z) pole
    return vf * E1(z, ctx) - fg


def section_table(kind: str, z, ctx: EllipticContext, N: int) -> np.ndarray:
    """All labels at once: array of shape z.shape + (N^2 - 1,)."""
    z = np.asarray(z, dtype=complex)[..., None]
    labs = np.array(labels(N))
    return section_function(kind, (labs[:, 0], labs[:, 1]), z, ctx, N)


@lru_cache(maxsize=4096)
def _const_weights(kind, N, ctx):
    w = _omegas(N, ctx)
    if kind == "wp":
        out = wp(w, ctx)
    elif kind == "E1":
        out = E1(w, ctx)
    else:
        raise ValueError(kind)
    out.setflags(write=False)
    return out


def hat_weights(kind: str, ctx: EllipticContext, N: int, a_point=None, b_point=None):
    """Per-label multipliers of the hat operator of the given kind."""
    if kind in ("wp", "E1"):
        return _const_weights(kind, N, ctx)
    if a_point is None or b_point is None:
        raise ValueError(f"{kind} needs two marked points")
    d = np.asarray(a_point, dtype=complex) - np.asarray(b_point, dtype=complex)
    if np.any(d == 0):
        raise ValueError("coincident marked points")
    base = {"phi_ab": "phi", "f_ab": "f", "F_ab": "F"}.get(kind)
    if base is None:
        raise ValueError(f"unknown hat kind {kind!r}")
    return section_table(base, d, ctx, N)


def apply_hat(kind: str, S, a_point=None, b_point=None, ctx: EllipticContext | None = None, N=None):
    """Multiply coefficients label-wise by the weights of the named hat operator."""
    S = np.asarray(S, dtype=complex)
    if N is None:
        N = int(round(np.sqrt(S.shape[-1] + 1)))
    return S * hat_weights(kind, ctx, N, a_point, b_point)


# ---------------------------------------------------------------------------
# sl(2)

# Pauli index -> (label, sign) with sigma_k = sign * T_label
PAULI = {1: ((0, 1), 1), 2: ((1, 1), 1), 3: ((1, 0), -1)}


def pauli_matrices():
    return {k: s * basis_matrix(lab, 2) for k, (lab, s) in PAULI.items()}


def richardson_derivative(fn, z, h=1e-3):
    """Two central differences at h and h/2 combined to cancel the h^2 term."""
    d1 = (fn(z + h) - fn(z - h)) / (2 * h)
    d2 = (fn(z + h / 2) - fn(z - h / 2)) / h
    return (4 * d2 - d1) / 3


def sl2_tables(ctx: EllipticContext) -> dict:
    """Half-periods and constants for N = 2 keyed by label, plus check residuals."""
    out = {}
    for lab in labels(2):
        w = omega(lab, 2, ctx.tau)
        out[lab] = {
            "omega": complex(w),
            "E1": complex(E1(w, ctx)),
            "wp": complex(wp(w, ctx)),
            # E1(omega) = -2 pi i d omega / d tau
            "E1_closed": -2j * np.pi * lab[1] / 2,
        }
    checks = {}
    checks["E1_closed_form"] = max(abs(v["E1"] - v["E1_closed"]) for v in out.values())
    # additivity with literal half-period sums: omega_(1,0) + omega_(0,1) = omega_(1,1)
    checks["E1_additivity"] = abs(out[(1, 0)]["E1"] + out[(0, 1)]["E1"] - out[(1, 1)]["E1"])
    z = np.array([0.21 + 0.13j, -0.17 + 0.3j, 0.33 - 0.24j, 0.4 + 0.05j]) * (1 + 0j)
    prod_res = der_res = 0.0
    for lab in labels(2):
        b, c = [o for o in labels(2) if o != lab]
        F = section_function("F", lab, z, ctx, 2)
        prod = section_function("phi", b, z, ctx, 2) * section_function("phi", c, z, ctx, 2)
        prod_res = max(prod_res, float(np.max(np.abs(F - prod))))
        d = richardson_derivative(lambda x: section_function("phi", lab, x, ctx, 2), z)
        der_res = max(der_res, float(np.max(np.abs(F + d))))
    checks["F_equals_product"] = prod_res
    checks["F_equals_minus_derivative"] = der_res
    return {"constants": out, "checks": checks}


# ---------------------------------------------------------------------------
# identity suite


def _draw_points(rng, ctx, n, avoid):
    """Triples (z, za, zc) with all pairwise differences off the lattice."""
    pts = efun._draw(
        rng, ctx, avoid, n,
        lambda z, za, zc, *_: (z - za, z - zc, za - zc, 2 * z - za - zc, za - 2 * z + zc),
    )
    return pts[0], pts[1], pts[2]


def _draw_labels(rng, N, n, distinct_sum=True):
    labs = np.array(labels(N))
    b = labs[rng.integers(len(labs), size=n)]
    g = labs[rng.integers(len(labs), size=n)]
    if distinct_sum:
        bad = ((b + g) % N == 0).all(axis=1)
        while bad.any():
            g[bad] = labs[rng.integers(len(labs), size=bad.sum())]
            bad = ((b + g) % N == 0).all(axis=1)
    return (b[:, 0], b[:, 1]), (g[:, 0], g[:, 1])


# finite-difference checks carry their own tolerance
_FD_TOLERANCE = {"sl2_F_equals_minus_derivative": 1e-8}


def suite_tolerance(name: str) -> float:
    return _FD_TOLERANCE.get(name, 1e-9)


def algebra_suite(ctx: EllipticContext, Ns=(2, 3), n_samples: int = 100, seed: int = 0, avoid=0.1):
    """Max residual of the algebra relations and the Fay-type section identities."""
    rng = np.random.default_rng(seed)
    rep: dict[str, float] = {}

    def upd(key, val):
        rep[key] = max(rep.get(key, 0.0), float(np.max(np.abs(val))))

    for N in Ns:
        labs = labels(N)
        T = {a: basis_matrix(a, N) for a in labs}
        for a in labs:
            for b in labs:
                s = (a[0] + b[0], a[1] + b[1])
                upd("product_rule", T[a] @ T[b] - e_N(-cross(a, b) / 2, N) * basis_matrix(s, N))
                c = structure_constant(a, b, N)
                upd("commutator", T[a] @ T[b] - T[b] @ T[a] - c * basis_matrix(s, N))
                upd("c_antisymmetric", c + structure_constant(b, a, N))
                upd("c_shift", c - structure_constant(a, (b[0] + a[0], b[1] + a[1]), N))
                upd("c_negation", structure_constant(b, (-a[0], -a[1]), N) + structure_constant(b, a, N))
                k = killing(T[a], T[b])
                if reduce_label(s, N) == (0, 0):
                    k = k - N * e_N(-cross(a, b) / 2, N) * label_phase(s, N)
                upd("killing", k)
        C = structure_tensor(N)
        A = rng.normal(size=(N, N)) + 1j * rng.normal(size=(N, N))
        A -= np.trace(A) / N * np.eye(N)
        B = rng.normal(size=(N, N)) + 1j * rng.normal(size=(N, N))
        B -= np.trace(B) / N * np.eye(N)
        Sa, Sb = decompose(A), decompose(B)
        upd("roundtrip", (reconstruct(Sa, N) - A) / np.linalg.norm(A))
        upd("structure_tensor", reconstruct(np.einsum("gab,a,b->g", C, Sa, Sb), N) - (A @ B - B @ A))

        # Fay-type identities at random points and labels
        z, za, zc = _draw_points(rng, ctx, n_samples, avoid)
        b, g = _draw_labels(rng, N, n_samples)
        bg = (b[0] + g[0], b[1] + g[1])
        mb, mg = (-b[0], -b[1]), (-g[0], -g[1])
        wb, wg = omega(b, N, ctx.tau), omega(g, N, ctx.tau)

        def sf(kind, lab, x):
            return section_function(kind, lab, x, ctx, N)

        upd(
            "fay_sections",
            sf("phi", g, z - za) * sf("phi", b, z - zc)
            - sf("phi", bg, z - za) * sf("phi", b, za - zc)
            - sf("phi", bg, z - zc) * sf("phi", g, zc - za),
        )
        upd(
            "calogero_sections",
            sf("phi", b, z) * sf("f", g, z)
            - sf("phi", g, z) * sf("f", b, z)
            - sf("phi", bg, z) * (wp(wb, ctx) - wp(wg, ctx)),
        )
        upd("phi_phi_minus", sf("phi", b, z) * sf("phi", mb, z) - (wp(z, ctx) - wp(wb, ctx)))
        upd(
            "phi_product_E1",
            sf("phi", b, z) * sf("phi", g, z)
            - sf("phi", bg, z) * (E1(z, ctx) + E1(wb, ctx) + E1(wg, ctx) - E1(z + wb + wg, ctx)),
        )
        z1, z2 = z - za, z - zc
        upd(
            "phi_same_label_sum",
            sf("phi", g, z1) * sf("phi", g, z2)
            - sf("phi", g, z1 + z2) * (E1(z1, ctx) + E1(z2, ctx) + E1(wg, ctx) - E1(z1 + z2 + wg, ctx)),
        )
        upd(
            "phi_same_label_difference",
            sf("phi", g, z1) * sf("phi", mg, z2)
            + sf("phi", g, z1 - z2) * (E1(z1, ctx) - E1(z2, ctx) + E1(wg, ctx) - E1(z1 - z2 + wg, ctx)),
        )
        upd(
            "f_exchange",
            -sf("phi", b, z - zc) * sf("f", g, z - za)
            + sf("phi", g, z - za) * sf("f", b, z - zc)
            + sf("phi", bg, z - zc) * sf("f", g, zc - za)
            - sf("phi", bg, z - za) * sf("f", b, za - zc),
        )
        for kind in ("phi", "f", "F"):
            v = sf(kind, g, z)
            upd(f"{kind}_section_shift_1", sf(kind, g, z + 1) - e_N(g[1], N) * v)
            expect = e_N(-g[0], N) * v
            if kind == "f":
                expect = expect - 2j * np.pi * e_N(-g[0], N) * sf("phi", g, z)
            upd(f"{kind}_section_shift_tau", sf(kind, g, z + ctx.tau) - expect)
            # class functions do not depend on the label representative
            upd("section_representative", sf(kind, (g[0] + N, g[1] - N), z) - v)
        upd("phi_section_odd", sf("phi", g, -z) + sf("phi", mg, z))

    # sl(2) specifics
    tab = sl2_tables(ctx)
    for k, v in tab["checks"].items():
        rep[f"sl2_{k}"] = v
    sig = pauli_matrices()
    upd("pauli_1", sig[1] - np.array([[0, 1], [1, 0]]))
    upd("pauli_2", sig[2] - np.array([[0, -1j], [1j, 0]]))
    upd("pauli_3", sig[3] - np.array([[1, 0], [0, -1]]))

    z, za, zc = _draw_points(rng, ctx, n_samples, avoid)

    def p(lab, x):
        return section_function("phi", lab, x, ctx, 2)

    cyc = [((1, 0), (0, 1), (1, 1)), ((0, 1), (1, 1), (1, 0)), ((1, 1), (1, 0), (0, 1))]
    for al, be, ga in cyc:
        v = p(al, z)
        upd("sl2_phi_minus_label", p((-al[0], -al[1]), z) - v)
        upd("sl2_phi_odd", p(al, -z) + v)
        upd("sl2_phi_square", v * v - (wp(z, ctx) - wp(omega(al, 2, ctx.tau), ctx)))
        upd("sl2_F_product", section_function("F", al, z, ctx, 2) - p(be, z) * p(ga, z))
        upd(
            "sl2_fay",
            p(ga, z - za) * p(be, z - zc) - p(al, z - za) * p(be, za - zc) + p(al, z - zc) * p(ga, za - zc),
        )
        upd(
            "sl2_fay_cubic_1",
            p(be, z - zc) * p(be, z - za) * p(al, z - za)
            - p(be, z - za) * p(ga, z - za) * p(be, za - zc)
            - p(al, z - zc) * p(al, zc - za) * p(be, zc - za)
            + p(al, z - za) * p(al, zc - za) * p(ga, zc - za),
        )
        upd(
            "sl2_fay_cubic_2",
            p(ga, z - zc) * p(al, z - za) * p(ga, z - za)
            - p(be, z - za) * p(ga, z - za) * p(ga, za - zc)
            - p(al, z - za) * p(al, zc - za) * p(be, za - zc)
            + p(al, z - zc) * p(al, zc - za) * p(ga, za - zc),
        )
    # Table 1: phi_alpha via theta with characteristics
    th1 = efun.theta(z, ctx)
    thp = ctx.theta_prime0
    for lab, (a, b_) in {(1, 0): (0.5, 0.0), (0, 1): (0.0, 0.5), (1, 1): (0.0, 0.0)}.items():
        tz = efun.theta_char(a, b_, z, ctx)
        t0 = efun.theta_char(a, b_, 0.0, ctx)
        upd("sl2_table_theta", p(lab, z) - tz * thp / (t0 * th1))
    return rep
