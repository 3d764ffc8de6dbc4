"""Classical Gaudin magnets with rational or elliptic Lax matrices (0+1 dimensions).

A state is an array ``S`` of shape (n, N, N) holding the traceless residues
S^a of the Lax matrix at the marked points z_a.  Every formula is written
with "kernels" that unify the two cases:

    rational:  phi(d) = 1/d,  F(d) = 1/d^2,  wp-hat = 0
    elliptic:  phi_alpha(d), F_alpha(d), f_alpha(d), wp(omega_alpha)

Hat operators multiply the sin-basis coefficients label by label; in the
rational case they are scalars.  Gradients are matrices G with
dH = sum_c Tr(G^c dS^c), and every flow is dS^c/dt = N [S^c, G^c].

Site indices are 0-based.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property, lru_cache

import numpy as np

from . import salg
from .efun import E1, EllipticContext

__all__ = [
    "GaudinModel",
    "SpinState",
    "Flow",
    "First",
    "Second",
    "H0",
    "Unsupported",
    "lax",
    "m_matrix",
    "hamiltonian",
    "gradient",
    "eom_rhs",
    "flow_from_gradient",
    "lax_residual",
    "poisson_bracket",
    "coefficient_gradient",
    "bracket_flow",
    "generating_check",
    "random_state",
    "eta_prime",
    "eta_prime_residue",
    "phi_constant_term",
]


class Unsupported(ValueError):
    """Requested flow or mode is outside what the model defines."""


@dataclass(frozen=True)
class Flow:
    kind: str  # "first" | "second" | "h0"
    site: int | None = None

    def __post_init__(self):
        if self.kind not in ("first", "second", "h0"):
            raise ValueError(f"unknown flow {self.kind!r}")
        if self.kind != "h0" and self.site is None:
            raise ValueError(f"{self.kind} flow needs a site")

    def __str__(self):
        # 1-based, so that Flow.parse(str(flow)) == flow
        return "H0" if self.kind == "h0" else f"{self.kind.capitalize()}({self.site + 1})"

    @classmethod
    def parse(cls, text: str, one_based: bool = True) -> "Flow":
        """Parse 'First(1)', 'Second(2)' or 'H0'."""
        t = text.strip()
        if t.upper() == "H0":
            return cls("h0")
        name, _, rest = t.partition("(")
        site = int(rest.rstrip(")")) - (1 if one_based else 0)
        return cls(name.strip().lower(), site)


def First(a: int) -> Flow:
    return Flow("first", a)


def Second(a: int) -> Flow:
    return Flow("second", a)


H0 = Flow("h0")


@dataclass(frozen=True)
class GaudinModel:
    kind: str
    N: int
    z: tuple
    lam: tuple
    ctx: EllipticContext | None = None
    k: float = 1.0
    sl2_mode: bool | None = None  # default: on for N = 2

    def __post_init__(self):
        if self.kind not in ("rational", "elliptic"):
            raise ValueError(f"unknown kind {self.kind!r}")
        z = tuple(complex(v) for v in self.z)
        lam = tuple(complex(v) for v in self.lam)
        object.__setattr__(self, "z", z)
        object.__setattr__(self, "lam", lam)
        if len(lam) != len(z):
            raise ValueError("need one orbit level per marked point")
        if any(v == 0 for v in lam):
            raise ValueError("orbit levels must be nonzero")
        for i in range(len(z)):
            for j in range(i):
                if abs(z[i] - z[j]) <= 1e-8:
                    raise ValueError("marked points must be distinct")
        if self.kind == "elliptic" and self.ctx is None:
            object.__setattr__(self, "ctx", EllipticContext())
        mode = self.sl2_mode
        if mode is None:
            mode = self.N == 2
        if mode and self.N != 2:
            raise Unsupported("the H_a/lambda^2 augmentation exists only for N = 2")
        object.__setattr__(self, "sl2_mode", bool(mode))

    @property
    def n(self) -> int:
        return len(self.z)

    @property
    def dim(self) -> int:
        return self.N**2 - 1

    def with_(self, **kw) -> "GaudinModel":
        d = {f: getattr(self, f) for f in ("kind", "N", "z", "lam", "ctx", "k", "sl2_mode")}
        d.update(kw)
        return GaudinModel(**d)

    # kernels --------------------------------------------------------------
    def kernel(self, kind: str, d):
        """Per-label weights of phi / F / f at separation(s) d: shape d.shape + (dim,)."""
        d = np.asarray(d, dtype=complex)
        if self.kind == "rational":
            if kind == "phi":
                w = 1 / d
            elif kind == "F":
                w = 1 / d**2
            else:
                raise Unsupported(f"rational model has no {kind} kernel")
            return np.broadcast_to(w[..., None], d.shape + (self.dim,))
        if d.ndim == 0:
            return _scalar_table(kind, complex(d), self.ctx, self.N)
        return salg.section_table(kind, d, self.ctx, self.N)

    @cached_property
    def _pair(self):
        n = self.n
        out = {}
        kinds = ("phi", "F") if self.kind == "rational" else ("phi", "F", "f")
        for kind in kinds:
            W = np.zeros((n, n, self.dim), dtype=complex)
            for a in range(n):
                for c in range(n):
                    if a != c:
                        W[a, c] = self.kernel(kind, self.z[a] - self.z[c])
            W.setflags(write=False)
            out[kind] = W
        return out

    def pair_weights(self, kind: str) -> np.ndarray:
        """W[a, c] = kernel(kind, z_a - z_c); zero on the diagonal."""
        try:
            return self._pair[kind]
        except KeyError:
            raise Unsupported(f"{self.kind} model has no {kind} kernel") from None

    @cached_property
    def wp_weights(self) -> np.ndarray:
        if self.kind == "rational":
            return np.zeros(self.dim)
        return salg.hat_weights("wp", self.ctx, self.N)

    def e1(self, d):
        """E1 in the elliptic case, 1/d in the rational case."""
        if self.kind == "rational":
            return 1 / np.asarray(d, dtype=complex)
        return E1(d, self.ctx)


@lru_cache(maxsize=4096)
def _scalar_table(kind, d, ctx, N):
    # residual scans evaluate every flow at the same spectral points
    w = salg.section_table(kind, d, ctx, N)
    w.setflags(write=False)
    return w


@dataclass
class SpinState:
    S: np.ndarray
    on_shell: bool = False
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.S = np.asarray(self.S, dtype=complex)
        if self.S.ndim != 3 or self.S.shape[1] != self.S.shape[2]:
            raise ValueError("S must have shape (n, N, N)")

    def coeffs(self):
        return salg.decompose(self.S)

    def to_json(self) -> str:
        return json.dumps(
            {
                "S": [[[[v.real, v.imag] for v in row] for row in m] for m in self.S],
                "on_shell": self.on_shell,
                "meta": self.meta,
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "SpinState":
        d = json.loads(text)
        S = np.array([[[complex(re, im) for re, im in row] for row in m] for m in d["S"]])
        return cls(S, d.get("on_shell", False), d.get("meta", {}))


def _as_array(state):
    return state.S if isinstance(state, SpinState) else np.asarray(state, dtype=complex)


def _hat(W, C, N):
    """Matrix of the coefficients C multiplied label-wise by weights W."""
    return salg.reconstruct(C * W, N)


def _comm(A, B):
    return A @ B - B @ A


def _tr(A, B):
    return np.einsum("...ij,...ji->...", A, B)


# ---------------------------------------------------------------------------
# Lax pair


def lax(model: GaudinModel, state, z) -> np.ndarray:
    """L(z) = sum_c hat(phi(z - z_c)) S^c."""
    S = _as_array(state)
    C = salg.decompose(S)
    z = complex(z)
    for zc in model.z:
        if abs(z - zc) <= 1e-8:
            raise ValueError("L evaluated at a marked point")
    out = np.zeros((model.N, model.N), dtype=complex)
    for c in range(model.n):
        out += _hat(model.kernel("phi", z - model.z[c]), C[c], model.N)
    return out


def _L0(model, C, a):
    """sum_{c != a} phi-hat_{ac}(S^c) as a matrix."""
    W = model.pair_weights("phi")[a]
    return salg.reconstruct(np.sum(C * W, axis=0), model.N)


def hamiltonian_first(model, C, a):
    """H_{1,a} = -(1/N) sum_{c != a} <S^a phi-hat_{ac} S^c>."""
    S_a = salg.reconstruct(C[a], model.N)
    return -_tr(S_a, _L0(model, C, a)) / model.N


def eta_prime(model: GaudinModel, state, a: int) -> np.ndarray:
    """eta'^a = sum_{c != a} phi-hat_{ac}(S^c), plus (H_a/lambda_a^2) S^a in sl(2) mode."""
    S = _as_array(state)
    C = salg.decompose(S)
    eta = _L0(model, C, a)
    if model.sl2_mode:
        eta = eta + hamiltonian_first(model, C, a) / model.lam[a] ** 2 * S[a]
    return eta


def m_matrix(model: GaudinModel, state, flow: Flow, z) -> np.ndarray:
    S = _as_array(state)
    C = salg.decompose(S)
    z = complex(z)
    N = model.N
    if flow.kind == "first":
        a = flow.site
        return _hat(model.kernel("phi", z - model.z[a]), C[a], N)
    if flow.kind == "h0":
        if model.kind == "rational":
            raise Unsupported("H0 is defined for the elliptic model only")
        return -sum(_hat(model.kernel("f", z - model.z[b]), C[b], N) for b in range(model.n))
    a = flow.site
    eta = salg.decompose(eta_prime(model, S, a))
    return _hat(model.kernel("F", z - model.z[a]), C[a], N) + _hat(model.kernel("phi", z - model.z[a]), eta, N)


# ---------------------------------------------------------------------------
# Hamiltonians and gradients


def hamiltonian(model: GaudinModel, state, flow: Flow) -> complex:
    S = _as_array(state)
    C = salg.decompose(S)
    N = model.N
    if flow.kind == "first":
        return complex(hamiltonian_first(model, C, flow.site))
    if flow.kind == "h0":
        if model.kind == "rational":
            raise Unsupported("H0 is defined for the elliptic model only")
        fW = model.pair_weights("f")
        h = sum(_tr(S[c], _hat(model.wp_weights, C[c], N)) for c in range(model.n))
        for b in range(model.n):
            for c in range(model.n):
                if b != c:
                    h -= _tr(S[b], _hat(fW[b, c], C[c], N))
        return complex(h / (2 * N))
    a = flow.site
    L0 = _L0(model, C, a)
    FW = model.pair_weights("F")[a]
    h = _tr(S[a], _hat(model.wp_weights, C[a], N)) / (2 * N)
    h += _tr(S[a], salg.reconstruct(np.sum(C * FW, axis=0), N)) / N
    h -= _tr(L0, L0) / (2 * N)
    if model.sl2_mode:
        h += hamiltonian_first(model, C, a) ** 2 / (2 * model.lam[a] ** 2)
    return complex(h)


def gradient(model: GaudinModel, state, flow: Flow) -> np.ndarray:
    """Matrix gradients G^c, shape (n, N, N), with dH = sum_c Tr(G^c dS^c)."""
    S = _as_array(state)
    C = salg.decompose(S)
    N, n = model.N, model.n
    G = np.zeros_like(S)
    if flow.kind == "first":
        a = flow.site
        phiW = model.pair_weights("phi")
        G[a] = -_L0(model, C, a) / N
        for c in range(n):
            if c != a:
                G[c] = _hat(phiW[c, a], C[a], N) / N
        return G
    if flow.kind == "h0":
        if model.kind == "rational":
            raise Unsupported("H0 is defined for the elliptic model only")
        fW = model.pair_weights("f")
        for d in range(n):
            G[d] = (_hat(model.wp_weights, C[d], N) - salg.reconstruct(np.sum(C * fW[d], axis=0), N)) / N
        return G
    a = flow.site
    phiW, FW = model.pair_weights("phi"), model.pair_weights("F")
    L0 = salg.decompose(_L0(model, C, a))
    G[a] = (_hat(model.wp_weights, C[a], N) + salg.reconstruct(np.sum(C * FW[a], axis=0), N)) / N
    for c in range(n):
        if c != a:
            G[c] = (_hat(FW[c, a], C[a], N) + _hat(phiW[c, a], L0, N)) / N
    if model.sl2_mode:
        Ha = hamiltonian_first(model, C, a)
        G = G + Ha / model.lam[a] ** 2 * gradient(model, S, First(a))
    return G


def flow_from_gradient(model: GaudinModel, state, flow: Flow) -> np.ndarray:
    S = _as_array(state)
    return model.N * _comm(S, gradient(model, S, flow))


def eom_rhs(model: GaudinModel, state, flow: Flow) -> np.ndarray:
    """Closed-form time derivatives dS^c/dt for the selected flow."""
    S = _as_array(state)
    C = salg.decompose(S)
    N, n = model.N, model.n
    out = np.zeros_like(S)
    if flow.kind == "first":
        a = flow.site
        phiW = model.pair_weights("phi")
        out[a] = -_comm(S[a], _L0(model, C, a))
        for b in range(n):
            if b != a:
                out[b] = _comm(S[b], _hat(phiW[b, a], C[a], N))
        return out
    if flow.kind == "h0":
        if model.kind == "rational":
            raise Unsupported("H0 is defined for the elliptic model only")
        fW = model.pair_weights("f")
        for a in range(n):
            out[a] = _comm(S[a], _hat(model.wp_weights, C[a], N)) - _comm(
                S[a], salg.reconstruct(np.sum(C * fW[a], axis=0), N)
            )
        return out
    a = flow.site
    phiW, FW = model.pair_weights("phi"), model.pair_weights("F")
    L0 = _L0(model, C, a)
    eta = eta_prime(model, S, a)
    Ceta = salg.decompose(eta)
    out[a] = (
        _comm(S[a], _hat(model.wp_weights, C[a], N))
        + _comm(S[a], salg.reconstruct(np.sum(C * FW[a], axis=0), N))
        + _comm(L0, eta)
    )
    for b in range(n):
        if b != a:
            out[b] = _comm(S[b], _hat(phiW[b, a], Ceta, N)) + _comm(S[b], _hat(FW[b, a], C[a], N))
    return out


def lax_residual(model: GaudinModel, state, flow: Flow, z, relative: bool = False, perturb: float = 0.0) -> float:
    """Frobenius norm of dL/dt - [L, M] with dL/dt assembled from eom_rhs.

    ``perturb`` scales the equations of motion by (1 + perturb) as a control.

    With ``relative`` the norm is divided by max(1, ||dL/dt||, ||L|| ||M||),
    the size of the terms that cancel, so the roundoff floor does not grow
    as z approaches a marked point.
    """
    S = _as_array(state)
    dS = eom_rhs(model, S, flow) * (1 + perturb)
    dL = lax(model, dS, z)
    L = lax(model, S, z)
    M = m_matrix(model, S, flow, z)
    res = float(np.linalg.norm(dL - _comm(L, M)))
    if not relative:
        return res
    scale = max(1.0, float(np.linalg.norm(dL)), float(np.linalg.norm(L) * np.linalg.norm(M)))
    return res / scale


# ---------------------------------------------------------------------------
# Poisson structure


def coefficient_gradient(G: np.ndarray) -> np.ndarray:
    """dH/dS_alpha = Tr(T_alpha G) for each site: shape (n, N^2 - 1)."""
    N = G.shape[-1]
    return np.einsum("kij,...ji->...k", salg.basis_tensor(N), G)


def poisson_bracket(model: GaudinModel, grad_F, grad_G, state) -> complex:
    """sum_c sum_{alpha,beta} dF/dS^c_alpha dG/dS^c_beta C^gamma_{alpha beta} S^c_gamma.

    Gradients are coefficient gradients of shape (n, N^2 - 1).
    """
    C = salg.decompose(_as_array(state))
    Ct = salg.structure_tensor(model.N)
    return complex(np.einsum("ca,cb,gab,cg->", grad_F, grad_G, Ct, C))


def bracket_flow(model: GaudinModel, state, flow: Flow) -> np.ndarray:
    """{H, S^c_gamma} assembled from the structure constants, as matrices."""
    S = _as_array(state)
    C = salg.decompose(S)
    gH = coefficient_gradient(gradient(model, S, flow))
    Ct = salg.structure_tensor(model.N)
    # {H, S_g} = sum_a dH/dS_a C^d_{a g} S_d
    dC = np.einsum("ca,dag,cd->cg", gH, Ct, C)
    return salg.reconstruct(dC, model.N)


# ---------------------------------------------------------------------------
# checks


def generating_check(model: GaudinModel, state, z) -> float:
    """|(1/2N)<L^2(z)> - sum_c (H2_c K2(z - z_c) - H1_c K1(z - z_c)) + H0|.

    K2 = wp, K1 = E1 in the elliptic case; K2 = 1/d^2, K1 = 1/d, H0 = 0 rationally.
    """
    S = _as_array(state)
    C = salg.decompose(S)
    N = model.N
    L = lax(model, S, z)
    lhs = _tr(L, L) / (2 * N)
    rhs = 0
    for c in range(model.n):
        d = complex(z) - model.z[c]
        H2 = _tr(S[c], S[c]) / (2 * N)
        H1 = hamiltonian_first(model, C, c)
        if model.kind == "rational":
            rhs += H2 / d**2 - H1 / d
        else:
            from .efun import wp

            rhs += H2 * wp(d, model.ctx) - H1 * E1(d, model.ctx)
    if model.kind == "elliptic":
        rhs -= hamiltonian(model, S, H0)
    return float(abs(lhs - rhs))


def phi_constant_term(model: GaudinModel) -> np.ndarray:
    """Regular part of phi_gamma at 0: E1(omega_gamma) + 2 pi i gamma_2 / N (zero rationally).

    It vanishes for N = 2, where the sections are odd.
    """
    if model.kind == "rational":
        return np.zeros(model.dim, dtype=complex)
    labs = np.array(salg.labels(model.N))
    om = (labs[:, 0] + labs[:, 1] * model.ctx.tau) / model.N
    return E1(om, model.ctx) + 2j * np.pi * labs[:, 1] / model.N


def eta_prime_residue(model: GaudinModel, state, a: int, radius=1e-2, nodes=64) -> np.ndarray:
    """Res_{z=z_a} L(z)/(z - z_a) by the trapezoid rule on a small circle.

    This is sum_{c != a} phi-hat_{ac} S^c plus the regular part of phi-hat at 0
    applied to S^a; the second piece is absent for N = 2.
    """
    S = _as_array(state)
    th = 2 * np.pi * np.arange(nodes) / nodes
    pts = model.z[a] + radius * np.exp(1j * th)
    return sum(lax(model, S, p) for p in pts) / nodes


def orbit_eigenvalues(N: int, lam: complex) -> np.ndarray:
    """Traceless spectrum with top eigenvalue lam: (lam, ..., -lam) evenly spaced."""
    if N == 2:
        return np.array([lam, -lam])
    return lam * np.linspace(1, -1, N)


def random_state(model: GaudinModel, rng: np.random.Generator, scale: float = 1.0, unitary: bool = False) -> SpinState:
    """On-shell state S^a = g_a diag(spectrum) g_a^{-1} with random complex g_a.

    ``unitary=True`` draws g_a unitary, so |S^a| equals the level (Hermitian
    S^a for real levels); ``scale`` is then ignored.
    """
    N = model.N
    out = []
    for a in range(model.n):
        if unitary:
            g, R = np.linalg.qr(rng.normal(size=(N, N)) + 1j * rng.normal(size=(N, N)))
            g = g * (np.diag(R) / np.abs(np.diag(R)))
        else:
            while True:
                g = np.eye(N) + scale * (rng.normal(size=(N, N)) + 1j * rng.normal(size=(N, N))) / np.sqrt(2 * N)
                if abs(np.linalg.det(g)) > 0.2:
                    break
        D = np.diag(orbit_eigenvalues(N, model.lam[a]))
        out.append(g @ D @ np.linalg.inv(g))
    return SpinState(np.array(out), on_shell=True)
