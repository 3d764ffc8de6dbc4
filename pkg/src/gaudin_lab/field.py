"""1+1 Gaudin models: periodic loop fields S^a(x), x in [0, 2 pi).

Fields come from two backends.  The orbit backend is closed form,
S(x) = g(x) D g(x)^{-1} with g(x) a product of periodic one-parameter
subgroups, so S, S_x and S_xx are exact and the eigenvalues are constant.
The fourier backend stores modes -M..M of every matrix entry.

All pointwise formulas act on a ``Jets`` bundle holding S, S_x, S_xx with
shape (n, P, N, N): n sites, P sample points.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from . import salg
from .mech import First, Flow, GaudinModel, Unsupported, orbit_eigenvalues, phi_constant_term

__all__ = [
    "OrbitFactor",
    "OrbitField",
    "FourierField",
    "LoopState",
    "Jets",
    "sample_orbit_field",
    "random_loop_state",
    "eta_field",
    "field_eom_rhs",
    "general_second_rhs",
    "e1_extra_terms",
    "zero_curvature_residual",
    "pcm_scenario",
    "PCMReport",
    "heisenberg_rhs",
    "landau_lifshitz_rhs",
    "first_hamiltonian_density",
]


def _comm(A, B):
    return A @ B - B @ A


def _tr(A, B):
    return np.einsum("...ij,...ji->...", A, B)


# ---------------------------------------------------------------------------
# backends


@dataclass(frozen=True)
class OrbitFactor:
    """exp(theta(x) X) with X = V diag(i k) V^{-1} and integer k.

    theta(x) = m x + sum_j (a_j cos(j x) + b_j sin(j x)); integer m and k
    make the factor 2 pi periodic.
    """

    V: np.ndarray
    k: tuple
    winding: int
    cos: tuple = ()
    sin: tuple = ()

    def __post_init__(self):
        if float(self.winding) != int(self.winding):
            raise ValueError("winding number must be an integer")
        if any(float(v) != int(v) for v in self.k):
            raise ValueError("generator weights must be integers")
        object.__setattr__(self, "winding", int(self.winding))
        object.__setattr__(self, "k", tuple(int(v) for v in self.k))
        object.__setattr__(self, "V", np.asarray(self.V, dtype=complex))

    @cached_property
    def Vinv(self):
        return np.linalg.inv(self.V)

    @cached_property
    def X(self):
        return self.V @ np.diag(1j * np.array(self.k, dtype=float)) @ self.Vinv

    def theta(self, x):
        """theta, theta', theta'' at x."""
        x = np.asarray(x, dtype=float)
        t, d1, d2 = self.winding * x, np.full_like(x, self.winding, dtype=float), np.zeros_like(x)
        for j, (a, b) in enumerate(zip(self.cos, self.sin), start=1):
            c, s = np.cos(j * x), np.sin(j * x)
            t = t + a * c + b * s
            d1 = d1 + j * (b * c - a * s)
            d2 = d2 - j * j * (a * c + b * s)
        return t, d1, d2

    def exp(self, theta):
        ph = np.exp(1j * theta[..., None] * np.array(self.k, dtype=float))
        return np.einsum("ij,...j,jk->...ik", self.V, ph, self.Vinv)


@dataclass(frozen=True)
class OrbitField:
    """S(x) = g(x) D g(x)^{-1}, g = g0 E_1(x) ... E_r(x), D = h0 diag(spectrum) h0^{-1}."""

    lam: complex
    g0: np.ndarray
    factors: tuple
    h0: np.ndarray | None = None
    backend = "orbit"

    def __post_init__(self):
        object.__setattr__(self, "g0", np.asarray(self.g0, dtype=complex))
        object.__setattr__(self, "factors", tuple(self.factors))
        if self.h0 is not None:
            object.__setattr__(self, "h0", np.asarray(self.h0, dtype=complex))

    @property
    def N(self):
        return self.g0.shape[0]

    @cached_property
    def D(self):
        D = np.diag(orbit_eigenvalues(self.N, complex(self.lam)))
        return D if self.h0 is None else self.h0 @ D @ np.linalg.inv(self.h0)

    def evaluate(self, x):
        """S, S_x, S_xx, A = g_x g^{-1} and A_x at points x, each of shape (P, N, N)."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        P, N = x.size, self.N
        g = np.broadcast_to(self.g0, (P, N, N)).copy()
        A = np.zeros((P, N, N), dtype=complex)
        Ax = np.zeros((P, N, N), dtype=complex)
        for fac in self.factors:
            t, d1, d2 = fac.theta(x)
            Y = g @ fac.X @ np.linalg.inv(g)  # P_j X_j P_j^{-1}
            Ax = Ax + d2[:, None, None] * Y + d1[:, None, None] * _comm(A, Y)
            A = A + d1[:, None, None] * Y
            g = g @ fac.exp(t)
        S = g @ self.D @ np.linalg.inv(g)
        Sx = _comm(A, S)
        Sxx = _comm(Ax, S) + _comm(A, Sx)
        return S, Sx, Sxx, A, Ax

    def to_dict(self):
        return {
            "backend": "orbit",
            "lam": [complex(self.lam).real, complex(self.lam).imag],
            "g0": _cplx_list(self.g0),
            "factors": [
                {"V": _cplx_list(f.V), "k": list(f.k), "winding": f.winding, "cos": list(f.cos), "sin": list(f.sin)}
                for f in self.factors
            ],
        } | ({} if self.h0 is None else {"h0": _cplx_list(self.h0)})


@dataclass(frozen=True)
class FourierField:
    """Matrix field with modes -M..M stored as an array (2M+1, N, N)."""

    modes: np.ndarray
    backend = "fourier"

    def __post_init__(self):
        m = np.asarray(self.modes, dtype=complex)
        if m.ndim != 3 or m.shape[0] % 2 != 1:
            raise ValueError("modes must have shape (2M+1, N, N)")
        object.__setattr__(self, "modes", m)

    @property
    def M(self):
        return (self.modes.shape[0] - 1) // 2

    @property
    def N(self):
        return self.modes.shape[1]

    @property
    def wavenumbers(self):
        return np.arange(-self.M, self.M + 1)

    @classmethod
    def from_samples(cls, values, M: int) -> "FourierField":
        """Modes -M..M of samples on the equispaced grid x_j = 2 pi j / G."""
        values = np.asarray(values, dtype=complex)
        G = values.shape[0]
        if G < 2 * M + 1:
            raise ValueError("grid too coarse for the requested modes")
        c = np.fft.fft(values, axis=0) / G
        idx = np.arange(-M, M + 1) % G
        return cls(c[idx])

    def evaluate(self, x):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        kk = self.wavenumbers
        e = np.exp(1j * np.outer(x, kk))
        S = np.einsum("pk,kij->pij", e, self.modes)
        Sx = np.einsum("pk,kij->pij", e * (1j * kk), self.modes)
        Sxx = np.einsum("pk,kij->pij", e * (-(kk**2)), self.modes)
        return S, Sx, Sxx, None, None

    def on_grid(self, G: int):
        """S, S_x, S_xx on the G-point grid by inverse FFT."""
        return _grid_from_modes(self.modes, G)

    def to_dict(self):
        return {"backend": "fourier", "M": self.M, "modes": _cplx_list(self.modes)}


def _grid_from_modes(modes, G):
    M = (modes.shape[0] - 1) // 2
    if G < 2 * M + 1:
        raise ValueError("grid too coarse for the stored modes")
    kk = np.arange(-M, M + 1)
    out = []
    for mult in (np.ones_like(kk, dtype=complex), 1j * kk, -(kk**2) + 0j):
        full = np.zeros((G,) + modes.shape[1:], dtype=complex)
        full[kk % G] = modes * mult[:, None, None]
        out.append(np.fft.ifft(full, axis=0) * G)
    return tuple(out)


def _cplx_list(a):
    a = np.asarray(a, dtype=complex)
    return np.stack([a.real, a.imag], axis=-1).tolist()


def _cplx_array(lst):
    a = np.asarray(lst, dtype=float)
    return a[..., 0] + 1j * a[..., 1]


def field_from_dict(d) -> OrbitField | FourierField:
    if d["backend"] == "fourier":
        return FourierField(_cplx_array(d["modes"]))
    factors = tuple(
        OrbitFactor(_cplx_array(f["V"]), tuple(f["k"]), f["winding"], tuple(f["cos"]), tuple(f["sin"]))
        for f in d["factors"]
    )
    h0 = _cplx_array(d["h0"]) if "h0" in d else None
    return OrbitField(complex(*d["lam"]), _cplx_array(d["g0"]), factors, h0)


@dataclass
class Jets:
    """S, S_x, S_xx of every site at P points: arrays of shape (n, P, N, N)."""

    S: np.ndarray
    Sx: np.ndarray
    Sxx: np.ndarray
    A: np.ndarray | None = None  # g_x g^{-1} (orbit backend only)
    Ax: np.ndarray | None = None

    @property
    def n(self):
        return self.S.shape[0]

    @property
    def N(self):
        return self.S.shape[-1]


@dataclass
class LoopState:
    fields: list
    G: int = 256
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.G < 4 or self.G & (self.G - 1):
            raise ValueError("grid size must be a power of two")
        Ns = {f.N for f in self.fields}
        if len(Ns) != 1:
            raise ValueError("all sites must share N")
        for f in self.fields:
            if isinstance(f, FourierField) and self.G < 2 * f.M + 1:
                raise ValueError("grid too coarse for the stored modes")

    @property
    def n(self):
        return len(self.fields)

    @property
    def N(self):
        return self.fields[0].N

    @property
    def grid(self):
        return 2 * np.pi * np.arange(self.G) / self.G

    def jets(self, x=None) -> Jets:
        """Jets on the grid (default) or at the given points."""
        parts = []
        for f in self.fields:
            if x is None and isinstance(f, FourierField):
                parts.append(f.on_grid(self.G) + (None, None))
            else:
                parts.append(f.evaluate(self.grid if x is None else x))
        S, Sx, Sxx = (np.array([p[i] for p in parts]) for i in range(3))
        if all(p[3] is not None for p in parts):
            return Jets(S, Sx, Sxx, np.array([p[3] for p in parts]), np.array([p[4] for p in parts]))
        return Jets(S, Sx, Sxx)

    def to_fourier(self, M: int = 64) -> "LoopState":
        """Resample every site onto modes -M..M from the grid values."""
        J = self.jets()
        return LoopState([FourierField.from_samples(J.S[a], M) for a in range(self.n)], self.G, dict(self.meta))

    def to_json(self) -> str:
        return json.dumps({"G": self.G, "fields": [f.to_dict() for f in self.fields], "meta": self.meta})

    @classmethod
    def from_json(cls, text) -> "LoopState":
        d = json.loads(text)
        return cls([field_from_dict(f) for f in d["fields"]], d["G"], d.get("meta", {}))


def _random_V(rng, N):
    """Random unitary, so that every factor stays bounded on the real line."""
    Q, R = np.linalg.qr(rng.normal(size=(N, N)) + 1j * rng.normal(size=(N, N)))
    return Q * (np.diag(R) / np.abs(np.diag(R)))


def sample_orbit_field(lam, phase_spec: dict | None = None, seed: int = 0, N: int = 2) -> OrbitField:
    """Random closed-form orbit field with constant spectrum.

    phase_spec keys: factors (number of subgroup factors, default 3),
    max_winding (default 1), modes (trig modes per phase, default 2),
    amplitude (default 0.3), g0_scale (default 0.5), windings (explicit list),
    g0 ("random" default; "unitary" draws g0 unitary, so that an imaginary
    level gives an anti-Hermitian field; "equator" is the unitary map of the
    first diagonal direction onto the first off-diagonal one, which keeps
    S_12 away from zero for small amplitudes).
    All-zero amplitude and winding gives a constant field.
    """
    spec = {"factors": 3, "max_winding": 1, "modes": 2, "amplitude": 0.3, "g0_scale": 0.5}
    spec.update(phase_spec or {})
    rng = np.random.default_rng(seed)
    nf = int(spec["factors"])
    windings = spec.get("windings")
    if windings is None:
        windings = rng.integers(-spec["max_winding"], spec["max_winding"] + 1, size=nf)
    if len(windings) != nf:
        raise ValueError("need one winding number per factor")
    for w in windings:
        if float(w) != int(w):
            raise ValueError("winding numbers must be integers (periodicity)")
    weights = np.zeros(N, dtype=int)
    weights[0], weights[-1] = 1, -1
    g0 = np.eye(N) + spec["g0_scale"] * (rng.normal(size=(N, N)) + 1j * rng.normal(size=(N, N))) / np.sqrt(N)
    h0 = None
    choice = spec.get("g0", "random")
    if choice == "unitary":
        g0 = _random_V(rng, N)
    elif choice == "equator":
        g0 = np.eye(N, dtype=complex)
        h0 = np.eye(N, dtype=complex)
        h0[[0, 0, -1, -1], [0, -1, 0, -1]] = np.array([1, 1, 1, -1]) / np.sqrt(2)
    elif choice != "random":
        raise ValueError(f"unknown g0 choice {choice!r}")
    factors = []
    for j in range(nf):
        amp = spec["amplitude"] / np.arange(1, spec["modes"] + 1)
        factors.append(
            OrbitFactor(
                _random_V(rng, N),
                tuple(rng.permutation(weights)),
                int(windings[j]),
                tuple(amp * rng.normal(size=spec["modes"])),
                tuple(amp * rng.normal(size=spec["modes"])),
            )
        )
    return OrbitField(complex(lam), g0, tuple(factors), h0)


def random_loop_state(model: GaudinModel, seed: int = 0, G: int = 256, phase_spec: dict | None = None) -> LoopState:
    rng = np.random.default_rng(seed)
    seeds = rng.integers(0, 2**31, size=model.n)
    fields = [sample_orbit_field(model.lam[a], phase_spec, int(seeds[a]), model.N) for a in range(model.n)]
    return LoopState(fields, G)


def _jets(model, state) -> Jets:
    J = state if isinstance(state, Jets) else state.jets()
    if J.n != model.n or J.N != model.N:
        raise ValueError("loop state does not match the model")
    return J


# ---------------------------------------------------------------------------
# equations of motion


def _hat(W, C, N):
    return salg.reconstruct(C * W, N)


def _sum_hat(model, W_row, C):
    """sum_c W[c] * C[c] as matrices; W_row (n, dim), C (n, P, dim)."""
    return salg.reconstruct(np.einsum("cd,cpd->pd", W_row, C), model.N)


def first_hamiltonian_density(model, J: Jets, a):
    """H_a(S(x)) = -(1/N) <S^a L0_a> pointwise, with its x-derivative."""
    C, Cx = salg.decompose(J.S), salg.decompose(J.Sx)
    W = model.pair_weights("phi")[a]
    L0, L0x = _sum_hat(model, W, C), _sum_hat(model, W, Cx)
    H = -_tr(J.S[a], L0) / model.N
    Hx = -(_tr(J.Sx[a], L0) + _tr(J.S[a], L0x)) / model.N
    return H, Hx


def eta_field(model: GaudinModel, state, a: int):
    """eta^a, its x-derivative and Delta eta^a (sl(2) closed form).

    eta = -(k / 4 lambda^2) [S, S_x] + sum phi-hat_{ac} S^c + (H_a / lambda^2) S,
    the last term only when the model is in sl(2) mode.
    """
    if model.N != 2:
        raise Unsupported("the closed form of Delta eta exists for N = 2 only")
    J = _jets(model, state)
    k, lam2 = model.k, model.lam[a] ** 2
    S, Sx, Sxx = J.S[a], J.Sx[a], J.Sxx[a]
    C, Cx = salg.decompose(J.S), salg.decompose(J.Sx)
    W = model.pair_weights("phi")[a]
    d_eta = -(k / (4 * lam2)) * _comm(S, Sx)
    d_eta_x = -(k / (4 * lam2)) * _comm(S, Sxx)
    eta = d_eta + _sum_hat(model, W, C)
    eta_x = d_eta_x + _sum_hat(model, W, Cx)
    if model.sl2_mode:
        H, Hx = first_hamiltonian_density(model, J, a)
        eta = eta + (H / lam2)[:, None, None] * S
        eta_x = eta_x + (Hx / lam2)[:, None, None] * S + (H / lam2)[:, None, None] * Sx
    return eta, eta_x, d_eta


def _second_common(model, J, a, eta):
    """Right-hand sides of the second flow without the k eta_x transport term."""
    N = model.N
    C = salg.decompose(J.S)
    phiW, FW = model.pair_weights("phi"), model.pair_weights("F")
    L0 = _sum_hat(model, phiW[a], C)
    Ceta = salg.decompose(eta)
    out = np.zeros_like(J.S)
    out[a] = (
        _comm(J.S[a], _hat(model.wp_weights, C[a], N))
        + _comm(J.S[a], _sum_hat(model, FW[a], C))
        + _comm(L0, eta)
    )
    for b in range(model.n):
        if b != a:
            out[b] = _comm(J.S[b], _hat(phiW[b, a], Ceta, N)) + _comm(J.S[b], _hat(FW[b, a], C[a], N))
    return out


def field_eom_rhs(model: GaudinModel, state, flow: Flow) -> np.ndarray:
    """Pointwise d S^c / dt, shape (n, P, N, N)."""
    J = _jets(model, state)
    N = model.N
    if flow.kind == "first":
        a = flow.site
        C = salg.decompose(J.S)
        phiW = model.pair_weights("phi")
        out = np.zeros_like(J.S)
        out[a] = model.k * J.Sx[a] - _comm(J.S[a], _sum_hat(model, phiW[a], C))
        for b in range(model.n):
            if b != a:
                out[b] = _comm(J.S[b], _hat(phiW[b, a], C[a], N))
        return out
    if flow.kind == "second":
        a = flow.site
        eta, eta_x, _ = eta_field(model, J, a)
        out = _second_common(model, J, a, eta)
        out[a] = out[a] + model.k * eta_x
        return out
    raise Unsupported("field flows are First(a) and Second(a)")


def e1_extra_terms(model: GaudinModel, S, d_eta, weights: str = "regular"):
    """[E1-hat S, d_eta] + [S, E1-hat d_eta] - E1-hat [S, d_eta].

    ``weights="regular"`` uses the constant term of phi_gamma at zero,
    E1(omega_gamma) + 2 pi i gamma_2 / N, which is what the expansion of the
    M-matrix produces; ``weights="E1"`` uses E1(omega_gamma) alone.
    """
    if weights == "regular":
        w = phi_constant_term(model)
    elif weights == "E1":
        w = np.zeros(model.dim, dtype=complex) if model.kind == "rational" else salg.hat_weights("E1", model.ctx, model.N)
    else:
        raise ValueError(weights)
    N = model.N
    e1 = lambda X: _hat(w, salg.decompose(X), N)
    return _comm(e1(S), d_eta) + _comm(S, e1(d_eta)) - e1(_comm(S, d_eta))


def general_second_rhs(model: GaudinModel, state, a: int, d_eta, d_eta_x, weights: str = "regular"):
    """Second flow for any N with a supplied solution of -k S_x = [S, d_eta].

    eta = sum phi-hat_{ac} S^c + d_eta; the site-a equation carries the three
    E1-hat terms.  The sl(2) H_a term is not included.
    """
    J = _jets(model, state)
    C, Cx = salg.decompose(J.S), salg.decompose(J.Sx)
    W = model.pair_weights("phi")[a]
    eta = _sum_hat(model, W, C) + d_eta
    eta_x = _sum_hat(model, W, Cx) + d_eta_x
    out = _second_common(model, J, a, eta)
    out[a] = out[a] + model.k * eta_x + e1_extra_terms(model, J.S[a], d_eta, weights)
    return out, eta, eta_x


# ---------------------------------------------------------------------------
# zero curvature


def _lax_at(model, S, z):
    """L(z) at every point: S (n, P, N, N) -> (P, N, N)."""
    C = salg.decompose(S)
    out = 0
    for c in range(model.n):
        out = out + _hat(model.kernel("phi", z - model.z[c]), C[c], model.N)
    return out


def _m_field(model, J, flow, z, eta=None, eta_x=None):
    """M(z) and d/dx M(z) for the field flows."""
    N = model.N
    a = flow.site
    d = z - model.z[a]
    C, Cx = salg.decompose(J.S[a]), salg.decompose(J.Sx[a])
    phiw = model.kernel("phi", d)
    if flow.kind == "first":
        return _hat(phiw, C, N), _hat(phiw, Cx, N)
    Fw = model.kernel("F", d)
    M = _hat(Fw, C, N) + _hat(phiw, salg.decompose(eta), N)
    Mx = _hat(Fw, Cx, N) + _hat(phiw, salg.decompose(eta_x), N)
    return M, Mx


def zero_curvature_residual(
    model: GaudinModel, state, flow: Flow, z, x=None, perturb: float = 0.0, d_eta=None
) -> np.ndarray:
    """||d_t L - k d_x M - [L, M]||_F at spectral point z and the points x.

    ``perturb`` scales the equations of motion by (1 + perturb) as a control.
    ``d_eta`` = (d_eta, d_eta_x) selects the general-N second flow.
    """
    J = state.jets(x) if isinstance(state, LoopState) else state
    z = complex(z)
    if flow.kind == "first":
        rhs = field_eom_rhs(model, J, flow)
        M, Mx = _m_field(model, J, flow, z)
    elif flow.kind == "second":
        if d_eta is not None:
            rhs, eta, eta_x = general_second_rhs(model, J, flow.site, *d_eta)
        else:
            rhs = field_eom_rhs(model, J, flow)
            eta, eta_x, _ = eta_field(model, J, flow.site)
        M, Mx = _m_field(model, J, flow, z, eta, eta_x)
    else:
        raise Unsupported("field flows are First(a) and Second(a)")
    rhs = rhs * (1 + perturb)
    L = _lax_at(model, J.S, z)
    Lt = _lax_at(model, rhs, z)
    res = Lt - model.k * Mx - _comm(L, M)
    return np.linalg.norm(res, axis=(-2, -1))


# ---------------------------------------------------------------------------
# reductions


def heisenberg_rhs(S, Sxx, k, lam):
    """d_t S = -(k^2 / 4 lambda^2) [S, S_xx]."""
    return -(k**2) / (4 * lam**2) * _comm(S, Sxx)


def landau_lifshitz_rhs(model: GaudinModel, S, Sxx, lam):
    """d_t S = -(k^2 / 4 lambda^2) [S, S_xx] + [S, wp-hat S]."""
    wpS = _hat(model.wp_weights, salg.decompose(S), model.N)
    return heisenberg_rhs(S, Sxx, model.k, lam) + _comm(S, wpS)


@dataclass
class PCMReport:
    conservation: float  # max |d_t l0 - k d_x l1 - closed form|
    traditional: float  # max |d_t l1 - k d_x l0 + (2/(z1-z2)) [l1, l0]| (rational)
    light_cone: float  # max over both light-cone equations
    l0_flux: float  # max |d_t l0 - k d_x l1| (vanishes in the rational model)
    stationary: float | None = None  # elliptic-top residual of the stationary reduction
    stationary_xi: float | None = None  # |d_xi S^2| on the reduced configuration

    def max(self):
        vals = [self.conservation, self.light_cone]
        if self.traditional == self.traditional:
            vals.append(self.traditional)
        if self.stationary is not None:
            vals += [self.stationary, self.stationary_xi]
        return max(vals)


def pcm_flow_rhs(model: GaudinModel, state):
    """d_t = d_{t_1} - d_{t_2} for two sites."""
    if model.n != 2:
        raise ValueError("the principal chiral reduction needs n = 2")
    return field_eom_rhs(model, state, First(0)) - field_eom_rhs(model, state, First(1))


def pcm_scenario(model: GaudinModel, state, stationary: bool = True) -> PCMReport:
    """Check the principal chiral form of the two-site first flow."""
    if model.n != 2:
        raise ValueError("the principal chiral reduction needs n = 2")
    J = _jets(model, state)
    k, N = model.k, model.N
    dS = pcm_flow_rhs(model, J)
    C = salg.decompose(J.S)
    phiW = model.pair_weights("phi")
    S1, S2 = J.S
    p12 = _hat(phiW[0, 1], C[1], N)  # phi-hat_12 S^2
    p21 = _hat(phiW[1, 0], C[0], N)  # phi-hat_21 S^1
    l0_t, l1_t = dS[0] + dS[1], dS[0] - dS[1]
    l0_x, l1_x = J.Sx[0] + J.Sx[1], J.Sx[0] - J.Sx[1]
    flux = l0_t - k * l1_x
    expected = -2 * _comm(S1, p12) + 2 * _comm(S2, p21)
    conservation = np.abs(flux - expected).max()
    if model.kind == "rational":
        d = model.z[0] - model.z[1]
        l0, l1 = S1 + S2, S1 - S2
        traditional = np.abs(l1_t - k * l0_x + (2 / d) * _comm(l1, l0)).max()
    else:
        traditional = float("nan")
    # light cone: d_eta = d_t - k d_x, d_xi = d_t + k d_x
    lc1 = np.abs(dS[0] - k * J.Sx[0] + 2 * _comm(S1, p12)).max()
    lc2 = np.abs(dS[1] + k * J.Sx[1] - 2 * _comm(S2, p21)).max()
    rep = PCMReport(float(conservation), float(traditional), float(max(lc1, lc2)), float(np.abs(flux).max()))
    if stationary:
        # S^2 = -(1/2) phi-hat_21 S^1 then d_eta S^1 = [S^1, wp-hat S^1]
        S2s = -0.5 * p21
        C2 = salg.decompose(S2s)
        d_eta_S1 = -2 * _comm(S1, _hat(phiW[0, 1], C2, N))
        top = _comm(S1, _hat(model.wp_weights, C[0], N))
        rep.stationary = float(np.abs(d_eta_S1 - top).max())
        rep.stationary_xi = float(np.abs(2 * _comm(S2s, p21)).max())
    return rep
