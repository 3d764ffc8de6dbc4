"""Fixed-step RK4 integration of the 0+1 flows and the 1+1 field flows.

1+1 states are kept as Fourier modes -M..M of every site.  The right-hand
side is evaluated on an oversampled grid of at least 3(2M+1) points, so the
cubic products of the second flows do not alias back into the kept band,
and the result is truncated to the band again.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
import numpy as np

from .field import FourierField, Jets, LoopState, field_eom_rhs, pcm_flow_rhs
from .mech import H0, First, Flow, GaudinModel, SpinState, Unsupported, eom_rhs, hamiltonian, orbit_eigenvalues

log = logging.getLogger(__name__)

__all__ = [
    "BlowUp",
    "EvolutionSpec",
    "Trajectory",
    "SCENARIOS",
    "resolve_flow",
    "cfl_dt",
    "dealias_grid",
    "step",
    "evolve",
]

MONITORS = frozenset({"casimirs", "hamiltonians", "zero_curvature_spotcheck"})


class BlowUp(RuntimeError):
    """Non-finite or runaway values; carries the last good time and state."""

    def __init__(self, msg, t_last, state_last, partial=None):
        super().__init__(msg)
        self.t_last = t_last
        self.state_last = state_last
        self.partial = partial  # Trajectory recorded up to t_last


@dataclass
class EvolutionSpec:
    dt: float
    T: float
    output_every: int = 1
    monitors: frozenset = MONITORS
    project_casimir: bool = False  # rescale S onto its orbit level after every step
    blowup: float = 1e8

    def __post_init__(self):
        self.monitors = frozenset(self.monitors)
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.T < self.dt:
            raise ValueError("T must be at least dt")
        if int(self.output_every) < 1:
            raise ValueError("output_every must be >= 1")
        if not self.monitors <= MONITORS:
            raise ValueError(f"unknown monitors {sorted(self.monitors - MONITORS)}")

    @property
    def n_steps(self):
        return int(round(self.T / self.dt))


@dataclass
class Trajectory:
    times: np.ndarray
    snapshots: list
    monitors: dict  # name -> complex array over times
    drift: dict = field(default_factory=dict)  # name -> max |Q(t) - Q(0)|

    def __post_init__(self):
        for k, v in self.monitors.items():
            if len(v) != len(self.times):
                raise ValueError(f"monitor {k} does not match the sample times")

    def max_drift(self, prefix=""):
        vals = [v for k, v in self.drift.items() if k.startswith(prefix)]
        return max(vals) if vals else 0.0


# ---------------------------------------------------------------------------
# flows


def _pcm(model, J):
    return pcm_flow_rhs(model, J)


SCENARIOS = {
    # name -> (required kind or None, required n, flow)
    "pcm": (None, 2, "pcm"),
    "cherednik2site": ("elliptic", 2, "pcm"),
    "heisenberg": ("rational", 1, "Second(1)"),
    "ll": ("elliptic", 1, "Second(1)"),
}


def resolve_flow(model: GaudinModel, flow) -> Flow | str:
    """Flow, Flow string (1-based) or scenario name -> Flow or "pcm"."""
    if isinstance(flow, Flow):
        return flow
    name = str(flow).strip()
    if name in SCENARIOS:
        kind, n, fl = SCENARIOS[name]
        if kind is not None and model.kind != kind:
            raise ValueError(f"scenario {name} needs a {kind} model")
        if model.n != n:
            raise ValueError(f"scenario {name} needs n = {n}")
        return fl if fl == "pcm" else Flow.parse(fl)
    return Flow.parse(name)


def _field_rhs(model, J, flow):
    if flow == "pcm":
        return _pcm(model, J)
    return field_eom_rhs(model, J, flow)


# ---------------------------------------------------------------------------
# 1+1 spectral machinery


def dealias_grid(M: int) -> int:
    """Smallest power of two >= 3(2M+1)."""
    g = 1
    while g < 3 * (2 * M + 1):
        g *= 2
    return g


def _wavenumbers(M):
    return np.arange(-M, M + 1)


def _modes_to_grid(modes, P):
    """modes (..., 2M+1, N, N) over -M..M -> grid values (..., P, N, N)."""
    M = (modes.shape[-3] - 1) // 2
    full = np.zeros(modes.shape[:-3] + (P,) + modes.shape[-2:], dtype=complex)
    idx = _wavenumbers(M) % P
    full[..., idx, :, :] = modes
    return np.fft.ifft(full, axis=-3) * P


def _grid_to_modes(values, M):
    P = values.shape[-3]
    F = np.fft.fft(values, axis=-3) / P
    return F[..., _wavenumbers(M) % P, :, :]


def _traceless(X):
    """Drop the roundoff trace that FFTs leave behind."""
    N = X.shape[-1]
    return X - (np.trace(X, axis1=-2, axis2=-1) / N)[..., None, None] * np.eye(N)


def _jets_from_modes(modes, P):
    k = _wavenumbers((modes.shape[-3] - 1) // 2)[:, None, None]
    return Jets(
        _traceless(_modes_to_grid(modes, P)),
        _traceless(_modes_to_grid(1j * k * modes, P)),
        _traceless(_modes_to_grid(-(k**2) * modes, P)),
    )


def _loop_modes(state: LoopState, M: int) -> np.ndarray:
    out = []
    for f in state.fields:
        if isinstance(f, FourierField) and f.M == M:
            out.append(f.modes)
        else:
            out.append(FourierField.from_samples(state.jets().S[len(out)], M).modes)
    return np.array(out)


def _modes_state(modes, G, meta=None) -> LoopState:
    return LoopState([FourierField(m) for m in modes], G, dict(meta or {}))


def cfl_dt(model: GaudinModel, G: int, c: float = 0.2) -> float:
    """c dx^2 lambda^2 / k^2 with the smallest |lambda_a|; dx = 2 pi / G."""
    dx = 2 * np.pi / G
    lam2 = min(abs(l) ** 2 for l in model.lam)
    if model.k == 0:
        return c * dx  # no dispersive term; any modest step works
    return c * dx**2 * lam2 / abs(model.k) ** 2


def _casimir_targets(model):
    return np.array([np.sum(orbit_eigenvalues(model.N, l) ** 2) for l in model.lam])


def _project(model, S):
    """Rescale every S^a(x) so that <S^a S^a> equals its orbit value."""
    cas = np.einsum("a...ij,a...ji->a...", S, S)
    target = _casimir_targets(model).reshape((-1,) + (1,) * (cas.ndim - 1))
    return S * np.sqrt(target / cas)[..., None, None]


# ---------------------------------------------------------------------------
# stepping


def _rk4(f, y, dt):
    k1 = f(y)
    k2 = f(y + 0.5 * dt * k1)
    k3 = f(y + 0.5 * dt * k2)
    k4 = f(y + dt * k3)
    return y + (dt / 6) * (k1 + 2 * k2 + 2 * k3 + k4)


def _ode_rhs(model, flow):
    return lambda S: eom_rhs(model, SpinState(S), flow)


def _pde_rhs(model, flow, M):
    P = dealias_grid(M)
    return lambda modes: _traceless(_grid_to_modes(_field_rhs(model, _jets_from_modes(modes, P), flow), M))


def step(model: GaudinModel, state, flow, dt: float, M: int = 64):
    """One RK4 step.  SpinState -> SpinState, LoopState -> fourier LoopState."""
    flow = resolve_flow(model, flow)
    if isinstance(state, SpinState):
        if flow == "pcm":
            raise Unsupported("the principal chiral scenario is a field flow")
        if dt == 0:
            return SpinState(state.S.copy(), state.on_shell, dict(state.meta))
        return SpinState(_rk4(_ode_rhs(model, flow), state.S, dt), state.on_shell, dict(state.meta))
    modes = _loop_modes(state, M)
    if dt != 0:
        modes = _rk4(_pde_rhs(model, flow, M), modes, dt)
    return _modes_state(modes, state.G, state.meta)


# ---------------------------------------------------------------------------
# monitors


def _ode_monitors(model, S, which):
    st = SpinState(S)
    out = {}
    if "hamiltonians" in which:
        for b in range(model.n):
            out[f"H1_{b + 1}"] = hamiltonian(model, st, First(b))
        if model.kind == "elliptic":
            out["H0"] = hamiltonian(model, st, H0)
    if "casimirs" in which:
        for a in range(model.n):
            out[f"casimir_{a + 1}"] = np.trace(S[a] @ S[a])
    return out


def _pde_monitors(model, modes, G, which, flow):
    from .charges import GaugeSingularity, riccati_densities

    out = {}
    state = _modes_state(modes, G)
    if "casimirs" in which:
        vals = _modes_to_grid(modes, G)
        cas = np.einsum("apij,apji->ap", vals, vals)
        for a in range(model.n):
            out[f"casimir_int_{a + 1}"] = 2 * np.pi * cas[a].mean()
            out[f"casimir_dev_{a + 1}"] = np.abs(cas[a] - _casimir_targets(model)[a]).max()
    if "hamiltonians" in which and model.N == 2:
        for a in range(model.n):
            try:
                R = riccati_densities(model, state, a)
                out[f"H_{a + 1},1"], out[f"H_{a + 1},2"] = R.H1, R.H2
            except GaugeSingularity:
                out[f"H_{a + 1},1"] = out[f"H_{a + 1},2"] = complex("nan")
    if flow == "pcm" and model.kind == "rational":
        # the elliptic model has a source term, so l0 is not conserved there
        l0 = 2 * np.pi * (modes[0, modes.shape[1] // 2] + modes[1, modes.shape[1] // 2])
        for (i, j) in ((0, 0), (0, 1), (1, 0)):
            out[f"l0_{i + 1}{j + 1}"] = l0[i, j]
    return out


def _zc_spotcheck(model, modes, G, flow, rng):
    """Zero-curvature residual at one random (z, x) pair."""
    from .field import zero_curvature_residual

    if flow == "pcm":
        return complex("nan")
    state = _modes_state(modes, G)
    while True:
        z = complex(rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5))
        if all(abs(z - c) > 0.1 for c in model.z):
            break
    return zero_curvature_residual(model, state, flow, z, x=np.array([rng.uniform(0, 2 * np.pi)]))[0]


# ---------------------------------------------------------------------------
# driver


def evolve(model: GaudinModel, initial, flow, spec: EvolutionSpec, M: int = 64, seed: int = 0) -> Trajectory:
    """Integrate ``flow`` from ``initial`` for spec.T and record monitors."""
    flow = resolve_flow(model, flow)
    rng = np.random.default_rng(seed)
    field_mode = isinstance(initial, LoopState)
    if field_mode:
        G = initial.G
        y = _loop_modes(initial, M)
        f = _pde_rhs(model, flow, M)
        monitor = lambda y: _pde_monitors(model, y, G, spec.monitors, flow)
        snap = lambda y: _modes_state(y, G, initial.meta)
        finite = lambda y: np.isfinite(y).all() and np.abs(y).max() < spec.blowup
        project = lambda y: _grid_to_modes(_project(model, _modes_to_grid(y, dealias_grid(M))), M)
    else:
        if flow == "pcm":
            raise Unsupported("the principal chiral scenario is a field flow")
        y = initial.S.copy()
        f = _ode_rhs(model, flow)
        monitor = lambda y: _ode_monitors(model, y, spec.monitors)
        snap = lambda y: SpinState(y.copy(), initial.on_shell, dict(initial.meta))
        finite = lambda y: np.isfinite(y).all() and np.abs(y).max() < spec.blowup
        project = lambda y: _project(model, y)

    def record(t, y):
        times.append(t)
        snaps.append(snap(y))
        m = monitor(y)
        if "zero_curvature_spotcheck" in spec.monitors and field_mode:
            m["zero_curvature"] = _zc_spotcheck(model, y, G, flow, rng)
        for k, v in m.items():
            series.setdefault(k, []).append(complex(v))

    times, snaps, series = [], [], {}
    record(0.0, y)
    n = spec.n_steps
    stride = int(spec.output_every)
    for i in range(1, n + 1):
        y_new = _rk4(f, y, spec.dt)
        if spec.project_casimir:
            y_new = project(y_new)
        if not finite(y_new):
            t_last = (i - 1) * spec.dt
            if times[-1] != t_last:
                record(t_last, y)
            partial = Trajectory(np.array(times), snaps, {k: np.array(v) for k, v in series.items()})
            raise BlowUp(f"blow-up after t = {t_last:.6g}", t_last, snap(y), partial)
        y = y_new
        if i % stride == 0 or i == n:
            record(i * spec.dt, y)
    monitors = {k: np.array(v) for k, v in series.items()}
    drift = {}
    for k, v in monitors.items():
        if k.startswith(("casimir_dev", "zero_curvature")):
            continue
        drift[k] = float(np.nanmax(np.abs(v - v[0])))
    log.info("evolved %d steps, max drift %.3e", n, max(drift.values()) if drift else 0.0)
    return Trajectory(np.array(times), snaps, monitors, drift)
