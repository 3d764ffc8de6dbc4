"""Verification suites behind ``gaudin-lab verify``.

A suite is a list of independent tasks; each task returns ``Check`` records
(max residual against a tolerance, or a lower bound for falsifiability
controls).  Tasks run on a thread pool capped by GAUDIN_LAB_THREADS and seed
their own generators, so results do not depend on scheduling.
"""
from __future__ import annotations

import itertools
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np

from . import efun, salg
from .charges import (
    gradient_fd_check,
    integral_identity,
    loop_integral,
    momentum_bracket_check,
    momentum_density,
    riccati_densities,
    schrodinger_T,
    variational_eom,
)
from .efun import EllipticContext, _lattice_distance
from .field import (
    first_hamiltonian_density,
    field_eom_rhs,
    heisenberg_rhs,
    landau_lifshitz_rhs,
    pcm_scenario,
    random_loop_state,
    zero_curvature_residual,
)
from .mech import (
    H0,
    First,
    GaudinModel,
    Second,
    coefficient_gradient,
    gradient,
    hamiltonian,
    lax_residual,
    poisson_bracket,
    random_state,
)

__all__ = ["Check", "SUITES", "DEFAULT_TAU", "EFUN_TAUS", "run_suite", "suite_tasks", "thread_count", "spectral_samples"]

DEFAULT_TAU = 0.3 + 1j
EFUN_TAUS = (1j, 0.3 + 1j, 0.25 + 0.8j)
Z3 = (0.1 + 0.05j, 0.37 + 0.3j, -0.2 + 0.45j)
LAM3 = (1.0, 0.7, 1.3)
SUITES = ("efun", "algebra", "mech", "field", "charges")


@dataclass
class Check:
    name: str
    value: float
    tol: float
    bound: str = "upper"  # "lower": a control that must exceed tol

    @property
    def passed(self) -> bool:
        if not np.isfinite(self.value):
            return False
        return bool(self.value <= self.tol if self.bound == "upper" else self.value >= self.tol)

    def __post_init__(self):
        self.value = float(self.value)
        self.tol = float(self.tol)

    def to_dict(self):
        d = asdict(self)
        d["passed"] = self.passed
        return d


def thread_count() -> int:
    env = os.environ.get("GAUDIN_LAB_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return min(8, os.cpu_count() or 1)


def _model(kind, N, n, ctx, k=1.0):
    return GaudinModel(kind, N, Z3[:n], LAM3[:n], ctx=ctx if kind == "elliptic" else None, k=k)


def spectral_samples(model: GaudinModel, rng, count: int, avoid: float = 0.1) -> list[complex]:
    """Random spectral points at distance > avoid from every marked point (mod the lattice)."""
    tau = model.ctx.tau if model.kind == "elliptic" else 1j
    out = []
    while len(out) < count:
        z = complex(rng.uniform(-0.5, 0.5) + rng.uniform(-0.5, 0.5) * tau)
        if model.kind == "elliptic":
            ok = all(_lattice_distance(z - zc, model.ctx) > avoid for zc in model.z)
        else:
            ok = all(abs(z - zc) > avoid for zc in model.z)
        if ok:
            out.append(z)
    return out


# -- elliptic functions and the algebra ---------------------------------------


def _efun_task(tau, samples, seed):
    rep = efun.identity_suite(EllipticContext(tau=tau), n_samples=samples, seed=seed)
    out = []
    for name, val in rep.items():
        tol = efun.suite_tolerance(name)
        label = f"tau={tau}:{name}"
        out.append(Check(label, float(val), -tol, "lower") if tol < 0 else Check(label, float(val), tol))
    return out


def _efun_tasks(samples, seed):
    return [lambda t=t: _efun_task(t, samples or 200, seed) for t in EFUN_TAUS]


def _algebra_tasks(samples, seed):
    def task():
        rep = salg.algebra_suite(EllipticContext(tau=DEFAULT_TAU), n_samples=samples or 100, seed=seed)
        return [Check(name, float(v), salg.suite_tolerance(name)) for name, v in rep.items()]

    return [task]


# -- mechanics -----------------------------------------------------------------


def _lax_task(kind, N, n, first_only, states, seed):
    ctx = EllipticContext(tau=DEFAULT_TAU)
    model = _model(kind, N, n, ctx)
    rng = np.random.default_rng([seed, N, n, kind == "elliptic"])
    flows = [First(a) for a in range(n)]
    if not first_only:
        flows += [Second(a) for a in range(n)]
    if kind == "elliptic":
        flows.append(H0)
    worst = rel = 0.0
    for _ in range(states):
        S = random_state(model, rng).S
        for z in spectral_samples(model, rng, 10):
            for fl in flows:
                worst = max(worst, lax_residual(model, S, fl, z))
                if kind == "rational":
                    rel = max(rel, lax_residual(model, S, fl, z, relative=True))
    tag = f"{kind}:N={N}:n={n}:{'first' if first_only else 'all'}"
    if kind == "elliptic":
        return [Check(f"lax:{tag}", worst, 1e-9)]
    # rational terms reach 1e5 near the poles; 1e-12 is judged relative to them
    return [Check(f"lax_relative:{tag}", rel, 1e-12), Check(f"lax_absolute:{tag}", worst, float("inf"))]


def _commute_task(states, seed):
    model = _model("elliptic", 2, 3, EllipticContext(tau=DEFAULT_TAU))
    rng = np.random.default_rng([seed, 99])
    h1h1 = h1h0 = total = 0.0
    for _ in range(states):
        S = random_state(model, rng).S
        g = [coefficient_gradient(gradient(model, S, First(a))) for a in range(3)]
        g0 = coefficient_gradient(gradient(model, S, H0))
        for a, b in itertools.combinations(range(3), 2):
            h1h1 = max(h1h1, abs(poisson_bracket(model, g[a], g[b], S)))
        for a in range(3):
            h1h0 = max(h1h0, abs(poisson_bracket(model, g[a], g0, S)))
        total = max(total, abs(sum(hamiltonian(model, S, First(a)) for a in range(3))))
    return [
        Check("bracket:H1a,H1b", h1h1, 1e-11),
        Check("bracket:H1a,H0", h1h0, 1e-11),
        Check("sum_a H1a", total, 1e-12),
    ]


def _mech_tasks(samples, seed):
    states = samples or 100
    tasks = []
    for kind in ("rational", "elliptic"):
        for n in (1, 2, 3):
            tasks.append(lambda kind=kind, n=n: _lax_task(kind, 2, n, False, states, seed))
        tasks.append(lambda kind=kind: _lax_task(kind, 3, 2, True, states, seed))
    tasks.append(lambda: _commute_task(max(states // 5, 1), seed))
    return tasks


# -- field equations -------------------------------------------------------------


def _zc_task(kind, N, n, order, fields, seed, points=20):
    ctx = EllipticContext(tau=DEFAULT_TAU)
    model = _model(kind, N, n, ctx, k=0.8)
    rng = np.random.default_rng([seed, N, n, order, kind == "elliptic"])
    flow = First if order == 1 else Second
    worst, control = 0.0, np.inf
    for f in range(fields):
        state = random_loop_state(model, seed=int(rng.integers(2**31)))
        xs = rng.uniform(0, 2 * np.pi, points)
        zs = spectral_samples(model, rng, points)
        for a in range(n):
            for z, x in zip(zs, xs):
                worst = max(worst, zero_curvature_residual(model, state, flow(a), z, x=np.array([x]))[0])
            if order == 2:
                bad = max(
                    zero_curvature_residual(model, state, flow(a), z, x=np.array([x]), perturb=0.01)[0]
                    for z, x in zip(zs, xs)
                )
                control = min(control, bad)
    tag = f"{kind}:N={N}:n={n}"
    out = [Check(f"zero_curvature:{'first' if order == 1 else 'second'}:{tag}", float(worst), 1e-9 if order == 1 else 1e-8)]
    if order == 2:
        out.append(Check(f"perturbed_control:second:{tag}", float(control), 1e-2, "lower"))
    return out


def _pcm_task(kind, fields, seed):
    model = _model(kind, 2, 2, EllipticContext(tau=DEFAULT_TAU), k=0.8)
    rng = np.random.default_rng([seed, 7, kind == "elliptic"])
    cons = lc = trad = stat = 0.0
    for _ in range(fields):
        rep = pcm_scenario(model, random_loop_state(model, seed=int(rng.integers(2**31))))
        cons, lc = max(cons, rep.conservation), max(lc, rep.light_cone)
        stat = max(stat, rep.stationary, rep.stationary_xi)
        if kind == "rational":
            trad = max(trad, rep.traditional, rep.l0_flux)
    out = [
        Check(f"pcm:{kind}:conservation", cons, 1e-10),
        Check(f"pcm:{kind}:light_cone", lc, 1e-10),
        Check(f"pcm:{kind}:stationary_top", stat, 1e-8),
    ]
    if kind == "rational":
        out.append(Check("pcm:rational:traditional", trad, 1e-10))
    return out


def _limits_task(seed):
    ctx = EllipticContext(tau=DEFAULT_TAU)
    out = []
    for kind in ("rational", "elliptic"):
        lam = 1.3
        model = GaudinModel(kind, 2, (0.2 + 0.1j,), (lam,), ctx=ctx if kind == "elliptic" else None, k=0.7)
        state = random_loop_state(model, seed=seed, G=16, phase_spec={"amplitude": 0.0, "windings": [0, 0, 0]})
        J = state.jets()
        rhs = field_eom_rhs(model, J, Second(0))[0]
        if kind == "rational":
            ref = heisenberg_rhs(J.S[0], J.Sxx[0], model.k, lam)
        else:
            ref = landau_lifshitz_rhs(model, J.S[0], J.Sxx[0], lam)
        name = "heisenberg" if kind == "rational" else "landau_lifshitz"
        out.append(Check(f"limit:{name}:constant_field", float(np.abs(rhs - ref).max()), 1e-12))
    return out


def _field_tasks(samples, seed):
    fields = samples or 2
    tasks = []
    for kind in ("rational", "elliptic"):
        for N, n in ((2, 1), (2, 2), (2, 3), (3, 2), (3, 3)):
            tasks.append(lambda kind=kind, N=N, n=n: _zc_task(kind, N, n, 1, fields, seed))
        for n in (1, 2):
            tasks.append(lambda kind=kind, n=n: _zc_task(kind, 2, n, 2, fields, seed))
        tasks.append(lambda kind=kind: _pcm_task(kind, fields, seed))
    tasks.append(lambda: _limits_task(seed))
    return tasks


# -- conserved densities -----------------------------------------------------------


def _variational_task(kind, fields, seed):
    model = _model(kind, 2, 2, EllipticContext(tau=DEFAULT_TAU), k=0.8)
    rng = np.random.default_rng([seed, 11, kind == "elliptic"])
    worst = {1: 0.0, 2: 0.0}
    for _ in range(fields):
        J = random_loop_state(model, seed=int(rng.integers(2**31)), G=64).jets()
        for a in range(model.n):
            for order in (1, 2):
                worst[order] = max(worst[order], variational_eom(model, J, a, order)[1])
    fd = max(
        gradient_fd_check(model, random_loop_state(model, seed=seed), 0, order, seed=seed + order)
        for order in (1, 2)
    )
    return [
        Check(f"variational:{kind}:first", worst[1], 1e-7),
        Check(f"variational:{kind}:second", worst[2], 1e-7),
        Check(f"functional_derivative_fd:{kind}", fd, 1e-5),
    ]


def _density_task(kind, fields, seed):
    model = _model(kind, 2, 2, EllipticContext(tau=DEFAULT_TAU), k=0.8)
    rng = np.random.default_rng([seed, 13, kind == "elliptic"])
    bracket = leading = ident = h1 = 0.0
    for _ in range(fields):
        state = random_loop_state(model, seed=int(rng.integers(2**31)))
        for a in range(model.n):
            bracket = max(bracket, max(momentum_bracket_check(model, state, a).values()))
            leading = max(leading, float(np.abs(schrodinger_T(model, state, a).T_m2 - model.lam[a] ** 2).max()))
            lhs, rhs = integral_identity(model, state, a)
            ident = max(ident, abs(lhs - rhs) / max(1.0, abs(lhs)))
            R = riccati_densities(model, state, a)
            ref = loop_integral(state, lambda J, a=a: momentum_density(model, J, a) + first_hamiltonian_density(model, J, a)[0])
            h1 = max(h1, abs(R.H1 - ref))
    return [
        Check(f"momentum_bracket:{kind}", bracket, 1e-7),
        Check(f"T_m2_equals_level_squared:{kind}", leading, 1e-10),
        Check(f"integral_identity_T0:{kind}", ident, 1e-7),
        Check(f"h1_integral_is_P_plus_H:{kind}", h1, 1e-8),
    ]


def _charges_tasks(samples, seed):
    fields = samples or 20
    tasks = []
    for kind in ("rational", "elliptic"):
        tasks.append(lambda kind=kind: _variational_task(kind, fields, seed))
        tasks.append(lambda kind=kind: _density_task(kind, max(fields // 10, 1), seed))
    return tasks


_BUILDERS = {
    "efun": _efun_tasks,
    "algebra": _algebra_tasks,
    "mech": _mech_tasks,
    "field": _field_tasks,
    "charges": _charges_tasks,
}


def suite_tasks(name: str, samples: int | None = None, seed: int = 0):
    if name == "all":
        return [t for s in SUITES for t in _BUILDERS[s](samples, seed)]
    if name not in _BUILDERS:
        raise ValueError(f"unknown suite {name!r}; choose from {SUITES + ('all',)}")
    if samples is not None and samples < 1:
        raise ValueError("samples must be a positive integer")
    return _BUILDERS[name](samples, seed)


def run_suite(name: str, samples: int | None = None, seed: int = 0, threads: int | None = None) -> list[Check]:
    """Run every task of a suite and return the checks in a fixed order."""
    if samples is not None and samples < 1:
        raise ValueError("samples must be a positive integer")
    tasks = suite_tasks(name, samples, seed)
    workers = threads or thread_count()
    if workers == 1:
        results = [t() for t in tasks]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda t: t(), tasks))
    return [c for r in results for c in r]
