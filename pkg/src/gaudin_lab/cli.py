"""Command line entry point: ``gaudin-lab verify | simulate | residual | charges``.

Exit codes: 0 success, 1 failed checks, 2 configuration error, 3 runtime
blow-up or singular data.  Every run writes ``run.json`` next to its outputs.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import platform
import sys
import time
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .charges import (
    GaugeSingularity,
    explicit_densities,
    integral_identity,
    loop_integral,
    momentum_density,
    riccati_densities,
)
from .config import ConfigError, RunConfig, config_hash, load_config
from .evolve import BlowUp, cfl_dt, evolve, resolve_flow
from .field import LoopState, random_loop_state, zero_curvature_residual
from .mech import First, SpinState, Unsupported, lax_residual, random_state
from .suites import SUITES, run_suite, spectral_samples, thread_count

log = logging.getLogger("gaudin_lab")

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_BLOWUP = 0, 1, 2, 3


class RuntimeSingularity(RuntimeError):
    """Evolution blew up or the data hit a gauge singularity."""


def fmt(x) -> str:
    return f"{float(x):.17g}"


def _cpair(z):
    z = complex(z)
    return [float(z.real), float(z.imag)]


def write_csv(path: Path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([v if isinstance(v, str) else fmt(v) for v in r])


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    raise TypeError(f"cannot serialize {type(o).__name__}")


def write_json(path: Path, data):
    path.write_text(json.dumps(data, indent=2, sort_keys=True, default=_json_default) + "\n")


# -- inputs ----------------------------------------------------------------------


def _seed(cfg: RunConfig, args) -> int:
    return cfg.seed if args.seed is None else args.seed


def initial_state(cfg: RunConfig, model, seed: int):
    """LoopState for field configs, SpinState otherwise."""
    try:
        if cfg.is_field:
            f = cfg.field
            if f.file:
                state = LoopState.from_json(cfg.resolve(f.file).read_text())
            else:
                state = random_loop_state(model, seed=seed if f.seed is None else f.seed, G=f.G, phase_spec=f.phase_spec or None)
            if state.n != model.n or state.N != model.N:
                raise ConfigError("initial field does not match the model")
            return state.to_fourier(f.M) if f.backend == "fourier" else state
        s = cfg.state
        if s is not None and s.file:
            state = SpinState.from_json(cfg.resolve(s.file).read_text())
            if state.S.shape != (model.n, model.N, model.N):
                raise ConfigError("initial state does not match the model")
            return state
        rng = np.random.default_rng(seed if s is None or s.seed is None else s.seed)
        return random_state(model, rng, scale=1.0 if s is None else s.scale, unitary=False if s is None else s.unitary)
    except (OSError, KeyError, json.JSONDecodeError) as err:
        raise ConfigError(f"cannot load initial data: {err}") from err
    except ValueError as err:
        if isinstance(err, ConfigError):
            raise
        raise ConfigError(f"initial data: {err}") from err


def _matrix_columns(N):
    return [f"S{i + 1}{j + 1}_{part}" for i in range(N) for j in range(N) for part in ("re", "im")]


def _matrix_values(S):
    return [v for z in S.reshape(-1) for v in (z.real, z.imag)]


# -- subcommands -----------------------------------------------------------------


def cmd_verify(args, out: Path, record: dict) -> int:
    seed = 0 if args.seed is None else args.seed
    blob = json.dumps({"suite": args.suite, "samples": args.samples, "seed": seed}, sort_keys=True).encode()
    record.update(seed=seed, config_sha256=hashlib.sha256(blob).hexdigest())
    if args.suite not in SUITES + ("all",):
        raise ConfigError(f"unknown suite {args.suite!r}")
    if args.samples is not None and args.samples < 1:
        raise ConfigError("--samples must be a positive integer")
    checks = run_suite(args.suite, samples=args.samples, seed=seed)
    passed = all(c.passed for c in checks)
    report = {
        "suite": args.suite,
        "seed": seed,
        "samples": args.samples,
        "n_checks": len(checks),
        "passed": passed,
        "checks": [c.to_dict() for c in checks],
    }
    write_json(out / "verify.json", report)
    record["outputs"] = ["verify.json"]
    for c in checks:
        rel = "<=" if c.bound == "upper" else ">="
        print(f"{'PASS' if c.passed else 'FAIL'} {c.name}: {c.value:.3e} {rel} {c.tol:.1e}")
    print(f"{args.suite}: {sum(c.passed for c in checks)}/{len(checks)} checks passed")
    return EXIT_OK if passed else EXIT_FAIL


def _trajectory_rows(tr, field_mode):
    for t, snap in zip(tr.times, tr.snapshots):
        if field_mode:
            S = snap.jets().S
            x = snap.grid
            for a in range(S.shape[0]):
                for p in range(S.shape[1]):
                    yield [t, str(a + 1), x[p]] + _matrix_values(S[a, p])
        else:
            for a in range(snap.S.shape[0]):
                yield [t, str(a + 1)] + _matrix_values(snap.S[a])


def _write_trajectory(out: Path, tr, field_mode, N, suffix=""):
    header = ["t", "site"] + (["x"] if field_mode else []) + _matrix_columns(N)
    write_csv(out / f"trajectory.csv{suffix}", header, _trajectory_rows(tr, field_mode))
    names = sorted(tr.monitors)
    header = ["t"] + [f"{k.replace(',', '_')}_{p}" for k in names for p in ("re", "im")]
    rows = ([t] + [v for k in names for v in (tr.monitors[k][i].real, tr.monitors[k][i].imag)] for i, t in enumerate(tr.times))
    write_csv(out / f"monitors.csv{suffix}", header, rows)
    return [f"trajectory.csv{suffix}", f"monitors.csv{suffix}"]


def cmd_simulate(args, out: Path, record: dict) -> int:
    cfg = load_config(args.config)
    seed = _seed(cfg, args)
    record.update(seed=seed, config_sha256=config_hash(cfg))
    model = cfg.model.build()
    state = initial_state(cfg, model, seed)
    evo = cfg.evolution
    dt = cfl_dt(model, cfg.field.G, evo.cfl) if evo.dt == "cfl" else evo.dt
    spec = evo.spec(dt)
    M = cfg.field.M if cfg.is_field else 64
    try:
        tr = evolve(model, state, cfg.flow, spec, M=M, seed=seed)
    except Unsupported as err:
        raise ConfigError(str(err)) from err
    except BlowUp as err:
        files = []
        if err.partial is not None:
            files = _write_trajectory(out, err.partial, cfg.is_field, model.N, ".partial")
        (out / "final_state.json.partial").write_text(err.state_last.to_json() + "\n")
        record["outputs"] = files + ["final_state.json.partial"]
        record["t_last"] = err.t_last
        raise RuntimeSingularity(str(err)) from err
    files = _write_trajectory(out, tr, cfg.is_field, model.N)
    (out / "final_state.json").write_text(tr.snapshots[-1].to_json() + "\n")
    record["outputs"] = files + ["final_state.json"]
    record["dt"] = dt
    record["drift"] = tr.drift
    worst = max(tr.drift.values()) if tr.drift else 0.0
    print(f"simulated {spec.n_steps} steps of {cfg.flow} (dt = {dt:.3e}); max monitor drift {worst:.3e}")
    return EXIT_OK


def _field_flows(model, name):
    flow = resolve_flow(model, name)
    if flow == "pcm":
        return [First(0), First(1)]
    return [flow]


def cmd_residual(args, out: Path, record: dict) -> int:
    cfg = load_config(args.config)
    seed = _seed(cfg, args)
    record.update(seed=seed, config_sha256=config_hash(cfg))
    model = cfg.model.build()
    rc = cfg.residual
    rng = np.random.default_rng(seed)
    perturb = args.perturb
    rows = []
    try:
        if cfg.is_field:
            state = initial_state(cfg, model, seed)
            xs = np.sort(rng.uniform(0, 2 * np.pi, rc.x_samples))
            zs = spectral_samples(model, rng, rc.z_samples)
            for fl in _field_flows(model, cfg.flow):
                for z in zs:
                    res = zero_curvature_residual(model, state, fl, z, x=xs, perturb=perturb)
                    rows += [[str(fl), "0", x, z.real, z.imag, r] for x, r in zip(xs, res)]
        else:
            flow = resolve_flow(model, cfg.flow)
            if flow == "pcm":
                raise ConfigError("the principal chiral scenario needs a field block")
            states = [initial_state(cfg, model, seed)]
            if cfg.state is None or not cfg.state.file:
                srng = np.random.default_rng(seed)
                scale = 1.0 if cfg.state is None else cfg.state.scale
                unitary = False if cfg.state is None else cfg.state.unitary
                states = [random_state(model, srng, scale=scale, unitary=unitary) for _ in range(rc.states)]
            for i, st in enumerate(states):
                for z in spectral_samples(model, rng, rc.z_samples):
                    r = lax_residual(model, st, flow, z, relative=rc.relative, perturb=perturb)
                    rows.append([str(flow), str(i), float("nan"), z.real, z.imag, r])
    except Unsupported as err:
        raise ConfigError(str(err)) from err
    write_csv(out / "residual.csv", ["flow", "state", "x", "z_re", "z_im", "residual"], rows)
    worst = float(max(r[-1] for r in rows))
    passed = bool(rc.tolerance is None or worst <= rc.tolerance)
    summary = {
        "flow": cfg.flow,
        "perturb": perturb,
        "relative": bool(rc.relative and not cfg.is_field),
        "n_samples": len(rows),
        "max_residual": worst,
        "tolerance": rc.tolerance,
        "passed": passed,
    }
    write_json(out / "residual_summary.json", summary)
    record["outputs"] = ["residual.csv", "residual_summary.json"]
    print(f"max residual {worst:.3e} over {len(rows)} samples" + ("" if rc.tolerance is None else f" (tolerance {rc.tolerance:.1e})"))
    return EXIT_OK if passed else EXIT_FAIL


def cmd_charges(args, out: Path, record: dict) -> int:
    cfg = load_config(args.config)
    seed = _seed(cfg, args)
    record.update(seed=seed, config_sha256=config_hash(cfg))
    if not cfg.is_field:
        raise ConfigError("charges needs a field block")
    model = cfg.model.build()
    if model.N != 2:
        raise ConfigError("conserved densities are implemented for N = 2")
    state = initial_state(cfg, model, seed)
    x = state.grid
    cols, header, summary = [], ["x"], {}
    try:
        for a in range(model.n):
            R = riccati_densities(model, state, a)
            for name, v in (("h1", R.h1), ("h2", R.h2), ("P", R.P)):
                cols += [v.real, v.imag]
                header += [f"{name}_{a + 1}_re", f"{name}_{a + 1}_im"]
            h1e, h2e = loop_integral(state, lambda J, a=a: np.array(explicit_densities(model, J, a)))
            lhs, rhs = integral_identity(model, state, a)
            summary[str(a + 1)] = {
                "H1": _cpair(R.H1),
                "H2": _cpair(R.H2),
                "P_integral": _cpair(loop_integral(state, lambda J, a=a: momentum_density(model, J, a))),
                "H1_explicit": _cpair(h1e),
                "H2_explicit": _cpair(h2e),
                "T0_identity_lhs": _cpair(lhs),
                "T0_identity_rhs": _cpair(rhs),
            }
    except GaugeSingularity as err:
        raise RuntimeSingularity(str(err)) from err
    write_csv(out / "charges.csv", header, zip(x, *cols))
    write_json(out / "charges.json", {"sites": summary, "G": state.G})
    record["outputs"] = ["charges.csv", "charges.json"]
    for a, s in summary.items():
        print(f"site {a}: H1 = {complex(*s['H1']):.10g}, H2 = {complex(*s['H2']):.10g}")
    return EXIT_OK


# -- driver ----------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="gaudin-lab", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, config_required):
        sp.add_argument("--config", required=config_required, help="YAML or JSON run configuration")
        sp.add_argument("--seed", type=int, default=None)
        sp.add_argument("--out", default=None, help="output directory")

    v = sub.add_parser("verify", help="run identity and equation-of-motion suites")
    common(v, False)
    v.add_argument("--suite", default="all", help="|".join(SUITES + ("all",)))
    v.add_argument("--samples", type=int, default=None)
    s = sub.add_parser("simulate", help="integrate a flow and record monitors")
    common(s, True)
    r = sub.add_parser("residual", help="Lax or zero-curvature residuals over sample grids")
    common(r, True)
    r.add_argument("--perturb", type=float, default=0.0, help="scale the equations of motion by 1 + perturb")
    c = sub.add_parser("charges", help="conserved densities of a field configuration")
    common(c, True)
    return p


COMMANDS = {"verify": cmd_verify, "simulate": cmd_simulate, "residual": cmd_residual, "charges": cmd_charges}


def _output_dir(args) -> Path:
    if args.out:
        return Path(args.out)
    if args.command == "verify":
        return Path("runs") / f"verify-{args.suite}"
    try:
        return Path(load_config(args.config).output.directory)
    except ConfigError:
        return Path("runs") / args.command


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as err:
        return EXIT_CONFIG if err.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    out = _output_dir(args)
    out.mkdir(parents=True, exist_ok=True)
    record = {
        "command": args.command,
        "argv": list(sys.argv[1:] if argv is None else argv),
        "config": args.config,
        "started": datetime.now(timezone.utc).isoformat(),
        "versions": {
            "gaudin_lab": __version__,
            "python": platform.python_version(),
            "numpy": np.__version__,
            "pyyaml": yaml.__version__,
        },
        "threads": thread_count(),
    }
    t0 = time.perf_counter()
    try:
        code = COMMANDS[args.command](args, out, record)
    except ConfigError as err:
        print(f"configuration error: {err}", file=sys.stderr)
        code = EXIT_CONFIG
    except RuntimeSingularity as err:
        print(f"runtime failure: {err}", file=sys.stderr)
        code = EXIT_BLOWUP
    record["wall_time_s"] = time.perf_counter() - t0
    record["exit_code"] = code
    write_json(out / "run.json", record)
    return code


if __name__ == "__main__":
    sys.exit(main())
