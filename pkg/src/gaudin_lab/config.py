"""Run configuration: YAML (or JSON) files mapped onto dataclasses.

Complex numbers are written as [re, im]; plain numbers are read as reals.
Validation happens in ``load_config`` before anything is computed.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field as dc_field
from pathlib import Path

import yaml

from .efun import EllipticContext
from .evolve import SCENARIOS, EvolutionSpec
from .mech import Flow, GaudinModel

__all__ = [
    "ConfigError",
    "ModelConfig",
    "FieldConfig",
    "StateConfig",
    "EvolutionConfig",
    "ResidualConfig",
    "OutputConfig",
    "RunConfig",
    "load_config",
    "parse_config",
    "config_hash",
]


class ConfigError(ValueError):
    """Schema violation; the CLI maps it to exit code 2."""


def _cplx(v, where):
    if isinstance(v, (int, float)) and not isinstance(v, bool):
        return complex(v)
    if isinstance(v, (list, tuple)) and len(v) == 2 and all(isinstance(t, (int, float)) for t in v):
        return complex(v[0], v[1])
    raise ConfigError(f"{where}: expected a number or [re, im], got {v!r}")


def _known(block, keys, where):
    if not isinstance(block, dict):
        raise ConfigError(f"{where} must be a mapping")
    extra = set(block) - set(keys)
    if extra:
        raise ConfigError(f"{where}: unknown keys {sorted(extra)}")


@dataclass
class ModelConfig:
    kind: str = "elliptic"
    N: int = 2
    marked_points: list = dc_field(default_factory=lambda: [0.0, 0.5])
    lam: list = dc_field(default_factory=lambda: [1.0, 1.0])
    tau: complex = 0.3 + 1j
    k: float = 1.0
    sl2_mode: bool | None = None

    def build(self) -> GaudinModel:
        ctx = EllipticContext(tau=self.tau) if self.kind == "elliptic" else None
        try:
            return GaudinModel(self.kind, self.N, tuple(self.marked_points), tuple(self.lam), ctx=ctx, k=self.k, sl2_mode=self.sl2_mode)
        except (ValueError, TypeError) as err:
            raise ConfigError(f"model: {err}") from err


@dataclass
class FieldConfig:
    backend: str = "orbit"
    M: int = 64
    G: int = 256
    seed: int | None = None
    phase_spec: dict = dc_field(default_factory=dict)
    file: str | None = None


@dataclass
class StateConfig:
    """0+1 initial data."""

    seed: int | None = None
    scale: float = 1.0
    unitary: bool = False
    file: str | None = None


@dataclass
class EvolutionConfig:
    dt: float | str = "cfl"
    T: float = 0.1
    output_every: int = 10
    monitors: list = dc_field(default_factory=lambda: ["casimirs", "hamiltonians"])
    project_casimir: bool = False
    cfl: float = 0.2
    blowup: float = 1e8  # abort when max |S| exceeds this

    def spec(self, dt: float) -> EvolutionSpec:
        try:
            return EvolutionSpec(dt, self.T, self.output_every, frozenset(self.monitors), self.project_casimir, self.blowup)
        except ValueError as err:
            raise ConfigError(f"evolution: {err}") from err


@dataclass
class ResidualConfig:
    z_samples: int = 10
    x_samples: int = 10
    states: int = 5  # 0+1 only
    tolerance: float | None = None
    relative: bool = False  # 0+1: divide by the size of the cancelling terms


@dataclass
class OutputConfig:
    directory: str = "runs/out"
    formats: list = dc_field(default_factory=lambda: ["csv", "json"])


@dataclass
class RunConfig:
    model: ModelConfig
    flow: str
    seed: int = 0
    field: FieldConfig | None = None
    state: StateConfig | None = None
    evolution: EvolutionConfig = dc_field(default_factory=EvolutionConfig)
    residual: ResidualConfig = dc_field(default_factory=ResidualConfig)
    output: OutputConfig = dc_field(default_factory=OutputConfig)
    source: dict = dc_field(default_factory=dict, repr=False)
    base: Path = Path(".")  # relative state files are resolved against the config's directory

    @property
    def is_field(self):
        return self.field is not None

    def resolve(self, path: str) -> Path:
        p = Path(path)
        return p if p.is_absolute() else self.base / p


def _int(v, where, minimum=None):
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError(f"{where}: expected an integer, got {v!r}")
    if minimum is not None and v < minimum:
        raise ConfigError(f"{where}: must be >= {minimum}")
    return v


def _num(v, where):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{where}: expected a number, got {v!r}")
    return float(v)


def parse_config(data: dict) -> RunConfig:
    if not isinstance(data, dict):
        raise ConfigError("config must be a mapping")
    _known(data, {"model", "flow", "seed", "field", "state", "evolution", "residual", "output"}, "config")
    if "model" not in data or "flow" not in data:
        raise ConfigError("config needs 'model' and 'flow' blocks")

    m = data["model"]
    _known(m, {"kind", "N", "n", "tau", "marked_points", "k", "lambda", "sl2_mode"}, "model")
    kind = m.get("kind", "elliptic")
    if kind not in ("rational", "elliptic"):
        raise ConfigError("model.kind must be rational or elliptic")
    pts = [_cplx(v, "model.marked_points") for v in m.get("marked_points", [])]
    if not pts:
        raise ConfigError("model.marked_points must be a non-empty list")
    if len(set(pts)) != len(pts):
        raise ConfigError("model.marked_points must be distinct")
    n = _int(m.get("n", len(pts)), "model.n", 1)
    if n != len(pts):
        raise ConfigError("model.n does not match the number of marked points")
    lam = m.get("lambda", [1.0] * n)
    if not isinstance(lam, list):
        lam = [lam] * n
    lam = [_cplx(v, "model.lambda") for v in lam]
    if len(lam) != n:
        raise ConfigError("model.lambda needs one level per marked point")
    model = ModelConfig(
        kind=kind,
        N=_int(m.get("N", 2), "model.N", 2),
        marked_points=pts,
        lam=lam,
        tau=_cplx(m.get("tau", [0.3, 1.0]), "model.tau"),
        k=_num(m.get("k", 1.0), "model.k"),
        sl2_mode=m.get("sl2_mode"),
    )

    flow = str(data["flow"]).strip()
    if flow not in SCENARIOS:
        try:
            Flow.parse(flow)
        except ValueError as err:
            raise ConfigError(f"flow: {err}") from err

    fcfg = None
    if data.get("field") is not None:
        f = data["field"]
        _known(f, {"backend", "M", "G", "seed", "initial", "file"}, "field")
        backend = f.get("backend", "orbit")
        if backend not in ("orbit", "fourier"):
            raise ConfigError("field.backend must be orbit or fourier")
        G = _int(f.get("G", 256), "field.G", 4)
        if G & (G - 1):
            raise ConfigError("field.G must be a power of two")
        M = _int(f.get("M", 64), "field.M", 1)
        if G < 2 * M + 1:
            raise ConfigError("field.G must be at least 2M + 1")
        init = f.get("initial") or {}
        if not isinstance(init, dict):
            raise ConfigError("field.initial must be a mapping")
        fcfg = FieldConfig(backend, M, G, f.get("seed"), dict(init), f.get("file"))

    scfg = None
    if data.get("state") is not None:
        s = data["state"]
        _known(s, {"seed", "scale", "unitary", "file"}, "state")
        scfg = StateConfig(s.get("seed"), _num(s.get("scale", 1.0), "state.scale"), bool(s.get("unitary", False)), s.get("file"))
    if fcfg is not None and scfg is not None:
        raise ConfigError("give either a field block (1+1) or a state block (0+1), not both")

    e = data.get("evolution") or {}
    _known(e, {"dt", "T", "output_every", "monitors", "project_casimir", "cfl", "blowup"}, "evolution")
    dt = e.get("dt", "cfl" if fcfg is not None else 1e-3)
    if dt != "cfl":
        dt = _num(dt, "evolution.dt")
    evo = EvolutionConfig(
        dt=dt,
        T=_num(e.get("T", 0.1), "evolution.T"),
        output_every=_int(e.get("output_every", 10), "evolution.output_every", 1),
        monitors=list(e.get("monitors", ["casimirs", "hamiltonians"])),
        project_casimir=bool(e.get("project_casimir", False)),
        cfl=_num(e.get("cfl", 0.2), "evolution.cfl"),
        blowup=_num(e.get("blowup", 1e8), "evolution.blowup"),
    )
    if dt == "cfl" and fcfg is None:
        raise ConfigError("evolution.dt = cfl needs a field block")
    evo.spec(min(1e-9, evo.T) if dt == "cfl" else dt)

    r = data.get("residual") or {}
    _known(r, {"z_samples", "x_samples", "states", "tolerance", "relative"}, "residual")
    res = ResidualConfig(
        _int(r.get("z_samples", 10), "residual.z_samples", 1),
        _int(r.get("x_samples", 10), "residual.x_samples", 1),
        _int(r.get("states", 5), "residual.states", 1),
        None if r.get("tolerance") is None else _num(r["tolerance"], "residual.tolerance"),
        bool(r.get("relative", False)),
    )

    o = data.get("output") or {}
    _known(o, {"directory", "formats"}, "output")
    out = OutputConfig(str(o.get("directory", "runs/out")), list(o.get("formats", ["csv", "json"])))

    cfg = RunConfig(model, flow, _int(data.get("seed", 0), "seed", 0), fcfg, scfg, evo, res, out, data)
    model_obj = model.build()
    if flow in SCENARIOS:
        from .evolve import resolve_flow

        try:
            resolve_flow(model_obj, flow)
        except ValueError as err:
            raise ConfigError(f"flow: {err}") from err
    else:
        fl = Flow.parse(flow)
        if fl.site is not None and fl.site >= n:
            raise ConfigError(f"flow {flow} refers to a missing site")
    return cfg


def load_config(path) -> RunConfig:
    """Read YAML or JSON (JSON is valid YAML) and validate it."""
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as err:
        raise ConfigError(f"cannot read {path}: {err}") from err
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as err:
        raise ConfigError(f"cannot parse {path}: {err}") from err
    cfg = parse_config(data)
    cfg.base = p.resolve().parent
    return cfg


def config_hash(cfg: RunConfig) -> str:
    blob = json.dumps(cfg.source, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()
