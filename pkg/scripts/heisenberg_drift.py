"""Drift of the Heisenberg conserved charges against the time step.

Runs the one-site rational second flow from configs/heisenberg.yaml at a few
multiples of the CFL step and prints the worst monitor drift for each.
"""
import argparse
from pathlib import Path

from gaudin_lab.cli import initial_state
from gaudin_lab.config import load_config
from gaudin_lab.evolve import EvolutionSpec, cfl_dt, evolve

ROOT = Path(__file__).resolve().parents[1]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", default=ROOT / "configs" / "heisenberg.yaml")
    ap.add_argument("--T", type=float, default=0.1)
    ap.add_argument("--factors", type=float, nargs="+", default=[0.25, 0.5, 1.0])
    args = ap.parse_args()
    cfg = load_config(args.config)
    model = cfg.model.build()
    state = initial_state(cfg, model, cfg.seed)
    base = cfl_dt(model, state.G)
    print("cfl_factor,dt,max_drift,H_1_2_drift")
    for f in args.factors:
        spec = EvolutionSpec(f * base, args.T, output_every=10**6, monitors=["casimirs", "hamiltonians"])
        tr = evolve(model, state, cfg.flow, spec, M=cfg.field.M)
        print(f"{f},{f * base:.6e},{tr.max_drift():.3e},{tr.drift['H_1,2']:.3e}")


if __name__ == "__main__":
    main()
