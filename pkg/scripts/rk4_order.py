"""Observed order of the RK4 integrator on the elliptic top.

Halves the step repeatedly against a fine reference and prints the error
ratios, which approach 16 for a fourth-order method.
"""
import argparse

import numpy as np

from gaudin_lab.efun import EllipticContext
from gaudin_lab.evolve import EvolutionSpec, evolve
from gaudin_lab.mech import First, GaudinModel, random_state


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--dt", type=float, default=0.1)
    ap.add_argument("--levels", type=int, default=4)
    args = ap.parse_args()
    model = GaudinModel("elliptic", 2, (0.0, 0.5, 0.15 + 0.5j), (0.3, 0.3, 0.3), ctx=EllipticContext(tau=0.3 + 1j))
    s0 = random_state(model, np.random.default_rng(args.seed), unitary=True)

    def end(dt):
        return evolve(model, s0, First(0), EvolutionSpec(dt, 1.0, output_every=10**6, monitors=[])).snapshots[-1].S

    dts = [args.dt / 2**j for j in range(args.levels)]
    ref = end(dts[-1] / 8)
    errs = [np.abs(end(dt) - ref).max() for dt in dts]
    print("dt,error,ratio")
    for j, (dt, e) in enumerate(zip(dts, errs)):
        ratio = errs[j - 1] / e if j else float("nan")
        print(f"{dt:.5f},{e:.3e},{ratio:.2f}")


if __name__ == "__main__":
    main()
