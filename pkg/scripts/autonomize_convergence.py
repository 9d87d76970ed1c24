#!/usr/bin/env python3
"""Final-time error of the dilated pipeline against the RK4 reference as N_s grows."""
import argparse

import numpy as np

from bcowlab.autonomize import certified_reference, solve_time_dependent
from bcowlab.registry import REGISTRY, get_problem


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("problem", nargs="?", default="cosine_drive", choices=sorted(REGISTRY))
    ap.add_argument("--Ns", default="4,8,16,32,64", help="comma-separated node counts (powers of two)")
    ap.add_argument("--epsilon", type=float, default=1e-6)
    args = ap.parse_args(argv)
    prob = get_problem(args.problem)
    ref, budget = certified_reference(prob)
    print(f"{args.problem}: reference error budget {budget:.1e}")
    print(f"{'N_s':>5} {'error':>10} {'ratio':>8} {'k':>4} {'m':>4}")
    prev = None
    for Ns in (int(s) for s in args.Ns.split(",")):
        rep = solve_time_dependent(prob, args.epsilon, Ns)
        err = float(np.linalg.norm(rep.x_final - ref))
        ratio = f"{prev / err:8.1f}" if prev and err > 0 else " " * 8
        print(f"{Ns:5d} {err:10.3e} {ratio} {rep.params.k:4d} {rep.params.m:4d}")
        prev = err


if __name__ == "__main__":
    main()
