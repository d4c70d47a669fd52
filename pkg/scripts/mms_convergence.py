"""Refinement study for the manufactured solutions.

Solves the global problem on meshes of increasing size and prints the
W^{1,p} error against the nodal interpolant of the exact solution with
observed rates.

    python3 scripts/mms_convergence.py [--sizes 16 32 64 128]
"""

import argparse

import numpy as np

from robin_dd import fem, mesh, pstructure
from robin_dd.monolithic import solve_global
from robin_dd.problems import MANUFACTURED
from robin_dd.subsolver import NewtonConfig


def study(name, sizes, cfg):
    mms = MANUFACTURED[name]
    ps = pstructure.get_preset(mms.preset, mms.p, mms.lam)
    rows = []
    for n in sizes:
        m = mesh.build_interval_mesh(0, 1, n) if mms.dim == 1 else mesh.build_rect_mesh(1, 1, n, n)
        u, rep = solve_global(m, ps, mms.f(), cfg)
        uex = mms.exact()(m.points)
        rows.append((n, fem.norm_w1p(m, u - uex, ps), float(np.max(np.abs(u - uex))), rep.iterations))
    return rows


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[16, 32, 64, 128])
    ap.add_argument("--only", choices=sorted(MANUFACTURED))
    args = ap.parse_args()
    cfg = NewtonConfig(tol_residual=1e-11)
    for name in [args.only] if args.only else sorted(MANUFACTURED):
        print(f"\n{name}")
        print(f"{'n':>6} {'W1p error':>12} {'rate':>6} {'max nodal':>12} {'rate':>6} {'newton':>7}")
        prev = None
        for n, ew, emax, its in study(name, args.sizes, cfg):
            r1 = r2 = ""
            if prev:
                r1 = f"{np.log(prev[1] / ew) / np.log(n / prev[0]):6.2f}"
                r2 = f"{np.log(prev[2] / emax) / np.log(n / prev[0]):6.2f}"
            print(f"{n:>6} {ew:>12.4e} {r1:>6} {emax:>12.4e} {r2:>6} {its:>7}")
            prev = (n, ew, emax)


if __name__ == "__main__":
    main()
