#!/usr/bin/env python3
"""Smoke test for the rdseed_py extension module.

Builds nothing itself: run `cargo build --release -p rdseed-py` first (or
pass --build to do it here), then this script copies the cdylib next to
itself as rdseed_py.so and exercises the bindings end to end.
"""

import argparse
import math
import shutil
import subprocess
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent


def ensure_module(build: bool) -> None:
    if build:
        subprocess.run(
            ["cargo", "build", "--release", "-p", "rdseed-py"],
            cwd=ROOT,
            check=True,
        )
    src = ROOT / "target" / "release" / "librdseed_py.so"
    if not src.exists():
        sys.exit(
            "librdseed_py.so not found; run `cargo build --release -p rdseed-py` first"
        )
    dst = Path(__file__).resolve().parent / "rdseed_py.so"
    if not dst.exists() or src.stat().st_mtime > dst.stat().st_mtime:
        shutil.copyfile(src, dst)


def main() -> None:
    parser = argparse.ArgumentParser()
    parser.add_argument("--build", action="store_true", help="cargo-build the module first")
    args = parser.parse_args()
    ensure_module(args.build)
    sys.path.insert(0, str(Path(__file__).resolve().parent))

    import rdseed_py as rd

    checks = 0

    def check(name, ok):
        nonlocal checks
        checks += 1
        status = "ok" if ok else "FAIL"
        print(f"  [{status}] {name}")
        if not ok:
            sys.exit(1)

    # reaction model derivatives and the singular-arc equation
    f = rd.Reaction.bistable(0.25)
    check("bistable roots", f.eval(0, 0.0) == 0.0 and f.eval(0, 1.0) == 0.0)
    check("concavity signs", f.concavity_sign(0.9) == -1 and f.concavity_sign(0.1) == 1)
    roots = f.solve_fprime(f.eval(1, 0.8), 0.0, 1.0)
    concave = [v for (v, sign) in roots if sign <= 0]
    check("two roots, one concave", len(roots) == 2 and abs(concave[0] - 0.8) < 1e-9)

    # forward solve: equilibria are exact, block mass is exact
    g = rd.Grid1D(-50.0, 50.0, 256)
    tc = rd.TimeConfig(5.0, 200)
    ones = rd.Field.constant_1d(g, 1.0)
    j, final = rd.forward(ones, f, tc)
    check("u = 1 is an equilibrium", abs(j - 100.0) < 1e-9)
    block = rd.Field.block(g, 0.0, 13.0)
    check("block mass exact", abs(block.mass() - 13.0) < 1e-10)
    j0, _ = rd.forward(block, f, tc)
    check("block objective finite", 10.0 < j0 < 40.0)

    # adjoint gradient is strictly positive
    p0, pt0 = rd.adjoint_gradient(block, f, tc)
    check("gradient positive", min(p0.values) > 0.0)
    check("pt0 finite", all(math.isfinite(v) for v in pt0.values))

    # a short optimization run improves the objective and keeps the mass
    result = rd.optimize_fixed_point(block, f, tc, 13.0, max_iter=8, eps_flat=0.1)
    check("optimize improves", result["objective"] >= result["initial_objective"])
    check("optimize mass exact", abs(result["final"].mass() - 13.0) < 1e-8)
    trace = result["trace"]
    check("trace monotone", all(b >= a for a, b in zip(trace, trace[1:])))

    # annealing is deterministic for a fixed seed
    a1 = rd.anneal(block, f, tc, 13.0, seed=7, max_moves=40)
    a2 = rd.anneal(block, f, tc, 13.0, seed=7, max_moves=40)
    check("anneal deterministic", a1["best_objective"] == a2["best_objective"])
    check("anneal mass exact", abs(a1["best"].mass() - 13.0) < 1e-9)

    # rearrangement: equimeasurable and centered
    values = [((i * 37) % 11) / 11.0 for i in range(64)]
    star = rd.rearrange_periodic(values)
    check("rearrangement multiset", sorted(values) == sorted(star))
    check("rearrangement peak at center", star[32] == max(star))

    # Laplace asymptotics
    check("laplace m=2 k=32", abs(rd.laplace_check(2, 32, 1.0) - 1.0) < 1e-6)

    print(f"all {checks} smoke checks passed")


if __name__ == "__main__":
    main()
