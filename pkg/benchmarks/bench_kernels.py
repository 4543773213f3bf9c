"""Compare the compiled and pure-Python rounding kernels.

Times ``RoundingPlan.draw`` over a block of seeds on each available backend
and checks that both backends return identical draws.

    python benchmarks/bench_kernels.py --draws 2000
"""
import argparse
import time

import numpy as np

from cipround import kernels
from cipround.cli import relax20
from cipround.gaps import random_instance, random_set_cover
from cipround.policies import plain_plan
from cipround.preprocess import normalize
from cipround.rounding import RoundingPlan


def cases():
    inst, xhat, params = relax20()
    yield "relax20", RoundingPlan(inst, xhat, params)
    inst = normalize(random_instance(150, 80, 2))[0]
    yield "random-150x80", plain_plan(inst)[3]
    cover = random_set_cover(200, 100, 20, 5)
    params = plain_plan(cover)[2]
    xhat = np.full(cover.n, 1.0 / cover.to_dense().sum(axis=1).min())
    yield "cover-200x100", RoundingPlan(cover, xhat, params)


def time_backend(plan, backend, draws):
    t0 = time.perf_counter()
    out = [plan.draw(7, j, backend=backend)[0] for j in range(draws)]
    return time.perf_counter() - t0, out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--draws", type=int, default=2000)
    args = ap.parse_args()
    names = [b for b in ("cython", "python") if b in kernels.BACKENDS]
    print(f"default backend: {kernels.BACKEND}; draws per case: {args.draws}")
    print(f"{'case':<16}" + "".join(f"{b + ' us/draw':>18}" for b in names) + f"{'speedup':>10}")
    for label, plan in cases():
        times, draws = {}, {}
        for b in names:
            times[b], draws[b] = time_backend(plan, b, args.draws)
        if len(names) == 2:
            same = all(np.array_equal(x, y) for x, y in zip(draws["cython"], draws["python"]))
            assert same, f"backends disagree on {label}"
            speed = f"{times['python'] / times['cython']:9.1f}x"
        else:
            speed = f"{'n/a':>10}"
        cells = "".join(f"{1e6 * times[b] / args.draws:18.1f}" for b in names)
        print(f"{label:<16}{cells}{speed}")


if __name__ == "__main__":
    main()
