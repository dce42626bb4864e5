"""Compare the compiled and numpy kernels.

    python3 benchmarks/bench_kernels.py [--repeat 5]
"""
import argparse
import timeit

import numpy as np

from dynlap import kernels
from dynlap.flow import double_gyre_field, step_times
from dynlap.mesh import delaunay_triangulate, grid_points


def bench(label, fn, repeat):
    best = min(timeit.repeat(fn, number=1, repeat=repeat))
    print(f"{label:<34s} {best * 1e3:10.2f} ms")
    return best


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if kernels.BACKEND != "cython":
        print("compiled kernels not built; only the numpy backend is timed")
    backends = ["cython", "python"] if kernels.BACKEND == "cython" else ["python"]

    mesh = delaunay_triangulate(grid_points(200))
    field = double_gyre_field()
    X = grid_points(50)
    ts = step_times(0.0, 1.0, 1e-2)
    cases = [
        (f"p1_local ({len(mesh.triangles)} triangles)",
         lambda b: kernels.p1_local(mesh.nodes, mesh.triangles, backend=b)),
        (f"rk4_advance ({len(X)} pts, {len(ts) - 1} steps)",
         lambda b: kernels.rk4_advance(field, X, ts, backend=b)),
    ]
    for name, fn in cases:
        times = {b: bench(f"{name} [{b}]", lambda: fn(b), args.repeat) for b in backends}
        if len(times) == 2:
            out = [fn(b) for b in backends]
            if isinstance(out[0], tuple):
                diff = max(np.max(np.abs(a - c)) for a, c in zip(*out))
            else:
                diff = np.max(np.abs(out[0] - out[1]))
            print(f"{'':<34s} speedup {times['python'] / times['cython']:.1f}x, max diff {diff:.1e}")


if __name__ == "__main__":
    main()
