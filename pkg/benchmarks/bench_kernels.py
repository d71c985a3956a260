#!/usr/bin/env python3
"""Compare the compiled CSR matvec kernel against the pure-Python fallback.

Builds the global stiffness matrix of a representative cut-bar mesh and
times repeated matvecs through both backends, which is the hot operation
of every explicit time loop in this package.
"""

import argparse
import time

import numpy as np

from cutsem import kernels
from cutsem.assembly import CartesianMesh, Material, assemble_global
from cutsem.geometry import half_plane


def build_system(elements_x, order):
    cut = 1.0
    h = 1.0 / (elements_x - 0.5)
    mesh = CartesianMesh(
        lx=elements_x * h,
        ly=0.1,
        nx=elements_x,
        ny=1,
        p=order,
        level_set=half_plane(1.0, 0.0, cut),
        depth=3,
    )
    mat = Material(youngs_modulus=1.0, poisson_ratio=0.0, density=1.0)
    return assemble_global(mesh, mat, scheme="fitted")


def time_matvec(fn, indptr, indices, data, x, repeats):
    out = np.empty_like(x)
    fn(indptr, indices, data, x, out)  # warm up
    best = float("inf")
    for _ in range(5):
        start = time.perf_counter()
        for _ in range(repeats):
            fn(indptr, indices, data, x, out)
        best = min(best, (time.perf_counter() - start) / repeats)
    return best, out


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--elements", type=int, default=200)
    parser.add_argument("--order", type=int, default=5)
    parser.add_argument("--repeats", type=int, default=200)
    args = parser.parse_args()

    system = build_system(args.elements, args.order)
    indptr = system.k_indptr
    indices = system.k_indices
    data = system.k_data
    rng = np.random.default_rng(0)
    x = rng.standard_normal(system.dof_count)

    print(f"matrix: {system.dof_count} DOFs, {len(data)} nonzeros")
    print(f"active backend: {kernels.BACKEND}")

    t_fb, y_fb = time_matvec(kernels._fallback_csr_matvec, indptr, indices, data, x, args.repeats)
    print(f"fallback (scipy): {1e6 * t_fb:10.2f} us/matvec")

    if kernels.BACKEND == "compiled":
        t_c, y_c = time_matvec(kernels.csr_matvec, indptr, indices, data, x, args.repeats)
        print(f"compiled        : {1e6 * t_c:10.2f} us/matvec")
        print(f"speedup         : {t_fb / t_c:10.2f}x")
        same = np.array_equal(y_fb, y_c)
        print(f"bitwise agreement: {'yes' if same else 'NO'}")
    else:
        print("compiled backend unavailable; only the fallback was timed")


if __name__ == "__main__":
    main()
