"""Compare the compiled and numpy RK4 / QFI kernels.

Usage: ``python3 benchmarks/bench_kernels.py [--steps N] [--repeat R]``
"""
import argparse
import time

import numpy as np

from perturbed_qsl import _kernels_py
from perturbed_qsl.gksl_dynamics import GkslForm, hamiltonian_generator
from perturbed_qsl.linalg_core import random_hermitian, vec
from perturbed_qsl.quantum_state import random_density_matrix

try:
    from perturbed_qsl import _kernels as compiled
except ImportError:
    compiled = None


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        start = time.perf_counter()
        fn()
        times.append(time.perf_counter() - start)
    return min(times)


def rk4_case(d, steps, rng):
    G = GkslForm(random_hermitian(d, rng), [(rng.normal(size=(d, d)) + 0j, 0.2)])
    P = hamiltonian_generator(random_hermitian(d, rng))
    ops = np.ascontiguousarray(np.stack([G.superoperator(), P.superoperator()]))
    coeffs = np.ones((steps, 3, 2))
    coeffs[:, :, 1] = np.cos(np.linspace(0, 3, steps))[:, None]
    hs = np.full(steps, 1e-3)
    record = np.zeros(steps, dtype=np.int8)
    record[9::10] = 1
    x0 = np.ascontiguousarray(vec(random_density_matrix(d, rng)))
    return ops, np.ascontiguousarray(coeffs), hs, x0, d, record, True


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--steps", type=int, default=4000)
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()
    rng = np.random.default_rng(0)
    print(f"{'kernel':<10}{'d':>3}{'python [s]':>14}{'cython [s]':>14}{'speed-up':>10}")
    for d in (2, 4, 8):
        case = rk4_case(d, args.steps, rng)
        t_py = best_of(lambda: _kernels_py.rk4_integrate(*case), args.repeat)
        t_cy = best_of(lambda: compiled.rk4_integrate(*case), args.repeat) if compiled else float("nan")
        print(f"{'rk4':<10}{d:>3}{t_py:>14.4f}{t_cy:>14.4f}{t_py / t_cy:>10.1f}")
    for d in (4, 16, 64):
        lam = np.sort(rng.uniform(0, 1, d))
        G = random_hermitian(d, rng)
        reps = 2000
        t_py = best_of(lambda: [_kernels_py.qfi_sum(lam, G, 1e-12) for _ in range(reps)], args.repeat)
        t_cy = best_of(lambda: [compiled.qfi_sum(lam, G, 1e-12) for _ in range(reps)], args.repeat) \
            if compiled else float("nan")
        print(f"{'qfi_sum':<10}{d:>3}{t_py:>14.4f}{t_cy:>14.4f}{t_py / t_cy:>10.1f}")


if __name__ == "__main__":
    main()
