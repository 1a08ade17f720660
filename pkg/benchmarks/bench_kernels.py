"""Time the numba kernels against their pure-numpy counterparts.

Run with ``python benchmarks/bench_kernels.py``. Both variants are called
directly, so the ``PHOTONODE_DISABLE_JIT`` flag does not matter here.
"""

import argparse
import timeit

import numpy as np

from photonode import _kernels, tomography
from photonode.states import target_state


def random_unitary(dim, rng):
    z = (rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def bench(label, numba_fn, numpy_fn, repeat):
    numba_fn()  # compile outside the timed region
    t_jit = min(timeit.repeat(numba_fn, number=1, repeat=repeat))
    t_np = min(timeit.repeat(numpy_fn, number=1, repeat=repeat))
    print(f"{label:<32} numba {t_jit * 1e3:9.3f} ms   numpy {t_np * 1e3:9.3f} ms   speedup {t_np / t_jit:6.1f}x")


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args(argv)
    rng = np.random.default_rng(0)

    for dim in (4, 8):
        u = random_unitary(dim, rng)
        patterns = _kernels.pattern_table(dim)
        bench(
            f"two-photon transfer, {dim} modes",
            lambda: _kernels.two_photon_transfer_numba(u, patterns),
            lambda: _kernels.two_photon_transfer_numpy(u, patterns),
            args.repeat,
        )

    for name, shots in (("PhiPlus", 10_000), ("Cluster", 1_000_000)):
        data = tomography.simulate_counts(target_state(name), shots, seed=1)
        mle_args = (tomography.all_projectors(), data.frequencies(), np.eye(4, dtype=complex) / 4, 1e-10, 100_000, 0.5)
        bench(
            f"MLE {name}, {shots:.0e} shots",
            lambda: _kernels.mle_fixed_point_numba(*mle_args),
            lambda: _kernels.mle_fixed_point_numpy(*mle_args),
            args.repeat,
        )


if __name__ == "__main__":
    main()
