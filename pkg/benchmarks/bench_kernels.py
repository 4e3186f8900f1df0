"""Compare the compiled and pure-Python kernel backends.

    python3 benchmarks/bench_kernels.py [--repeat 20]
"""

import argparse
import timeit

import numpy as np

from oamfidelity import fidelity, kernels
from oamfidelity.probmodels import InterferometerConfig, Strategy, binary_probabilities
from oamfidelity.quadrature import QuadratureGrid


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=20)
    args = parser.parse_args()

    grid = QuadratureGrid.simpson()
    wq = grid.weights / grid.length
    p0, p1 = binary_probabilities(Strategy.Z, grid.nodes, InterferometerConfig(3.0))
    cases = {
        "mutual_information": lambda impl: impl.binary_mutual_information(p0, p1, wq),
        "log_likelihood": lambda impl: impl.bernoulli_log_likelihood(p0, p1, 841.0, 159.0),
    }
    print(f"grid size {grid.size}, best of {args.repeat} runs (microseconds)")
    print(f"{'kernel':<20}" + "".join(f"{name:>12}" for name in sorted(kernels.BACKENDS)))
    for label, call in cases.items():
        times = []
        for name in sorted(kernels.BACKENDS):
            impl = kernels.BACKENDS[name]
            times.append(min(timeit.repeat(lambda: call(impl), number=10, repeat=args.repeat)) / 10)
        print(f"{label:<20}" + "".join(f"{1e6 * t:12.1f}" for t in times))

    # whole sweep, switching the backend the fidelity module calls into
    original = fidelity.kernels.binary_mutual_information
    for name in sorted(kernels.BACKENDS):
        fidelity.kernels.binary_mutual_information = kernels.BACKENDS[name].binary_mutual_information
        t = min(timeit.repeat(lambda: fidelity.fidelity_sweep(Strategy.Z, "mean_photons", [np.arange(1, 21)]),
                              number=1, repeat=max(1, args.repeat // 4)))
        print(f"sweep N=1..20 [{name}]: {1e3 * t:.1f} ms")
    fidelity.kernels.binary_mutual_information = original


if __name__ == "__main__":
    main()
