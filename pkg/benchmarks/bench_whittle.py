"""Time the spectrum-fitting kernels on every available backend.

The sampler calls the likelihood gradient/Hessian kernel inside each
Newton step of every segment proposal, so this is the hot path the
compiled extension exists for. Run from the repo root:

    python3 benchmarks/bench_whittle.py
"""
import time

import numpy as np

from corrspec import whittle


SIZES = (128, 512, 1024)
N_BASIS = 10
REPEATS = 200


def segment(n, seed):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=n)
    perio = whittle.periodogram(x)
    design = whittle.cosine_design(whittle.fourier_frequencies(n), N_BASIS)
    prior = np.full(N_BASIS + 1, 1.0)
    prior[0] = 0.01
    return perio, design, prior


def time_call(fn, repeats):
    best = np.inf
    for _ in range(5):
        t0 = time.perf_counter()
        for _ in range(repeats):
            fn()
        best = min(best, (time.perf_counter() - t0) / repeats)
    return best


def main():
    backends = whittle.available_backends()
    names = [m.BACKEND_NAME for m in backends]
    print(f"backends: {', '.join(names)}  (n_basis={N_BASIS}, "
          f"best of 5 x {REPEATS} calls)")
    header = f"{'kernel':<16}{'n':>6}" + "".join(f"{n:>12}" for n in names)
    if len(backends) > 1:
        header += f"{'speedup':>10}"
    print(header)
    for n in SIZES:
        perio, design, prior = segment(n, seed=n)
        beta = whittle.initial_beta(perio, design, prior)
        rows = {
            "grad_hess": lambda b: whittle.grad_hess(perio, design, beta,
                                                     prior_prec=prior,
                                                     backend=b),
            "posterior_mode": lambda b: whittle.posterior_mode(perio, design,
                                                               prior,
                                                               backend=b),
        }
        for kernel, call in rows.items():
            times = [time_call(lambda m=m: call(m), REPEATS) for m in backends]
            line = f"{kernel:<16}{n:>6}"
            line += "".join(f"{t * 1e6:>10.1f}us" for t in times)
            if len(times) > 1:
                line += f"{times[0] / times[-1]:>9.1f}x"
            print(line)


if __name__ == "__main__":
    main()
