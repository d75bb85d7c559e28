"""Compare the compiled and pure-Python kernel backends.

    python3 benchmarks/bench_kernels.py [--repeat 5]
"""

import argparse
import timeit

import numpy as np

from spacemimo import kernels


def _hpd_batch(rng, batch, m):
    g = rng.standard_normal((batch, m, m)) + 1j * rng.standard_normal((batch, m, m))
    a = g @ np.conj(np.swapaxes(g, -1, -2)) + m * np.eye(m)
    rhs = rng.standard_normal((batch, m)) + 1j * rng.standard_normal((batch, m))
    return a, rhs


def cases(rng):
    x = rng.uniform(0.0, 200.0, 20_000)
    yield "log_hyp0f1 b=5, 20k args", lambda k: k.log_hyp0f1(5.0, x)
    for batch, m in ((2000, 4), (500, 19), (100, 64)):
        a, rhs = _hpd_batch(rng, batch, m)
        yield f"hpd_solve {batch} x {m}x{m}", lambda k, a=a, rhs=rhs: k.hpd_solve(a, rhs)


def main(argv=None):
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    backends = [("python", kernels.python_backend)]
    if kernels.compiled_backend is not None:
        backends.append(("compiled", kernels.compiled_backend))
    else:
        print("compiled backend not built; timing the Python backend only")
    rng = np.random.default_rng(0)
    print(f"{'kernel':32s}" + "".join(f"{name:>14s}" for name, _ in backends) + "   speedup")
    for label, fn in cases(rng):
        times = []
        for _, mod in backends:
            fn(mod)  # warm-up
            times.append(min(timeit.repeat(lambda: fn(mod), number=1, repeat=args.repeat)))
        speed = f"{times[0] / times[1]:8.1f}x" if len(times) == 2 else ""
        print(f"{label:32s}" + "".join(f"{t * 1e3:11.2f} ms" for t in times) + "  " + speed)


if __name__ == "__main__":
    main()
