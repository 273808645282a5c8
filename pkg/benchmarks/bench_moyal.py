"""Time the compiled and pure-Python Moyal kernels on the same workload.

    python benchmarks/bench_moyal.py [--repeat 5]
"""

import argparse
import random
import time
from fractions import Fraction

from star_forge import _moyal_py
from star_forge.algebra import SymplecticFrame

try:
    from star_forge import _moyal_ext
except ImportError:
    _moyal_ext = None


def workload(n, deg, terms, seed=0):
    rng = random.Random(seed)
    width = 2 * n
    zero = (0,) * width

    def series():
        out = []
        for _ in range(terms):
            fib = [0] * width
            for _ in range(rng.randint(0, deg)):
                fib[rng.randrange(width)] += 1
            out.append((rng.randint(0, 1), tuple(fib), zero, 0, Fraction(rng.randint(-5, 5), rng.randint(1, 4))))
        return out

    return [(series(), series()) for _ in range(20)]


def run(mod, pairs, tables, max_d):
    start = time.perf_counter()
    results = [mod.moyal_terms(f, g, tables, max_d) for f, g in pairs]
    return time.perf_counter() - start, results


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    for n, deg, N in ((1, 6, 12), (2, 4, 10)):
        frame = SymplecticFrame.minus(n)
        tables = frame.moyal_tables(N)
        pairs = workload(n, deg, 8)
        t_py = min(run(_moyal_py, pairs, tables, N)[0] for _ in range(args.repeat))
        line = f"n={n} deg<={deg} N={N}: python {t_py * 1e3:8.1f} ms"
        if _moyal_ext is not None:
            t_ext, res_ext = min((run(_moyal_ext, pairs, tables, N) for _ in range(args.repeat)),
                                 key=lambda r: r[0])
            same = res_ext == run(_moyal_py, pairs, tables, N)[1]
            line += f"  cython {t_ext * 1e3:8.1f} ms  speedup {t_py / t_ext:5.2f}x  agree={same}"
        else:
            line += "  (compiled kernel not built)"
        print(line)


if __name__ == "__main__":
    main()
