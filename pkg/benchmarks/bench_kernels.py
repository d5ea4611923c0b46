"""Compiled vs pure-Python kernel throughput.

    python3 benchmarks/bench_kernels.py [--kib 256] [--repeat 3]
"""

import argparse
import os
import time

from nyonscope.kernels import backends


def _best(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--kib", type=int, default=256, help="XTS payload size")
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)

    data = os.urandom(args.kib * 1024)
    key = os.urandom(32)
    material = os.urandom(32 * 4000)
    results = {}
    for name, mod in sorted(backends().items()):
        xts = _best(lambda: mod.xts_decrypt(key, data, 0, 512), args.repeat)
        af = _best(lambda: mod.af_merge(material, 32, 4000, "sha256"), args.repeat)
        results[name] = (xts, af)
        print(f"{name:>8}: xts_decrypt {len(data) / xts / 1e6:8.2f} MB/s   af_merge(4000 stripes) {af * 1e3:8.2f} ms")
    if len(results) == 2:
        print(f" speedup: xts x{results['python'][0] / results['compiled'][0]:.1f}, "
              f"af_merge x{results['python'][1] / results['compiled'][1]:.1f}")
    else:
        print("compiled backend not built; only the fallback was measured")


if __name__ == "__main__":
    main()
