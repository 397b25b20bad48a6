#!/usr/bin/env python3
"""Benchmark the compiled Maxwell-Bloch kernel against the numpy fallback.

Usage: python benchmarks/bench_mbe.py [--gains 4 12 24 36]
"""

import argparse
import time

from raselab.gain import (
    HAVE_COMPILED_KERNEL,
    MbeConfig,
    gain_db_to_alpha_l,
    gaussian_probe_trace,
    mbe_simulate,
)
from raselab.sequence import build_i4le


def run(backend: str, gains) -> list[float]:
    seq = build_i4le(t_a=6.0, t_b=0.1)
    probe = gaussian_probe_trace()
    times = []
    for gain_db in gains:
        cfg = MbeConfig(alpha_l_gain=gain_db_to_alpha_l(gain_db))
        t0 = time.perf_counter()
        mbe_simulate(cfg, seq, probe, backend=backend)
        times.append(time.perf_counter() - t0)
    return times


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--gains", type=float, nargs="+", default=[4.0, 12.0, 24.0, 36.0])
    args = ap.parse_args()

    backends = ["python"]
    if HAVE_COMPILED_KERNEL:
        backends.insert(0, "compiled")
    else:
        print("compiled kernel not built; benchmarking the numpy path only")

    results = {b: run(b, args.gains) for b in backends}
    print(f"{'gain_db':>8} " + " ".join(f"{b:>12}" for b in backends)
          + ("     speedup" if len(backends) == 2 else ""))
    for i, g in enumerate(args.gains):
        row = f"{g:8.1f} " + " ".join(f"{results[b][i]:10.3f} s" for b in backends)
        if len(backends) == 2:
            row += f"  x{results['python'][i] / results['compiled'][i]:8.1f}"
        print(row)
    for b in backends:
        print(f"{b}: total {sum(results[b]):.2f} s over {len(args.gains)} runs")


if __name__ == "__main__":
    main()
