"""Time the forward/backward sweeps with numba and with pure numpy.

    python3 benchmarks/bench_kernels.py [--samples 7000] [--repeat 20]
"""

import argparse
import time

import numpy as np

from pqsphoton import _accel
from pqsphoton.experiments import experiment1_config
from pqsphoton.fock import relaxation_bands, uniform
from pqsphoton.simulate import simulate_run


def best_of(fn, args, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        times.append(time.perf_counter() - t0)
    return min(times)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--samples", type=int, default=7000)
    ap.add_argument("--repeat", type=int, default=20)
    args = ap.parse_args(argv)

    cfg = experiment1_config()
    cfg = type(cfg)(cfg.model, cfg.initial_state, args.samples)
    record = simulate_run(cfg, np.random.default_rng(0))
    W = record.measurement_weights()
    bands = relaxation_bands(cfg.model)
    start = uniform(cfg.model.n_max)

    rows = [("numpy", _accel.forward_sweep_numpy, _accel.backward_sweep_numpy)]
    if _accel.numba is not None:
        # first call compiles (or loads the on-disk cache)
        _accel.forward_sweep_numba(*bands, W, start)
        _accel.backward_sweep_numba(*bands, W, start)
        rows.append(("numba", _accel.forward_sweep_numba, _accel.backward_sweep_numba))
    else:
        print("numba not installed; numpy only")

    print(f"S = {args.samples}, N = {cfg.model.n_max}, best of {args.repeat}")
    base = None
    for name, fwd, bwd in rows:
        t = best_of(fwd, (*bands, W, start), args.repeat) + best_of(bwd, (*bands, W, start), args.repeat)
        base = base or t
        print(f"{name:>6}: {1e3 * t:8.3f} ms per forward+backward pass  (x{base / t:.1f})")


if __name__ == "__main__":
    main()
