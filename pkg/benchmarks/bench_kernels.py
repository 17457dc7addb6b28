"""Compare the compiled and pure-Python plant kernels.

    python benchmarks/bench_kernels.py [--repeat 5]

Times one ``rk4_hold`` call (10 substeps) and a full closed-loop rollout
under the model-based filter with each available backend.
"""

import argparse
import timeit
from contextlib import contextmanager

import numpy as np

from cbflearn import CBFQP, load_config, perturb_params, shipped_config_path, simulate
from cbflearn import kernels


@contextmanager
def use_backend(name):
    impl = kernels.load_backend(name)
    saved = kernels.segway_deriv, kernels.rk4_hold
    kernels.segway_deriv, kernels.rk4_hold = impl.segway_deriv, impl.rk4_hold
    try:
        yield impl
    finally:
        kernels.segway_deriv, kernels.rk4_hold = saved


def bench(repeat):
    cfg = load_config(shipped_config_path())
    nom, bf = cfg.nominal_params(), cfg.barrier_function()
    plant = perturb_params(nom, 0.15, 0)
    k0 = CBFQP(bf, cfg.class_k(), nom, cfg.pd_gains())
    sim = cfg.simulation
    x0 = np.array([0.0, 0.3, 0.1, -0.2])
    p, xt = plant.packed, tuple(float(v) for v in x0)

    rows = {}
    for name in kernels.available_backends():
        with use_backend(name) as impl:
            n = 2000
            step = min(timeit.repeat(lambda: impl.rk4_hold(p, xt, 10.0, 1e-3, 10), number=n, repeat=repeat)) / n
            roll = min(timeit.repeat(lambda: simulate(plant, k0, x0, sim.horizon, sim.dt_ctrl, sim.substeps),
                                     number=1, repeat=repeat))
            final = simulate(plant, k0, x0, sim.horizon, sim.dt_ctrl, sim.substeps).states[-1]
        rows[name] = (step, roll, final)

    print(f"{'backend':<8} {'rk4_hold [us]':>14} {'rollout [s]':>12}")
    for name, (step, roll, _) in rows.items():
        print(f"{name:<8} {step * 1e6:>14.2f} {roll:>12.3f}")
    if len(rows) == 2:
        (s_c, r_c, f_c), (s_p, r_p, f_p) = rows["cython"], rows["python"]
        print(f"speedup: rk4_hold x{s_p / s_c:.1f}, rollout x{r_p / r_c:.1f}; "
              f"final states identical: {np.array_equal(f_c, f_p)}")


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    bench(parser.parse_args().repeat)


if __name__ == "__main__":
    main()
