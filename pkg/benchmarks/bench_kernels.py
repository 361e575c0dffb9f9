"""Compare the compiled kernels with the pure-Python fallback.

Runs the same hierarchy and trajectory problems through both kernel
modules, checks that the results agree and prints the timings.

    python benchmarks/bench_kernels.py [--repeat N] [--n-traj N]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from photon_transistor.engine import EngineConfig
from photon_transistor.engine._select import compiled, fallback
from photon_transistor.engine.config import build_problem
from photon_transistor.engine.hierarchy import build_generator
from photon_transistor.engine.trajectories import _system_vector, step_size
from photon_transistor.model import SystemParams, control_pulse, target_pulse


def hierarchy_case():
    params = SystemParams(gamma_r=1e-5, gamma_phi=1e-5, tau2=2000.0)
    prob = build_problem(params, target_pulse(params, 2000.0), control_pulse(params),
                         EngineConfig())
    gen = build_generator(prob)
    indptr, indices, data, tags = gen.combined()
    readout = np.zeros((1, gen.n_state), dtype=complex)

    def run(k):
        y, _, steps = k.hier_integrate(indptr, indices, data, tags, gen.y0, prob.breakpoints,
                                       prob.pulse_t, prob.pulse_c, 1e-8, 1e-12,
                                       prob.tau_min / 100.0, np.inf, np.zeros(0), readout)
        return np.asarray(y), steps

    return run


def trajectory_case(n_traj: int):
    params = SystemParams(gamma_r=1e-4, gamma_phi=1e-4, tau2=1000.0)
    cfg = EngineConfig(backend="trajectories")
    prob = build_problem(params, target_pulse(params, 1000.0), control_pulse(params), cfg)
    h = step_size(prob, cfg)
    sysv = _system_vector(prob)
    y0 = np.zeros(25, dtype=complex)
    y0[0] = 1.0
    thresholds = np.linspace(0.999, 0.8, n_traj)
    seeds = np.arange(1, n_traj + 1, dtype=np.uint64)

    def run(k):
        y, forks, flags, _ = k.traj_integrate(y0, prob.breakpoints, prob.pulse_t, prob.pulse_c,
                                              sysv, h, thresholds, seeds, np.zeros(0))
        return np.concatenate([np.asarray(y), np.asarray(forks).ravel()]), np.asarray(flags)

    return run


def best_time(fn, repeat: int) -> tuple[float, object]:
    best, out = np.inf, None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=3)
    parser.add_argument("--n-traj", type=int, default=20)
    args = parser.parse_args()

    fast = compiled()
    slow = fallback()
    if fast is None:
        print("compiled kernels are not built; only the fallback is available")
        return
    cases = [("hierarchy (pair, 120 states)", hierarchy_case()),
             (f"trajectories (pair, {args.n_traj} forks)", trajectory_case(args.n_traj))]
    print(f"{'case':<34}{'compiled [s]':>14}{'python [s]':>14}{'speed-up':>10}{'max diff':>12}")
    for name, run in cases:
        t_fast, r_fast = best_time(lambda: run(fast), args.repeat)
        t_slow, r_slow = best_time(lambda: run(slow), 1)
        diff = float(np.max(np.abs(r_fast[0] - r_slow[0])))
        same_aux = np.array_equal(r_fast[1], r_slow[1])
        print(f"{name:<34}{t_fast:>14.3f}{t_slow:>14.3f}{t_slow / t_fast:>10.1f}{diff:>12.2e}"
              + ("" if same_aux else "  (auxiliary outputs differ)"))


if __name__ == "__main__":
    main()
