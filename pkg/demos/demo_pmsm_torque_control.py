"""Closed-loop predictive torque control of a PMSM, QP against LP.

Runs a shortened version of the stock scenario (accelerate to 420 rad/s,
then an 8 N.m load step) with both solvers and prints the headline
numbers: settling, worst constraint residual on applied samples, the
field-weakening i_d excursion after the load step, and iteration counts.
"""

import time

import numpy as np

from flatpoly import (
    PmsmParams,
    Scenario,
    pmsm_constraints,
    run_closed_loop,
)

scenario = Scenario(duration=0.1, load_torque=((0.0, 0.0), (0.07, 8.0)))
params = PmsmParams()
spec = pmsm_constraints(params)
target = scenario.speed_setpoints[0][1]

for kind in ("qp", "lp"):
    start = time.perf_counter()
    trace = run_closed_loop(scenario, kind, params)
    elapsed = time.perf_counter() - start

    worst = -np.inf
    for row in trace:
        x = np.array([row.i_d, row.i_q])
        u = np.array([row.v_d, row.v_q])
        worst = max(worst, float((spec.G_x @ x + spec.G_u @ u
                                  + spec.g0).max()))

    settle = None
    for row in trace:
        if row.t >= 0.07:
            break
        if abs(row.omega - target) <= 0.02 * target:
            if settle is None:
                settle = row.t
        else:
            settle = None

    after = [r.i_d for r in trace if r.t >= 0.07]
    fallbacks = sum(1 for r in trace if r.status != "optimal")
    print(f"{kind}:")
    print(f"  steps                 {len(trace)} in {elapsed:.2f}s")
    print(f"  settled to 420 +-2%   t = {settle:.4f}s (before load step)")
    print(f"  worst poly residual   {worst:.2e} (<= 0 means inside)")
    print(f"  i_d peak after step   {min(after):.3f} A")
    print(f"  final (i_d, i_q)      ({trace[-1].i_d:.3f}, "
          f"{trace[-1].i_q:.3f}) A")
    print(f"  worst iterations      {max(r.iterations for r in trace)}")
    print(f"  fallback steps        {fallbacks}")
