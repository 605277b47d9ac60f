"""
Capturing price spikes with a single distance m
===============================================

A demand bid priced m below the hourly mean day-ahead price only clears
when the day-ahead price dips at least m below normal.  The cleared set,
and with it the profit, only changes when m crosses one of those dips, so
trying every dip inside the bounds finds the exact optimum.
"""

import numpy as np

from virtualbid.spike import (
    OptimizerConfig,
    SpikeInstance,
    encode_milp_witness,
    evaluate_m,
    milp_lp_text,
    solve_breakpoints,
    solve_grid_oracle,
    verify_milp_constraints,
)

# three hours with a mean day-ahead price of 40
inst = SpikeInstance("D", dlmp=[10, 50, 30], rtlmp=[35, 20, 10], avg_dlmp=[40, 40, 40])
for m in (5, 20, 31):
    ev = evaluate_m(inst, m)
    print(f"m={m:>2}: cleared {ev.cleared.astype(int)}, objective {ev.objective}, loss {ev.loss}")

cfg = OptimizerConfig(epsilon=0.01, m_min=0, m_max=100)
sol = solve_breakpoints(inst, cfg)
print("best m", sol.m_star, "objective", sol.objective, "bid prices", sol.bid_schedule)

# the same answer from a brute-force scan of m
ref = solve_grid_oracle(inst, cfg, step=0.5)
print("grid scan agrees:", ref.objective == sol.objective)

# the mixed-integer form: the solution as binaries, checked row by row
w = encode_milp_witness(inst, sol)
print("b1", w.b1, "b2", w.b2, "z", w.z)
print("witness valid:", verify_milp_constraints(inst, w, cfg)[0])
print(milp_lp_text(inst, cfg).splitlines()[2])

# a week of noisy prices with three planted dips; the deepest one loses a
# little and clears whenever the others do, so a tight enough loss
# tolerance forbids the whole trade
rng = np.random.default_rng(0)
hours = np.arange(168) % 24
dl = 40 + 10 * np.sin(2 * np.pi * hours / 24) + rng.normal(0, 3, 168)
dl[[20, 70, 130]] -= [80, 60, 150]
rt = 40 + 10 * np.sin(2 * np.pi * hours / 24) + rng.normal(0, 3, 168)
rt[130] = dl[130] - 1  # real time dips further: the deepest hour loses
avg = np.array([dl[hours == h].mean() for h in hours])
for eps in (0.1, 0.01, 0.001):
    sol = solve_breakpoints(SpikeInstance("D", dl, rt, avg), OptimizerConfig(epsilon=eps))
    print(f"epsilon {eps}: m={sol.m_star:.2f}, cleared {sol.n_cleared}, objective {sol.objective:.2f}")
