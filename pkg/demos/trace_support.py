"""Watch a sparse support drift.

Prints a short trajectory for a few resample rates so the effect of ``p``
is visible at a glance: at ``p=0`` nothing moves, at ``p=1`` every slot is
redrawn each step.
"""
import numpy as np

from haystack import DynamicsConfig, simulate_trajectory

n, s, steps = 40, 4, 8

for p in (0.0, 0.25, 1.0):
    traj = simulate_trajectory(DynamicsConfig(n, s, p, 1.0), steps, np.random.default_rng(1))
    print(f"p = {p}")
    for t, state in enumerate(traj.states, start=1):
        moved = len(traj.resampled[t - 2]) if t > 1 else 0
        print(f"  t={t:2d}  support={sorted(state.active)}  redrawn={moved}")
    kept = np.mean([len(a.active & b.active) for a, b in zip(traj.states, traj.states[1:])])
    print(f"  mean overlap between consecutive supports: {kept:.2f} of {s}\n")
