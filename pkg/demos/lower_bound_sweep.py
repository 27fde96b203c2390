"""Monte Carlo risk lower bound for sub-sampling designs, as a CSV.

Small dimension so it finishes in well under a minute.  Each row is one
(p, t) point; ``bound`` is the estimated lower bound on the risk of any
test that uses this design and ``bound_se`` its standard error.
"""
import sys

from haystack import figure3_sweep, sweep_to_csv

panel = sys.argv[1] if len(sys.argv) > 1 else "left"
points = figure3_sweep(panel, t_grid=(0.0, 0.5, 1.0, 1.5), sim_counts=(100, 20_000), n=500, s=5, seed=0)
sweep_to_csv(points, panel, seed=0, fh=sys.stdout)
