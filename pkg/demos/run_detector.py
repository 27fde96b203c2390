"""One run of the adaptive detector against each hypothesis.

The detector draws random components, runs a short thresholding test on
each and stops at the first "signal".  Under the null it should use the
whole query allowance; under the alternative it usually stops early.
"""
import numpy as np

from haystack import BoundInputs, DetectorConfig, DynamicsConfig, detect, mu_upper_thm1, world_oracle

n, s, p, eps = 5000, 9, 0.2, 0.05
mu = mu_upper_thm1(BoundInputs(n, s, p=p, epsilon=eps))
cfg = DetectorConfig.for_problem(n, s, eps)
print(f"T = {cfg.T} tests, budget m = {cfg.m}, STT depth k = {cfg.schedule.k}, mu = {mu:.3f}")

for hyp in ("null", "alternative"):
    world = world_oracle(DynamicsConfig(n, s, p, mu), hyp, cfg.m, np.random.default_rng(7))
    v = detect(cfg, n, world, np.random.default_rng(8))
    print(f"{hyp:>11}: psi={v.psi}  tests run={len(v.runs)}  measurements={v.measurements_used}")
