"""
How fast the factorized likelihood becomes exact.

For N = 1..8 nodes (M = 16, SNR = 10 dB) estimates the L1 distance between
the exact and factorized characteristic functions by importance sampling,
alongside the closed-form bound, and fits the exponential decay in N.

Run:  python demos/04_bound_vs_nodes.py
"""
import numpy as np

from wsnsense.bounds import bound_vs_n_experiment
from wsnsense.numerics import RngStream
from wsnsense.scenario import ScenarioConfig

cfg = ScenarioConfig(window_len=16, window_time=16 / 5e6, snr_db=10.0, master_seed=7)
rows = bound_vs_n_experiment(cfg, range(1, 9), 100_000, RngStream(7, 0, (3,)))

print(" N   MC bound      stderr     closed form")
for r in rows:
    print(f"{r.N:2d}  {r.mc_bound:10.3e}  {r.mc_stderr:9.2e}  {r.analytic_bound:10.3e}")

n = np.array([r.N for r in rows], float)
y = np.log([r.mc_bound for r in rows])
slope, icpt = np.polyfit(n, y, 1)
r2 = 1 - np.sum((y - (slope * n + icpt)) ** 2) / np.sum((y - y.mean()) ** 2)
print(f"\nlog(bound) ~ {icpt:.2f} {slope:+.3f} N   (R^2 = {r2:.3f})")
