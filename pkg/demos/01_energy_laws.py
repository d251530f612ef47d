"""
Energy laws at a single node.

Simulates one node's energies under both hypotheses and compares their
histograms with the closed-form densities: the Gamma law under H0, the
factorized noncentral chi-square law for a fixed gain, and the exact
sum-of-exponentials marginal.

Run:  python demos/01_energy_laws.py
"""
import numpy as np

from wsnsense.likelihoods import LikelihoodParams, log_pdf_h0, log_pdf_marginal_h1, log_pdf_sf
from wsnsense.measurement import ChannelDraw, simulate_energies
from wsnsense.numerics import RngStream
from wsnsense.scenario import ScenarioConfig, build_source_covariance

M, L = 32, 200_000
cfg = ScenarioConfig(n_nodes=1, n_windows=L, window_len=M)
src = build_source_covariance(float(M), 1.0, M, cfg.corr)  # unit power per sample, rho = 0.5
p = LikelihoodParams.from_source(src, cfg.beta, 1.0)       # noise-normalized units
h = 0.6 + 0.2j
c = src.trace * abs(h) ** 2

rng = RngStream(1)
silent = ChannelDraw(np.ones(1), np.zeros((1, L), complex))
active = ChannelDraw(np.ones(1), np.full((1, L), h))
e0 = simulate_energies("H0", cfg, src, silent, rng.purpose(1), sigma_v2=1.0).values.ravel()
e1 = simulate_energies("H1", cfg, src, active, rng.purpose(2), sigma_v2=1.0).values.ravel()

print(f"M = {M}, beta = {cfg.beta:.4f}, c = trace*|h|^2 = {c:.3f}")
print(f"H0 mean: simulated {e0.mean():.4f}, theory {p.h0_mean:.4f}")
print(f"H1 mean: simulated {e1.mean():.4f}, theory {(c + M) / cfg.beta:.4f}")

counts, edges = np.histogram(e1, bins=40)
mid = 0.5 * (edges[1:] + edges[:-1])
width = edges[1] - edges[0]
emp = counts / (L * width)
sf = np.exp(log_pdf_sf(mid, c, p))
exact = np.exp(log_pdf_marginal_h1(mid, abs(h) ** 2, p))
print("\n  energy   histogram   factorized    exact")
for x, a, b, d in list(zip(mid, emp, sf, exact))[::4]:
    print(f"{x:8.3f}  {a:10.5f}  {b:11.5f}  {d:8.5f}")

tv_sf = 0.5 * np.sum(np.abs(emp - sf)) * width
tv_ex = 0.5 * np.sum(np.abs(emp - exact)) * width
print(f"\ntotal variation vs factorized law: {tv_sf:.4f}; vs exact marginal: {tv_ex:.4f}")
print(f"H0 log-density at its mean: {log_pdf_h0(p.h0_mean, p):.4f}")
