"""
Complementary ROC at desk scale.

Runs the slow-fading campaign (N = 20 nodes, L = 20 windows, -9 dB) for the
genie-aided and blind likelihood-ratio detectors and two baselines, and
prints miss-detection probability against false-alarm target. Takes about
a minute on one core.

Run:  python demos/03_croc_desk.py [n_trials]
"""
import sys

from wsnsense.harness import ExperimentSpec, render, run_croc
from wsnsense.scenario import PRESETS

n_trials = int(sys.argv[1]) if len(sys.argv) > 1 else 1000
spec = ExperimentSpec(PRESETS["desk"].replace(master_seed=3),
                      detectors=("CSI-SF", "GLRT-SF", "MD", "SC", "ME"),
                      pfa_grid=(0.01, 0.05, 0.1, 0.2), n_trials=n_trials, n_calib=10_000)
table = run_croc(spec)

print(f"{'detector':8s}" + "".join(f"  Pfa={a:<5g}" for a in spec.pfa_grid))
for k in spec.detectors:
    rows = table.select(detector=k.value)
    print(f"{k.value:8s}" + "".join(f"  {r['pmd_emp']:<9.4f}" for r in rows))
print("\nfull table (CSV):\n")
print(render(table))
