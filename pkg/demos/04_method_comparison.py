#!/usr/bin/env python3
"""Small-scale method comparison.

Runs all six comparison methods on the two-object task with one seed at
reduced scale and prints the final test performance plus the converged
disturbance levels, mirroring the structure of the full studies (the
acceptance suite runs them at full desk scale).

Run: python demos/04_method_comparison.py      (~3 min)
"""

from dipa import ExperimentConfig, run_experiment
from dipa.config import with_env

config = with_env(
    ExperimentConfig(iterations=4, episodes_per_iteration=8, eval_episodes=10, seeds=(0,)),
    n_objects=2,
)

print("two objects, K=4 x E=8, one seed (reduced scale)\n")
print(f"{'method':>12} {'success by iteration':>24} {'final sigma (dx dy dz dth)':>32}")
for method in ("dipa", "dipa_minus", "s_dipa_minus", "bcpa", "dart", "bc"):
    records = run_experiment(config, method, seed=0)
    series = " ".join(f"{r.eval.success_rate:4.1f}" for r in records)
    sig = " ".join(f"{v:5.2f}" for v in records[-1].sigma_next.sigma)
    print(f"{method:>12} [{series}] [{sig}]")

print("\npartial automation (pa) methods learn only the two manual phases;")
print("disturbance injection (di) methods broaden their own training data;")
print("the zero sigma rows are the no-injection baselines.")
