#!/usr/bin/env python3
"""One full iterative training run, narrated.

Runs the proposed method for five iterations on the one-object task and
prints the quantities the method revolves around: the disturbance level
rising from zero as the policy's residuals are measured, the manual-step
log-likelihood diagnostic, and the test success per iteration.

Run: python demos/03_one_training_run.py      (~30 s)
"""

from dipa import ExperimentConfig, run_experiment
from dipa.config import with_env

config = with_env(
    ExperimentConfig(iterations=5, episodes_per_iteration=10, eval_episodes=10, seeds=(0,)),
    n_objects=1,
)
print("method: dipa, one object, K=5 iterations x E=10 episodes\n")
records = run_experiment(config, "dipa", seed=0)

print(f"{'k':>2} {'success':>8} {'episode len':>12} {'sigma_next (dx dy dz dth)':>34} {'manual NLL':>11}")
for r in records:
    sig = " ".join(f"{v:6.3f}" for v in r.sigma_next.sigma)
    nll = f"{r.manual_step_nll:11.3f}" if r.manual_step_nll is not None else "          -"
    print(f"{r.k:2d} {r.eval.success_rate:8.2f} {r.eval.mean_episode_length:12.1f} [{sig}] {nll}")

print("\niteration 1 collects with zero disturbance (the method's defining initialization);")
print("each later iteration injects the level estimated from the previous fit's residuals.")
print(f"illegal mode transitions across all evaluations: "
      f"{sum(r.eval.illegal_transition_count for r in records)} (the rollout mask forbids them)")
