#!/usr/bin/env python3
"""Disturbance injection and the recovery behavior it elicits.

Collects demonstrations at increasing disturbance levels and shows how the
operator keeps succeeding while episodes get longer; the extra steps are
recovery actions, exactly the data that robustifies the learned policies.
Also verifies the injection contract: noise lands only on manual-mode steps.

Run: python demos/02_disturbance_and_recovery.py
"""

import numpy as np

from dipa import (
    VARIANTS,
    DisturbanceLevel,
    Env,
    EnvConfig,
    OperatorConfig,
    ScriptedOperator,
    collect_iteration,
    derive_stream,
)

env = Env(EnvConfig(n_objects=1))
operator = ScriptedOperator(OperatorConfig(), env.config)

print(f"{'sigma':>8} {'success':>8} {'mean len':>9} {'manual frac':>12} {'auto noise':>11} {'manual std':>11}")
for level in (0.0, 0.04, 0.25, 1.0):
    sigma = DisturbanceLevel((level,) * 4, 1 if level == 0 else 2)
    trajs = collect_iteration(
        VARIANTS["dipa"], env, operator, sigma, 40, derive_stream(11, ("demo", str(level))), 2
    )
    auto_res, manual_res = [], []
    for traj in trajs:
        for step in traj.steps:
            diff = step.action_executed.as_array() - step.action_intended.as_array()
            (manual_res if step.mode in (1, 3) else auto_res).append(diff)
    manual_frac = len(manual_res) / (len(manual_res) + len(auto_res))
    print(
        f"{level:8.2f} "
        f"{sum(t.success for t in trajs):5d}/40 "
        f"{np.mean([len(t) for t in trajs]):9.1f} "
        f"{manual_frac:12.2f} "
        f"{np.abs(auto_res).max() if auto_res else 0.0:11.3f} "
        f"{np.std(manual_res, axis=0).mean() if level else 0.0:11.3f}"
    )

print("\nauto-mode steps carry exactly zero noise at every level;")
print("manual-step noise std tracks sqrt(sigma), and the operator absorbs it by recovering.")
