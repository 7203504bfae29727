#!/usr/bin/env python3
"""Tour of the pick-and-place simulator.

Walks one scripted episode step by step and prints what the environment is
doing: mode switches, grasping, carrying, placement.  Good first stop for
understanding the task the policies must learn.

Run: python demos/01_simulator_tour.py
"""

from dipa import Env, EnvConfig, OperatorConfig, ScriptedOperator, derive_stream, is_manual

env = Env(EnvConfig(n_objects=2, sigma_init_cm=2.0))
operator = ScriptedOperator(OperatorConfig(), env.config)

state = env.reset(derive_stream(7, ("tour",)))
print(f"t_max={env.config.resolved_t_max}, objects start at:")
for i, o in enumerate(state.objects):
    print(f"  object {i}: ({o.x:+6.2f}, {o.y:+6.2f}) -> blue slot ({env.config.blue_x:+.0f}, {env.config.slot_y(i):+.0f})")

last_mode = 0
while not env.is_done(state):
    mode = operator.switch_mode(state)
    if mode != last_mode:
        kind = "manual" if is_manual(mode) else "auto"
        print(f"t={state.t:3d}  mode {last_mode} -> {mode} ({kind})")
        last_mode = mode
    state = state.with_mode(mode)
    action = operator.manual_action(state, mode) if is_manual(mode) else operator.auto_action(mode)
    before = state.moved_count
    state = env.step(state, action)
    if state.moved_count > before:
        print(f"t={state.t:3d}  placed an object ({state.moved_count}/{env.config.n_objects})")
    elif state.attached_index is not None and mode == 1:
        pass  # carrying; the mode switch will announce it

print(f"\nepisode finished at t={state.t}: success={env.is_success(state)}")
gx, gy, gz, gtheta = state.gripper
print(f"gripper ended at ({gx:+.2f}, {gy:+.2f}, {gz:+.2f}, theta={gtheta:.2f})")
