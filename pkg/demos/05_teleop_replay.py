#!/usr/bin/env python3
"""Drive a teleop session from a script and train on the saved episode.

The live server is a thin shell around a deterministic message handler, so
a recorded message sequence replays to the exact same trajectory file.  This
demo scripts a full episode through the protocol (as the browser console
would), saves it, reloads it, and fits policies on it.

Run: python demos/05_teleop_replay.py
For the interactive version: `dipa teleop --port 8765` + frontend/index.html.
"""

import tempfile
from pathlib import Path

from dipa import VARIANTS, EnvConfig, OperatorConfig, ScriptedOperator, fit_iteration, is_manual
from dipa.nn import TrainSpec
from dipa.teleop import TeleopSession, handle_message
from dipa.trajio import read_trajectories

out = Path(tempfile.mkdtemp(prefix="teleop_demo_"))
cfg = EnvConfig(n_objects=1)
operator = ScriptedOperator(OperatorConfig(), cfg)  # stands in for the human here
session = TeleopSession(env_config=cfg, out_dir=out)

handle_message(session, {"type": "start", "config": {"n_objects": 1}, "sigma": 0.0, "seed": 12})
sent = 2
while not session.env.is_done(session.env_state):
    state = session.env_state
    mode = operator.switch_mode(state)
    if mode != state.current_mode:
        _, reply = handle_message(session, {"type": "switch_mode", "mode": mode})
        print(f"tick {session.tick_count:3d}: switch -> {mode}: {reply[0]['type']}")
        sent += 1
    if is_manual(mode):
        a = operator.manual_action(session.env_state, mode)
        handle_message(session, {"type": "action", "dx": a.dx, "dy": a.dy, "dz": a.dz, "dtheta": a.dtheta})
        sent += 1
    _, state_msgs = handle_message(session, {"type": "tick"})
    sent += 1

_, saved = handle_message(session, {"type": "save"})
path = saved[0]["path"]
print(f"\nsent {sent} messages; saved {saved[0]['steps']} steps to {path}")

trajs = read_trajectories(path)
print(f"reloaded: success={trajs[0].success}, method={trajs[0].method!r}")
bundle, reports = fit_iteration(VARIANTS["bcpa"], trajs, TrainSpec(max_epochs=30, seed=0))
print(f"trained on the human-format demo: switch net {reports['switch'].epochs_run} epochs, "
      f"action net {reports['action_shared'].epochs_run} epochs")
