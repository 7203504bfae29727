"""Live demonstration sessions for human operators.

The session is a deterministic state machine over JSON messages: a fixed
20 Hz tick advances the simulator using the latest held action (replaced by
the automatic policy in auto modes, disturbed by the session's level in
manual modes), and every step lands in the standard trajectory format so
human demonstrations feed the same learner as scripted ones.  The WebSocket
layer below is a thin shell around ``handle_message``; a scripted message
sequence (ticks included) replays to a bit-identical trajectory file.
"""

from __future__ import annotations

import asyncio
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

from .core import ActionDelta, DisturbanceLevel, Step, Trajectory, is_manual, next_mode
from .env import Env, EnvConfig
from .policies import state_features
from .rng import derive_stream
from .scripted_operator import AUTO_ACTIONS, inject_disturbance
from .trajio import write_trajectories

log = logging.getLogger(__name__)

TICK_SECONDS = 0.05
PROTOCOL_VERSION = 1

CLIENT_MESSAGE_TYPES = ("hello", "start", "action", "switch_mode", "reset", "save")


@dataclass
class TeleopSession:
    """One live episode buffer plus the simulator it drives."""

    env_config: EnvConfig = field(default_factory=EnvConfig)
    sigma: DisturbanceLevel = field(default_factory=lambda: DisturbanceLevel.zero(1))
    seed: int = 0
    out_dir: Path = Path("demos")
    phase: str = "idle"  # idle | running | saved
    episode_index: int = 0
    tick_count: int = 0
    env: Env | None = None
    env_state = None
    pending: tuple[float, float, float, float] = (0.0, 0.0, 0.0, 0.0)
    steps: list[Step] = field(default_factory=list)
    noise_rng = None

    def start_episode(self) -> None:
        self.env = Env(self.env_config)
        init = derive_stream(self.seed, ("teleop", self.episode_index, "init"))
        self.noise_rng = derive_stream(self.seed, ("teleop", self.episode_index, "noise"))
        self.env_state = self.env.reset(init)
        self.steps = []
        self.pending = (0.0, 0.0, 0.0, 0.0)
        self.tick_count = 0
        self.phase = "running"


def _error(reason: str) -> dict:
    return {"type": "error", "reason": reason}


def _state_message(session: TeleopSession, intended=None, executed=None) -> dict:
    s = session.env_state
    zero = (0.0, 0.0, 0.0, 0.0)
    return {
        "type": "state",
        "tick": session.tick_count,
        "t": s.t,
        "gripper": list(s.gripper),
        "objects": [
            {"x": o.x, "y": o.y, "z": o.z, "attached": o.attached, "placed": o.placed}
            for o in s.objects
        ],
        "mode": s.current_mode,
        "manual": is_manual(s.current_mode),
        "intended": list(intended.as_tuple() if intended else zero),
        "executed": list(executed.as_tuple() if executed else zero),
        "moved_count": s.moved_count,
        "sigma": list(session.sigma.sigma),
        "done": session.env.is_done(s),
        "success": session.env.is_success(s),
    }


def _finite_number(value) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool) and math.isfinite(value)


def _handle_start(session: TeleopSession, msg: dict) -> list[dict]:
    cfg_obj = msg.get("config") or {}
    if not isinstance(cfg_obj, dict):
        return [_error("start.config must be an object")]
    try:
        known = {k: cfg_obj[k] for k in ("n_objects", "sigma_init_cm", "auto2_threshold", "t_max") if k in cfg_obj}
        if isinstance(known.get("auto2_threshold"), str):
            from .env import AUTO2_THRESHOLDS

            known["auto2_threshold"] = AUTO2_THRESHOLDS[known["auto2_threshold"].upper()]
        session.env_config = EnvConfig(**{**session.env_config.__dict__, **known})
    except (KeyError, TypeError, ValueError) as exc:
        return [_error(f"bad start.config: {exc}")]
    if "sigma" in msg:
        raw = msg["sigma"]
        values = [raw] * 4 if _finite_number(raw) else raw
        try:
            session.sigma = DisturbanceLevel(tuple(float(v) for v in values), iteration_k=2)
        except (TypeError, ValueError) as exc:
            return [_error(f"bad start.sigma: {exc}")]
    if "seed" in msg:
        if not isinstance(msg["seed"], int) or isinstance(msg["seed"], bool):
            return [_error("start.seed must be an integer")]
        session.seed = msg["seed"]
    session.episode_index = 0
    session.start_episode()
    return [
        {"type": "started", "episode": session.episode_index, "seed": session.seed},
        _state_message(session),
    ]


def _handle_action(session: TeleopSession, msg: dict) -> list[dict]:
    if session.phase != "running":
        return [_error("no running episode; send start first")]
    values = []
    for key in ("dx", "dy", "dz", "dtheta"):
        v = msg.get(key, 0.0)
        if not _finite_number(v):
            return [_error(f"action.{key} must be a finite number")]
        values.append(float(v))
    # Held in all modes; automatic modes simply do not apply it.
    session.pending = tuple(values)
    return []


def _handle_switch(session: TeleopSession, msg: dict) -> list[dict]:
    if session.phase != "running":
        return [_error("no running episode; send start first")]
    current = session.env_state.current_mode
    allowed = (current, next_mode(current))
    target = msg.get("mode", next_mode(current))
    if not isinstance(target, int) or isinstance(target, bool):
        return [_error("switch_mode.mode must be an integer")]
    if target not in allowed:
        return [{"type": "nack", "requested": target, "allowed": list(allowed)}]
    session.env_state = session.env_state.with_mode(target)
    return [{"type": "ack", "mode": target}]


def _handle_tick(session: TeleopSession) -> list[dict]:
    if session.phase != "running" or session.env.is_done(session.env_state):
        return []
    state = session.env_state
    mode = state.current_mode
    if is_manual(mode):
        intended = ActionDelta(*session.pending)
        executed = (
            inject_disturbance(intended, session.sigma, session.noise_rng)
            if not session.sigma.is_zero
            else intended
        )
    else:
        intended = executed = AUTO_ACTIONS[mode]
    session.steps.append(
        Step(
            t=state.t,
            state_full=tuple(state_features(state)),
            action_intended=intended,
            action_executed=executed,
            mode=mode,
            episode_id=session.episode_index,
            iteration_k=0,
            env_state=state,
        )
    )
    session.env_state = session.env.step(state, executed)
    session.tick_count += 1
    return [_state_message(session, intended, executed)]


def save_episode(session: TeleopSession, path=None) -> Path:
    """Flush the episode buffer to a trajectory file in the core format."""
    if not session.steps:
        raise ValueError("episode buffer is empty; nothing to save")
    traj = Trajectory(
        episode_id=session.episode_index,
        iteration_k=0,
        seed=session.seed,
        method="teleop",
        sigma=session.sigma.sigma,
        steps=tuple(session.steps),
        success=session.env.is_success(session.env_state),
        terminal=session.env_state,
    )
    out = Path(path) if path is not None else Path(session.out_dir) / f"episode_{session.episode_index:03d}.jsonl"
    write_trajectories([traj], out)
    return out


def handle_message(session: TeleopSession, msg: dict) -> tuple[TeleopSession, list[dict]]:
    """Advance the session state machine by one message.

    Returns the session and the outbound messages it produced.  ``tick`` is
    the internal clock message the server (or a replay script) injects.
    """
    if not isinstance(msg, dict) or "type" not in msg:
        return session, [_error("message must be an object with a 'type' field")]
    kind = msg["type"]
    if kind == "hello":
        return session, [
            {
                "type": "welcome",
                "version": PROTOCOL_VERSION,
                "phase": session.phase,
                "accepts": list(CLIENT_MESSAGE_TYPES),
            }
        ]
    if kind == "start":
        return session, _handle_start(session, msg)
    if kind == "action":
        return session, _handle_action(session, msg)
    if kind == "switch_mode":
        return session, _handle_switch(session, msg)
    if kind == "reset":
        if session.env is None:
            return session, [_error("nothing to reset; send start first")]
        session.episode_index += 1
        session.start_episode()
        return session, [
            {"type": "started", "episode": session.episode_index, "seed": session.seed},
            _state_message(session),
        ]
    if kind == "save":
        if session.phase not in ("running", "saved"):
            return session, [_error("no episode to save")]
        try:
            path = save_episode(session, msg.get("path"))
        except ValueError as exc:
            return session, [_error(str(exc))]
        session.phase = "saved"
        return session, [{"type": "saved", "path": str(path), "steps": len(session.steps)}]
    if kind == "tick":
        return session, _handle_tick(session)
    return session, [_error(f"unknown message type {kind!r}")]


def replay_messages(session: TeleopSession, messages) -> list[dict]:
    """Drive a session through a scripted message sequence; returns all output."""
    out = []
    for msg in messages:
        session, produced = handle_message(session, msg)
        out.extend(produced)
    return out


async def serve(session: TeleopSession, host: str = "127.0.0.1", port: int = 8765) -> None:
    """Host one session over a WebSocket channel.

    A single owner (the event loop) serializes message handling and the
    20 Hz tick; only one client may hold the session at a time.
    """
    import websockets.asyncio.server

    client_lock: dict = {"ws": None}

    async def _send(ws, messages):
        for m in messages:
            await ws.send(json.dumps(m))

    async def handler(ws):
        if client_lock["ws"] is not None:
            await _send(ws, [_error("session is busy; one client at a time")])
            await ws.close()
            return
        client_lock["ws"] = ws
        log.info("client connected")
        try:
            async for raw in ws:
                try:
                    msg = json.loads(raw)
                except json.JSONDecodeError as exc:
                    await _send(ws, [_error(f"malformed JSON: {exc.msg}")])
                    continue
                _, outbound = handle_message(session, msg)
                await _send(ws, outbound)
        finally:
            client_lock["ws"] = None
            log.info("client disconnected")

    async def ticker():
        while True:
            await asyncio.sleep(TICK_SECONDS)
            _, outbound = handle_message(session, {"type": "tick"})
            ws = client_lock["ws"]
            if ws is not None and outbound:
                try:
                    await _send(ws, outbound)
                except Exception:
                    pass

    async with websockets.asyncio.server.serve(handler, host, port):
        log.info("teleop session on ws://%s:%d", host, port)
        await ticker()
