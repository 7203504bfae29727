"""Line-delimited trajectory files.

Each trajectory is one header record followed by one record per step, all
UTF-8 JSON objects, one per line.  The format is append-friendly (live
sessions can stream step lines) and round-trips every float exactly via
shortest-repr encoding.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

from .core import ACTION_DIM, MODE_COUNT, ActionDelta, Step, Trajectory
from .env import EnvState, ObjectState


class TrajectoryParseError(ValueError):
    """Raised for malformed trajectory files; names the line and field."""

    def __init__(self, line_no: int, field: str | None, reason: str):
        self.line_no = line_no
        self.field = field
        self.reason = reason
        where = f"line {line_no}"
        if field:
            where += f", field '{field}'"
        super().__init__(f"{where}: {reason}")


def _terminal_to_obj(state: EnvState | None):
    if state is None:
        return None
    return {
        "gripper": list(state.gripper),
        "objects": [
            {"x": o.x, "y": o.y, "z": o.z, "attached": o.attached, "placed": o.placed}
            for o in state.objects
        ],
        "mode": state.current_mode,
        "t": state.t,
    }


def _terminal_from_obj(obj, line_no: int) -> EnvState | None:
    if obj is None:
        return None
    try:
        objects = tuple(
            ObjectState(float(o["x"]), float(o["y"]), float(o["z"]), bool(o["attached"]), bool(o["placed"]))
            for o in obj["objects"]
        )
        return EnvState(
            gripper=tuple(float(v) for v in obj["gripper"]),
            objects=objects,
            current_mode=int(obj["mode"]),
            t=int(obj["t"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise TrajectoryParseError(line_no, "terminal", f"malformed terminal state: {exc}") from exc


def _header_line(traj: Trajectory) -> str:
    return json.dumps(
        {
            "episode_id": traj.episode_id,
            "iteration": traj.iteration_k,
            "seed": traj.seed,
            "method": traj.method,
            "sigma": list(traj.sigma),
            "success": traj.success,
            "terminal": _terminal_to_obj(traj.terminal),
        },
        separators=(",", ":"),
        allow_nan=False,
    )


def _step_line(step: Step) -> str:
    return json.dumps(
        {
            "t": step.t,
            "state_full": list(step.state_full),
            "action_intended": list(step.action_intended.as_tuple()),
            "action_executed": list(step.action_executed.as_tuple()),
            "mode": step.mode,
        },
        separators=(",", ":"),
        allow_nan=False,
    )


def trajectory_lines(traj: Trajectory):
    yield _header_line(traj)
    for step in traj.steps:
        yield _step_line(step)


def write_trajectories(trajectories, sink) -> int:
    """Write trajectories to a path or text file object; returns bytes written."""
    if isinstance(sink, (str, Path)):
        path = Path(sink)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            return write_trajectories(trajectories, fh)
    n = 0
    for traj in trajectories:
        for line in trajectory_lines(traj):
            data = line + "\n"
            sink.write(data)
            n += len(data.encode("utf-8"))
    return n


def _require(obj, key, line_no):
    if key not in obj:
        raise TrajectoryParseError(line_no, key, "missing field")
    return obj[key]


def _finite_floats(values, key, line_no, expect_len=None):
    if not isinstance(values, list):
        raise TrajectoryParseError(line_no, key, f"expected a list, got {type(values).__name__}")
    if expect_len is not None and len(values) != expect_len:
        raise TrajectoryParseError(line_no, key, f"expected {expect_len} entries, got {len(values)}")
    out = []
    for i, v in enumerate(values):
        if not isinstance(v, (int, float)) or isinstance(v, bool) or not math.isfinite(v):
            raise TrajectoryParseError(line_no, f"{key}[{i}]", f"not a finite number: {v!r}")
        out.append(float(v))
    return out


def _parse_int(obj, key, line_no):
    v = _require(obj, key, line_no)
    if not isinstance(v, int) or isinstance(v, bool):
        raise TrajectoryParseError(line_no, key, f"expected an integer, got {v!r}")
    return v


def _parse_step(obj, line_no, episode_id, iteration_k) -> Step:
    t = _parse_int(obj, "t", line_no)
    state_full = _finite_floats(_require(obj, "state_full", line_no), "state_full", line_no)
    intended = _finite_floats(_require(obj, "action_intended", line_no), "action_intended", line_no, ACTION_DIM)
    executed = _finite_floats(_require(obj, "action_executed", line_no), "action_executed", line_no, ACTION_DIM)
    mode = _parse_int(obj, "mode", line_no)
    if not 0 <= mode < MODE_COUNT:
        raise TrajectoryParseError(line_no, "mode", f"invalid mode index {mode}")
    return Step(
        t=t,
        state_full=tuple(state_full),
        action_intended=ActionDelta(*intended),
        action_executed=ActionDelta(*executed),
        mode=mode,
        episode_id=episode_id,
        iteration_k=iteration_k,
    )


def read_trajectories(source) -> list[Trajectory]:
    """Parse a trajectory file: a Path, a path string, a text file object, or
    raw record content (strings holding newlines or JSON are taken as content)."""
    is_path_str = (
        isinstance(source, str)
        and source != ""
        and "\n" not in source
        and not source.lstrip().startswith("{")
    )
    if isinstance(source, Path) or is_path_str:
        with open(source, encoding="utf-8") as fh:
            return read_trajectories(fh)
    if isinstance(source, str):
        lines = source.splitlines()
    else:
        lines = [line.rstrip("\n") for line in source]

    trajectories: list[Trajectory] = []
    header = None
    steps: list[Step] = []

    def flush():
        nonlocal header, steps
        if header is not None:
            obj, line_no = header
            trajectories.append(
                Trajectory(
                    episode_id=_parse_int(obj, "episode_id", line_no),
                    iteration_k=_parse_int(obj, "iteration", line_no),
                    seed=_parse_int(obj, "seed", line_no),
                    method=str(_require(obj, "method", line_no)),
                    sigma=tuple(_finite_floats(_require(obj, "sigma", line_no), "sigma", line_no, ACTION_DIM)),
                    steps=tuple(steps),
                    success=bool(_require(obj, "success", line_no)),
                    terminal=_terminal_from_obj(obj.get("terminal"), line_no),
                )
            )
        header, steps = None, []

    for idx, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise TrajectoryParseError(idx, None, f"not valid JSON: {exc.msg}") from exc
        if not isinstance(obj, dict):
            raise TrajectoryParseError(idx, None, "record must be a JSON object")
        if "episode_id" in obj:  # header starts a new trajectory
            flush()
            header = (obj, idx)
        else:
            if header is None:
                raise TrajectoryParseError(idx, None, "step record before any episode header")
            hdr_obj, hdr_line = header
            steps.append(
                _parse_step(
                    obj,
                    idx,
                    _parse_int(hdr_obj, "episode_id", hdr_line),
                    _parse_int(hdr_obj, "iteration", hdr_line),
                )
            )
    flush()
    return trajectories
