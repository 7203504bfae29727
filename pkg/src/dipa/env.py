"""Kinematic multi-object pick-and-place environment.

A gripper moves in a box workspace and must carry every object from nominal
slots in the white area (left) to matching slots in the blue area (right).
Dynamics are purely kinematic: free objects rest at z=0, an attached object
tracks the gripper, and all motion is increment-and-clamp.  ``Env.step`` is a
pure function of (state, action), so episodes are exactly reproducible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .core import ActionDelta
from .rng import RngStream

# Workspace box: x, y, z in cm, theta (gripper joint) in rad.
WORKSPACE_LOW = (-30.0, -20.0, 0.0, 0.0)
WORKSPACE_HIGH = (30.0, 20.0, 20.0, 1.0)

# Named threshold designs for the auto carry policy's hand-off position.
AUTO2_THRESHOLDS = {"L": 15.0, "M": 0.0, "S": -15.0}

T_MAX_PER_OBJECT = 150


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class EnvConfig:
    """Environment parameters.

    The paperless geometry (home pose, slot layout, grasp/place tolerances)
    is fixed here as defaults; they were tuned so the scripted operator
    completes episodes essentially always.
    """

    n_objects: int = 1
    sigma_init_cm: float = 2.0
    auto2_threshold: float = AUTO2_THRESHOLDS["L"]
    t_max: int | None = None  # defaults to 150 * n_objects
    grasp_radius: float = 2.0
    grasp_height: float = 2.0
    place_radius: float = 5.0
    theta_close: float = 0.1
    theta_open: float = 0.9
    home: tuple[float, float, float, float] = (0.0, 0.0, 10.0, 1.0)
    white_x: float = -20.0
    blue_x: float = 20.0
    slot_spacing: float = 8.0

    def __post_init__(self):
        if self.n_objects < 1:
            raise ConfigError("n_objects must be >= 1")
        half_span = (self.n_objects - 1) / 2 * self.slot_spacing
        if half_span + self.sigma_init_cm > WORKSPACE_HIGH[1]:
            raise ConfigError(
                f"{self.n_objects} objects at {self.slot_spacing} cm spacing exceed slot capacity"
            )
        if self.sigma_init_cm < 0:
            raise ConfigError("sigma_init_cm must be >= 0")
        if self.resolved_t_max < 1:
            raise ConfigError("t_max must be >= 1")
        if not WORKSPACE_LOW[0] <= self.auto2_threshold <= WORKSPACE_HIGH[0]:
            raise ConfigError("auto2_threshold outside workspace")

    @property
    def resolved_t_max(self) -> int:
        return self.t_max if self.t_max is not None else T_MAX_PER_OBJECT * self.n_objects

    def slot_y(self, index: int) -> float:
        """Nominal y of object ``index``'s slot (same on white and blue side)."""
        return (index - (self.n_objects - 1) / 2) * self.slot_spacing


@dataclass(frozen=True)
class ObjectState:
    x: float
    y: float
    z: float
    attached: bool = False
    placed: bool = False


@dataclass(frozen=True)
class EnvState:
    """Full simulator state; immutable, one value per timestep."""

    gripper: tuple[float, float, float, float]  # x, y, z, theta
    objects: tuple[ObjectState, ...]
    current_mode: int
    t: int

    @property
    def moved_count(self) -> int:
        return sum(o.placed for o in self.objects)

    @property
    def attached_index(self) -> int | None:
        for i, o in enumerate(self.objects):
            if o.attached:
                return i
        return None

    def with_mode(self, mode: int) -> "EnvState":
        return replace(self, current_mode=mode)


def _clamp_workspace(pose: np.ndarray) -> np.ndarray:
    return np.clip(pose, WORKSPACE_LOW, WORKSPACE_HIGH)


class Env:
    """Pick-and-place environment bound to one configuration."""

    def __init__(self, config: EnvConfig):
        self.config = config

    def reset(self, rng: RngStream | np.random.Generator) -> EnvState:
        """Initial state: gripper at home, objects at perturbed white slots.

        Each object's x and y are offset independently by U(-sigma, sigma).
        Draw order is fixed (per object: x then y) so a given stream always
        produces the same layout.
        """
        gen = rng.generator if isinstance(rng, RngStream) else rng
        cfg = self.config
        objects = []
        for i in range(cfg.n_objects):
            offs = gen.uniform(-cfg.sigma_init_cm, cfg.sigma_init_cm, size=2)
            objects.append(ObjectState(cfg.white_x + float(offs[0]), cfg.slot_y(i) + float(offs[1]), 0.0))
        return EnvState(gripper=cfg.home, objects=tuple(objects), current_mode=0, t=0)

    def step(self, state: EnvState, action: ActionDelta) -> EnvState:
        """Apply one clamped action increment and resolve grasp/release rules."""
        cfg = self.config
        pose = _clamp_workspace(np.array(state.gripper) + action.clamped().as_array())
        gx, gy, gz, gtheta = (float(v) for v in pose)

        objects = list(state.objects)
        att = state.attached_index

        # Attached object tracks the gripper exactly.
        if att is not None:
            objects[att] = replace(objects[att], x=gx, y=gy, z=gz)

        # Release: the carried object drops at the current (x, y); it counts
        # as placed only if it lands within place_radius of its own blue slot.
        if att is not None and gtheta >= cfg.theta_open:
            placed = math.hypot(gx - cfg.blue_x, gy - cfg.slot_y(att)) <= cfg.place_radius
            objects[att] = ObjectState(gx, gy, 0.0, attached=False, placed=placed)
            att = None

        # Grasp: closing near a free, unplaced object attaches the nearest one.
        if att is None and gtheta <= cfg.theta_close:
            best, best_d = None, None
            for i, o in enumerate(objects):
                if o.placed or o.attached:
                    continue
                d = math.hypot(o.x - gx, o.y - gy)
                if d <= cfg.grasp_radius and abs(o.z - gz) <= cfg.grasp_height:
                    if best is None or d < best_d:
                        best, best_d = i, d
            if best is not None:
                objects[best] = ObjectState(gx, gy, gz, attached=True, placed=False)

        return EnvState(
            gripper=(gx, gy, gz, gtheta),
            objects=tuple(objects),
            current_mode=state.current_mode,
            t=state.t + 1,
        )

    def is_success(self, state: EnvState) -> bool:
        return state.moved_count == self.config.n_objects

    def is_done(self, state: EnvState) -> bool:
        return self.is_success(state) or state.t >= self.config.resolved_t_max


def state_from_features(features, config: EnvConfig, mode: int = 0, t: int = 0) -> EnvState:
    """Rebuild an EnvState from a stored observation vector.

    Attachment and placement are not stored explicitly in step records, so
    they are recovered from geometry: an attached object coincides exactly
    with the gripper (it tracks it bit-for-bit), and a resting object within
    place_radius of its own blue slot can only have been placed there.  The
    recovered placed set is reconciled against the recorded moved count.
    """
    vec = [float(v) for v in features]
    expected = 4 + 3 * config.n_objects + 1
    if len(vec) != expected:
        raise ValueError(f"feature vector has {len(vec)} entries, expected {expected}")
    gripper = tuple(vec[0:4])
    moved_count = int(round(vec[-1]))

    raw = []
    for i in range(config.n_objects):
        x, y, z = vec[4 + 3 * i : 7 + 3 * i]
        at_gripper = (x, y, z) == gripper[:3]
        near_slot = z == 0.0 and math.hypot(x - config.blue_x, y - config.slot_y(i)) <= config.place_radius
        raw.append((x, y, z, at_gripper, near_slot))

    placed = [x[4] and not x[3] for x in raw]
    # Ambiguous objects (coincide with gripper while resting on a blue slot)
    # are resolved to match the recorded count; at most one may be attached.
    for i, (x, y, z, at_g, near) in enumerate(raw):
        if sum(placed) >= moved_count:
            break
        if at_g and near and not placed[i]:
            placed[i] = True
    attached_idx = None
    for i, (x, y, z, at_g, near) in enumerate(raw):
        if at_g and not placed[i]:
            attached_idx = i
            break
    objects = tuple(
        ObjectState(x, y, z, attached=(i == attached_idx), placed=placed[i])
        for i, (x, y, z, _, _) in enumerate(raw)
    )
    return EnvState(gripper=gripper, objects=objects, current_mode=mode, t=t)
