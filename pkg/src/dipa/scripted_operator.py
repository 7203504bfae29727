"""Scripted stand-in for the human operator.

A proportional controller supplies the manual actions, a rule table decides
mode switches along the 0->1->2->3->0 cycle, and the two automatic modes use
fixed action constants.  The operator recomputes its command from the current
(possibly disturbed) state every step, so injected noise naturally elicits
recovery behavior.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import ACTION_LIMITS, AUTO_MODES, MANUAL_MODES, ActionDelta, DisturbanceLevel
from .env import EnvConfig, EnvState
from .rng import RngStream

# Fixed automatic policies: mode 0 returns left while opening the gripper,
# mode 2 carries up-right while closing.  State-independent by design.
AUTO_ACTIONS = {
    0: ActionDelta(-5.0, 0.0, 0.0, 1.0),
    2: ActionDelta(5.0, 0.0, 3.0, -1.0),
}

# Gripper x at which the return mode (0) has reached the white area.
WHITE_ENTRY_X = -15.0

# A dropped object further right than this keeps the operator in the placing
# mode for a re-grasp; otherwise the cycle restarts and mode 1 recovers it.
DROP_RECOVERY_X = -10.0


class OperatorFault(RuntimeError):
    """The operator cannot produce a sensible action (e.g. nothing left to grasp)."""


@dataclass(frozen=True)
class OperatorConfig:
    kp: float = 0.5
    clamp: tuple[float, float, float, float] = ACTION_LIMITS
    label_source: str = "intended"
    # Horizontal / vertical closeness at which the reach phase starts closing.
    approach_tol: float = 1.0
    approach_tol_z: float = 1.0
    # Horizontal closeness to the slot at which the place phase starts opening.
    place_tol: float = 2.0

    def __post_init__(self):
        if self.kp <= 0:
            raise ValueError("kp must be > 0")
        if self.label_source not in ("intended", "executed"):
            raise ValueError(f"unknown label_source {self.label_source!r}")


def auto_action(mode: int) -> ActionDelta:
    if mode not in AUTO_MODES:
        raise ValueError(f"mode {mode} is not an automatic mode")
    return AUTO_ACTIONS[mode]


def inject_disturbance(intended: ActionDelta, sigma: DisturbanceLevel, rng: RngStream) -> ActionDelta:
    """Add zero-mean Gaussian noise with per-dimension variance ``sigma``.

    The returned action is the raw disturbed command; the environment clamps
    whatever it receives, so executed - intended always equals the drawn
    noise.  A zero level returns the command unchanged without consuming any
    draws, which keeps zero-disturbance collections bit-identical to
    disturbance-free ones.
    """
    var = sigma.as_array() if isinstance(sigma, DisturbanceLevel) else np.asarray(sigma, dtype=float)
    if np.any(var < 0):
        raise ValueError("disturbance variance must be >= 0")
    if not np.any(var > 0):
        return intended
    gen = rng.generator if isinstance(rng, RngStream) else rng
    eps = gen.normal(0.0, np.sqrt(var))
    return ActionDelta.from_array(intended.as_array() + eps)


class ScriptedOperator:
    """PID manual policy + rule-based mode switching for one environment setup."""

    def __init__(self, config: OperatorConfig, env_config: EnvConfig):
        self.config = config
        self.env_config = env_config

    # -- proportional control -------------------------------------------------

    def _drive(self, state: EnvState, target) -> ActionDelta:
        """Proportional command toward a full (x, y, z, theta) target."""
        err = np.asarray(target, dtype=float) - np.array(state.gripper)
        cmd = np.clip(self.config.kp * err, [-c for c in self.config.clamp], self.config.clamp)
        return ActionDelta.from_array(cmd)

    def _nearest_unplaced(self, state: EnvState) -> int | None:
        gx, gy = state.gripper[0], state.gripper[1]
        best, best_d = None, None
        for i, o in enumerate(state.objects):
            if o.placed or o.attached:
                continue
            d = math.hypot(o.x - gx, o.y - gy)
            if best is None or d < best_d:
                best, best_d = i, d
        return best

    def _reach_action(self, state: EnvState, strict: bool) -> ActionDelta:
        """Move over the nearest free object, then close onto it.

        The close command latches: once the jaw is below half open it keeps
        closing unless the gripper has clearly drifted away, so disturbances
        near the grasp point do not flip the commanded direction every step.
        """
        idx = self._nearest_unplaced(state)
        if idx is None:
            if strict:
                raise OperatorFault("no unplaced object remaining")
            return ActionDelta.zero()
        obj = state.objects[idx]
        gx, gy, gz, gtheta = state.gripper
        horiz = math.hypot(obj.x - gx, obj.y - gy)
        over = horiz <= self.config.approach_tol and abs(obj.z - gz) <= self.config.approach_tol_z
        closing = gtheta <= 0.5 and horiz <= 3.0 * self.config.approach_tol
        theta_target = 0.0 if (over or closing) else 1.0
        return self._drive(state, (obj.x, obj.y, obj.z, theta_target))

    def _place_action(self, state: EnvState) -> ActionDelta:
        """Carry the attached object over its own blue slot, then open.

        The carry holds the current altitude (a released object lands at the
        slot either way, and descending first would stretch the manual phase
        by however high the automatic carry happened to climb).  Opening
        latches like closing does: once the release has begun it completes
        unless the gripper has clearly left the slot.
        """
        att = state.attached_index
        if att is None:
            # The object was dropped before being placed: grab it again.
            return self._reach_action(state, strict=False)
        cfg = self.env_config
        slot = (cfg.blue_x, cfg.slot_y(att))
        gx, gy, gz, gtheta = state.gripper
        dist = math.hypot(slot[0] - gx, slot[1] - gy)
        over = dist <= self.config.place_tol
        opening = gtheta >= 0.3 and dist <= 2.0 * self.config.place_tol
        theta_target = 1.0 if (over or opening) else 0.0
        return self._drive(state, (slot[0], slot[1], gz, theta_target))

    # -- public policy surface -------------------------------------------------

    def auto_action(self, mode: int) -> ActionDelta:
        return auto_action(mode)

    def manual_action(self, state: EnvState, mode: int) -> ActionDelta:
        """Intended (pre-noise) command for a manual mode; deterministic in state."""
        if mode not in MANUAL_MODES:
            raise ValueError(f"mode {mode} is not a manual mode")
        if mode == 1:
            if state.attached_index is not None:
                # just grasped; hold closed in place until the switch fires
                return self._drive(state, (*state.gripper[:3], 0.0))
            return self._reach_action(state, strict=True)
        return self._place_action(state)

    def switch_mode(self, state: EnvState) -> int:
        """Advance along the cycle when the current mode's phase is complete."""
        mode = state.current_mode
        gx = state.gripper[0]
        if mode == 0:
            return 1 if gx <= WHITE_ENTRY_X else 0
        if mode == 1:
            return 2 if state.attached_index is not None else 1
        if mode == 2:
            return 3 if gx >= self.env_config.auto2_threshold else 2
        if mode == 3:
            if state.attached_index is not None:
                return 3
            stray = [o for o in state.objects if not o.placed and o.x > DROP_RECOVERY_X]
            return 3 if stray else 0
        raise ValueError(f"invalid mode {mode}")

    def full_manual_action(self, state: EnvState) -> ActionDelta:
        """Whole-task controller for demonstrations without partial automation.

        The phase is derived from the state with the same predicates the
        switch rules use, but no mode labels are produced.
        """
        if all(o.placed for o in state.objects):
            return ActionDelta.zero()
        if state.attached_index is not None:
            if state.gripper[0] >= self.env_config.auto2_threshold:
                return self._place_action(state)
            return AUTO_ACTIONS[2]
        # Not carrying: a dropped object on the right is re-grasped directly;
        # otherwise return to the white area before reaching.
        if any(not o.placed and o.x > DROP_RECOVERY_X for o in state.objects):
            return self._reach_action(state, strict=True)
        if state.gripper[0] > WHITE_ENTRY_X:
            return AUTO_ACTIONS[0]
        return self._reach_action(state, strict=True)
