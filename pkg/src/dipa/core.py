"""Core domain types: action increments, steps, trajectories, disturbance levels.

Everything here is an immutable value; episode data is safe to share across
workers once constructed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING

import numpy as np

if TYPE_CHECKING:
    from .env import EnvState

# Per-dimension magnitude limits for a single control step:
# dx, dy, dz in cm; dtheta in rad.
ACTION_LIMITS = (5.0, 5.0, 5.0, 1.0)
ACTION_DIM = 4

MODE_COUNT = 4
MANUAL_MODES = frozenset({1, 3})
AUTO_MODES = frozenset({0, 2})

# Full-manual demonstrations (no partial automation) carry no mode-switching
# information; every step is tagged with this single manual mode index.
FULL_MANUAL_MODE = 1


def next_mode(mode: int) -> int:
    """Successor in the fixed mode cycle 0 -> 1 -> 2 -> 3 -> 0."""
    return (mode + 1) % MODE_COUNT


def is_manual(mode: int) -> bool:
    return mode in MANUAL_MODES


def validate_mode(mode: int) -> int:
    if not isinstance(mode, int) or isinstance(mode, bool) or not 0 <= mode < MODE_COUNT:
        raise ValueError(f"invalid mode index {mode!r}; expected integer in [0, {MODE_COUNT})")
    return mode


@dataclass(frozen=True)
class ActionDelta:
    """One gripper increment: dx/dy/dz in cm, dtheta in rad.

    Instances may hold values beyond the per-step limits (e.g. a raw network
    output or a disturbed command); ``clamped()`` produces the bounded action
    the environment actually applies.
    """

    dx: float
    dy: float
    dz: float
    dtheta: float

    def __post_init__(self):
        for name, v in zip(("dx", "dy", "dz", "dtheta"), self.as_tuple()):
            if not math.isfinite(v):
                raise ValueError(f"non-finite action component {name}={v!r}")

    @classmethod
    def zero(cls) -> "ActionDelta":
        return cls(0.0, 0.0, 0.0, 0.0)

    @classmethod
    def from_array(cls, a) -> "ActionDelta":
        if len(a) != ACTION_DIM:
            raise ValueError(f"action vector must have {ACTION_DIM} entries, got {len(a)}")
        return cls(float(a[0]), float(a[1]), float(a[2]), float(a[3]))

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.dx, self.dy, self.dz, self.dtheta)

    def as_array(self) -> np.ndarray:
        return np.array(self.as_tuple(), dtype=float)

    def clamped(self, limits=ACTION_LIMITS) -> "ActionDelta":
        return ActionDelta(*(min(max(v, -lim), lim) for v, lim in zip(self.as_tuple(), limits)))


@dataclass(frozen=True)
class Step:
    """One timestep of a demonstration or rollout.

    ``state_full`` is the full observation vector (gripper pose incl. joint
    angle, object positions, moved count) recorded before the action was
    applied.  ``action_intended`` is the pre-noise command; ``action_executed``
    is what reached the environment (identical on auto-mode steps).
    """

    t: int
    state_full: tuple[float, ...]
    action_intended: ActionDelta
    action_executed: ActionDelta
    mode: int
    episode_id: int
    iteration_k: int
    # Full simulator state at this step; available for in-process data only
    # (not serialized) and excluded from equality so file round-trips compare.
    env_state: "EnvState | None" = field(default=None, compare=False, repr=False)

    def label(self, source: str = "intended") -> ActionDelta:
        """Operator label used for training targets and residuals."""
        if source == "intended":
            return self.action_intended
        if source == "executed":
            return self.action_executed
        raise ValueError(f"unknown label source {source!r}")


@dataclass(frozen=True)
class Trajectory:
    """An ordered episode of steps plus its collection metadata.

    ``method`` names the demonstration source ("pa" for the partially
    automated operator, "manual" for full-manual operation, "teleop" for a
    human session, "rollout" for learned-policy episodes); ``sigma`` is the
    per-dimension disturbance variance in force while collecting.
    """

    episode_id: int
    iteration_k: int
    seed: int
    method: str
    sigma: tuple[float, float, float, float]
    steps: tuple[Step, ...]
    success: bool
    terminal: "EnvState | None" = None

    def __len__(self) -> int:
        return len(self.steps)

    def manual_steps(self, manual_modes=MANUAL_MODES):
        return [s for s in self.steps if s.mode in manual_modes]


@dataclass(frozen=True)
class DisturbanceLevel:
    """Diagonal Gaussian variance per action dimension (cm^2 / rad^2)."""

    sigma: tuple[float, float, float, float]
    iteration_k: int

    def __post_init__(self):
        if len(self.sigma) != ACTION_DIM:
            raise ValueError(f"sigma must have {ACTION_DIM} entries, got {len(self.sigma)}")
        for i, v in enumerate(self.sigma):
            if not math.isfinite(v) or v < 0:
                raise ValueError(f"sigma[{i}]={v!r} must be finite and >= 0")
        if self.iteration_k == 1 and any(v != 0.0 for v in self.sigma):
            raise ValueError("iteration-1 disturbance level must be exactly zero")

    @classmethod
    def zero(cls, iteration_k: int = 1) -> "DisturbanceLevel":
        return cls((0.0, 0.0, 0.0, 0.0), iteration_k)

    def as_array(self) -> np.ndarray:
        return np.array(self.sigma, dtype=float)

    @property
    def is_zero(self) -> bool:
        return all(v == 0.0 for v in self.sigma)
