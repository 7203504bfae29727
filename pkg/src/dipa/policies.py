"""Learned policy layer: feature extraction, the mode-gated action policy,
the masked mode-switching classifier, dataset assembly, and closed-loop
rollouts."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core import (
    ACTION_DIM,
    FULL_MANUAL_MODE,
    MANUAL_MODES,
    MODE_COUNT,
    ActionDelta,
    Step,
    Trajectory,
    next_mode,
)
from .env import Env, EnvState
from .nn import MlpParams, Normalizer, forward, load_mlp, save_mlp
from .rng import RngStream
from .scripted_operator import AUTO_ACTIONS

# Index of the gripper joint angle within the full observation vector; the
# action networks under partial automation never see it (grasping is the
# automatic policies' job).
THETA_INDEX = 3


class DataError(ValueError):
    pass


@dataclass(frozen=True)
class FeatureSpec:
    """Observation layout: "full" keeps the joint angle, "pa_action" drops it."""

    variant: str
    n_objects: int

    def __post_init__(self):
        if self.variant not in ("full", "pa_action"):
            raise ValueError(f"unknown feature variant {self.variant!r}")

    @property
    def dim(self) -> int:
        base = 5 + 3 * self.n_objects  # gripper pose (4) + objects + moved count
        return base if self.variant == "full" else base - 1

    def extract(self, state: EnvState) -> np.ndarray:
        return self.from_full(state_features(state))

    def from_full(self, full_vec) -> np.ndarray:
        """Slice a stored full observation vector down to this layout."""
        full = np.asarray(full_vec, dtype=float)
        return full if self.variant == "full" else np.delete(full, THETA_INDEX, axis=-1)


# Key used for the single action network of non-separated variants.
SHARED_NET = "shared"


@dataclass
class PolicyBundle:
    """Everything needed to run a learned policy.

    PA bundles hold a mode-switching network plus one action network (or one
    per manual mode); no-PA bundles hold a single action network evaluated on
    the full observation.  Auto-mode actions come from the stored constant
    table, never from a network.
    """

    variant_name: str
    uses_pa: bool
    separated: bool
    n_objects: int
    action_nets: dict[str, MlpParams]
    action_norms: dict[str, Normalizer]
    switch_net: MlpParams | None = None
    switch_norm: Normalizer | None = None
    manual_modes: tuple[int, ...] = tuple(sorted(MANUAL_MODES))
    auto_table: dict[int, tuple[float, float, float, float]] = field(
        default_factory=lambda: {m: a.as_tuple() for m, a in AUTO_ACTIONS.items()}
    )

    @property
    def switch_spec(self) -> FeatureSpec:
        return FeatureSpec("full", self.n_objects)

    @property
    def action_spec(self) -> FeatureSpec:
        return FeatureSpec("pa_action" if self.uses_pa else "full", self.n_objects)

    def action_net_key(self, mode: int | None) -> str:
        if not self.separated:
            return SHARED_NET
        return f"mode{mode}"


def _switch_scores(bundle: PolicyBundle, full_vec) -> np.ndarray:
    x = bundle.switch_norm.transform(bundle.switch_spec.from_full(full_vec))
    return forward(bundle.switch_net, x)


def predict_mode_features(bundle: PolicyBundle, full_vec, current_mode: int) -> int:
    """Masked mode prediction from a stored observation vector.

    Scores outside {current, next-in-cycle} are masked out and exact ties
    keep the current mode, so a rollout can never skip around the cycle.
    """
    if bundle.switch_net is None:
        raise ValueError(f"bundle {bundle.variant_name!r} has no mode-switching network")
    scores = _switch_scores(bundle, full_vec)
    nxt = next_mode(current_mode)
    return nxt if scores[nxt] > scores[current_mode] else current_mode


def predict_mode(bundle: PolicyBundle, state: EnvState, current_mode: int) -> int:
    return predict_mode_features(bundle, state_features(state), current_mode)


def predict_action_features(bundle: PolicyBundle, full_vec, mode: int | None) -> ActionDelta:
    """Composite action policy on a stored observation vector.

    Auto modes return the stored constants exactly; manual modes clamp the
    action network's output to the per-step limits.
    """
    if bundle.uses_pa and mode in bundle.auto_table:
        return ActionDelta(*bundle.auto_table[mode])
    key = bundle.action_net_key(mode)
    if key not in bundle.action_nets:
        raise ValueError(f"bundle {bundle.variant_name!r} has no action network {key!r}")
    x = bundle.action_norms[key].transform(bundle.action_spec.from_full(full_vec))
    out = forward(bundle.action_nets[key], x)
    return ActionDelta.from_array(out).clamped()


def predict_action(bundle: PolicyBundle, state: EnvState, mode: int | None) -> ActionDelta:
    return predict_action_features(bundle, state_features(state), mode)


def state_features(state: EnvState) -> np.ndarray:
    """Full observation vector as recorded in step records."""
    vec = list(state.gripper)
    for o in state.objects:
        vec.extend((o.x, o.y, o.z))
    vec.append(float(state.moved_count))
    return np.array(vec, dtype=float)


@dataclass
class Datasets:
    """Training matrices built from demonstrations.

    ``switch`` is (inputs, one-hot mode targets) over every step, or None for
    variants without partial automation.  ``action`` maps network key to
    (inputs, action targets); non-separated variants use one "shared" entry.
    """

    switch: tuple[np.ndarray, np.ndarray] | None
    action: dict[str, tuple[np.ndarray, np.ndarray]]


def build_datasets(
    trajectories,
    *,
    uses_pa: bool,
    separated: bool = False,
    label_source: str = "intended",
    manual_modes=tuple(sorted(MANUAL_MODES)),
) -> Datasets:
    """Assemble supervised datasets from demonstrated steps.

    PA variants: the switch dataset takes every step with its demonstrated
    mode one-hot encoded; the action dataset keeps demonstrated-manual steps
    only, with the operator's label action as target.  Variants without PA
    put every step into a single action dataset and build no switch data.
    """
    steps = [s for traj in trajectories for s in traj.steps]
    if not steps:
        raise DataError("no steps in trajectories")

    full = np.array([s.state_full for s in steps], dtype=float)

    if not uses_pa:
        labels = np.array([s.label(label_source).as_tuple() for s in steps], dtype=float)
        return Datasets(switch=None, action={SHARED_NET: (full, labels)})

    one_hot = np.zeros((len(steps), MODE_COUNT))
    for i, s in enumerate(steps):
        one_hot[i, s.mode] = 1.0
    switch = (full, one_hot)

    manual_idx = [i for i, s in enumerate(steps) if s.mode in manual_modes]
    if not manual_idx:
        raise DataError("no demonstrated-manual steps; cannot fit an action policy")
    pa = FeatureSpec("pa_action", _infer_n_objects(full.shape[1]))

    action: dict[str, tuple[np.ndarray, np.ndarray]] = {}
    if separated:
        for mode in manual_modes:
            idx = [i for i in manual_idx if steps[i].mode == mode]
            if not idx:
                raise DataError(f"no demonstrated steps for manual mode {mode}")
            action[f"mode{mode}"] = (
                pa.from_full(full[idx]),
                np.array([steps[i].label(label_source).as_tuple() for i in idx], dtype=float),
            )
    else:
        action[SHARED_NET] = (
            pa.from_full(full[manual_idx]),
            np.array([steps[i].label(label_source).as_tuple() for i in manual_idx], dtype=float),
        )
    return Datasets(switch=switch, action=action)


def _infer_n_objects(full_dim: int) -> int:
    n, rem = divmod(full_dim - 5, 3)
    if rem or n < 1:
        raise DataError(f"observation width {full_dim} is not a valid full layout")
    return n


def rollout(
    bundle: PolicyBundle,
    env: Env,
    rng: RngStream,
    t_max: int | None = None,
    episode_id: int = 0,
    iteration_k: int = 0,
) -> Trajectory:
    """Closed-loop episode under the learned bundle, without disturbance.

    PA bundles predict the mode each step (masked to the legal transitions);
    no-PA bundles run their single network and tag steps with the constant
    full-manual mode.
    """
    limit = env.config.resolved_t_max if t_max is None else t_max
    state = env.reset(rng)
    steps: list[Step] = []
    mode = 0 if bundle.uses_pa else FULL_MANUAL_MODE
    state = state.with_mode(mode)
    while len(steps) < limit and not env.is_done(state):
        if bundle.uses_pa:
            mode = predict_mode(bundle, state, mode)
            state = state.with_mode(mode)
        action = predict_action(bundle, state, mode)
        steps.append(
            Step(
                t=state.t,
                state_full=tuple(state_features(state)),
                action_intended=action,
                action_executed=action,
                mode=mode,
                episode_id=episode_id,
                iteration_k=iteration_k,
                env_state=state,
            )
        )
        state = env.step(state, action)
    return Trajectory(
        episode_id=episode_id,
        iteration_k=iteration_k,
        seed=rng.root_seed,
        method="rollout",
        sigma=(0.0, 0.0, 0.0, 0.0),
        steps=tuple(steps),
        success=env.is_success(state),
        terminal=state,
    )


# -- bundle checkpointing ------------------------------------------------------


def save_bundle(dir_path, bundle: PolicyBundle) -> None:
    """One file per network plus a manifest describing the bundle."""
    d = Path(dir_path)
    d.mkdir(parents=True, exist_ok=True)
    manifest = {
        "variant_name": bundle.variant_name,
        "uses_pa": bundle.uses_pa,
        "separated": bundle.separated,
        "n_objects": bundle.n_objects,
        "manual_modes": list(bundle.manual_modes),
        "auto_table": {str(k): list(v) for k, v in bundle.auto_table.items()},
        "action_nets": sorted(bundle.action_nets),
        "has_switch": bundle.switch_net is not None,
    }
    (d / "manifest.json").write_text(json.dumps(manifest, indent=2), encoding="utf-8")
    for key, net in bundle.action_nets.items():
        save_mlp(d / f"action_{key}.json", net, bundle.action_norms[key])
    if bundle.switch_net is not None:
        save_mlp(d / "switch.json", bundle.switch_net, bundle.switch_norm)


def load_bundle(dir_path) -> PolicyBundle:
    d = Path(dir_path)
    manifest = json.loads((d / "manifest.json").read_text(encoding="utf-8"))
    action_nets, action_norms = {}, {}
    for key in manifest["action_nets"]:
        net, norm, _ = load_mlp(d / f"action_{key}.json")
        action_nets[key] = net
        action_norms[key] = norm
    switch_net = switch_norm = None
    if manifest["has_switch"]:
        switch_net, switch_norm, _ = load_mlp(d / "switch.json")
    return PolicyBundle(
        variant_name=manifest["variant_name"],
        uses_pa=manifest["uses_pa"],
        separated=manifest["separated"],
        n_objects=manifest["n_objects"],
        action_nets=action_nets,
        action_norms=action_norms,
        switch_net=switch_net,
        switch_norm=switch_norm,
        manual_modes=tuple(manifest["manual_modes"]),
        auto_table={int(k): tuple(v) for k, v in manifest["auto_table"].items()},
    )
