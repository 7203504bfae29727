"""Iterative robust imitation learning.

One experiment runs K iterations of: collect E demonstrations under the
current disturbance level, refit the policies on all data so far, then
re-estimate the disturbance level from the new bundle's residuals.  The
method variants differ in whether they use partial automation, whether they
inject disturbance, and which mode labels anchor the disturbance update.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, replace
from pathlib import Path
from typing import TYPE_CHECKING

import numpy as np

from .core import (
    FULL_MANUAL_MODE,
    DisturbanceLevel,
    Step,
    Trajectory,
    is_manual,
    next_mode,
)
from .env import Env, EnvConfig, state_from_features
from .nn import MlpParams, Normalizer, TrainReport, TrainSpec, fit
from .policies import (
    PolicyBundle,
    build_datasets,
    predict_action_features,
    predict_mode_features,
    rollout,
    save_bundle,
    state_features,
)
from .rng import RngStream, derive_stream
from .scripted_operator import OperatorFault, ScriptedOperator, inject_disturbance
from .trajio import write_trajectories

if TYPE_CHECKING:
    from .config import ExperimentConfig

log = logging.getLogger(__name__)

HIDDEN_LAYERS = (64, 64)
MAX_EPISODE_RETRIES = 10


@dataclass(frozen=True)
class MethodVariant:
    """One column of the method matrix.

    ``delta_mode_source`` says which mode labels extract the manual steps in
    the disturbance update: "predicted" uses the learned switcher's output,
    "demonstrated" uses the operator's labels, "none" for variants where the
    update does not apply.
    """

    name: str
    uses_pa: bool
    uses_disturbance: bool
    delta_mode_source: str
    separated_action_nets: bool = False


VARIANTS = {
    "dipa": MethodVariant("dipa", True, True, "predicted"),
    "dipa_minus": MethodVariant("dipa_minus", True, True, "demonstrated"),
    "s_dipa_minus": MethodVariant("s_dipa_minus", True, True, "demonstrated", separated_action_nets=True),
    "bcpa": MethodVariant("bcpa", True, False, "none"),
    "dart": MethodVariant("dart", False, True, "none"),
    "bc": MethodVariant("bc", False, False, "none"),
}

_ALIASES = {
    "dipa(-)": "dipa_minus",
    "dipa-": "dipa_minus",
    "s-dipa(-)": "s_dipa_minus",
    "s_dipa(-)": "s_dipa_minus",
    "sdipa(-)": "s_dipa_minus",
    "s-dipa-": "s_dipa_minus",
}


def normalize_method(name: str) -> str:
    key = name.strip().lower().replace(" ", "")
    key = _ALIASES.get(key, key).replace("-", "_")
    key = _ALIASES.get(key, key)
    if key not in VARIANTS:
        raise ValueError(f"unknown method {name!r}; expected one of {sorted(VARIANTS)}")
    return key


def get_variant(name: str) -> MethodVariant:
    return VARIANTS[normalize_method(name)]


# -- demonstration collection ----------------------------------------------------


def _collect_episode(
    variant: MethodVariant,
    env: Env,
    operator: ScriptedOperator,
    sigma: DisturbanceLevel,
    init_rng: RngStream,
    noise_rng: RngStream,
    episode_id: int,
    iteration_k: int,
) -> Trajectory:
    state = env.reset(init_rng)
    inject = variant.uses_disturbance and not sigma.is_zero
    steps: list[Step] = []
    while not env.is_done(state):
        if variant.uses_pa:
            mode = operator.switch_mode(state)
            state = state.with_mode(mode)
            if is_manual(mode):
                intended = operator.manual_action(state, mode)
                executed = inject_disturbance(intended, sigma, noise_rng) if inject else intended
            else:
                intended = executed = operator.auto_action(mode)
        else:
            mode = FULL_MANUAL_MODE
            state = state.with_mode(mode)
            intended = operator.full_manual_action(state)
            executed = inject_disturbance(intended, sigma, noise_rng) if inject else intended
        steps.append(
            Step(
                t=state.t,
                state_full=tuple(state_features(state)),
                action_intended=intended,
                action_executed=executed,
                mode=mode,
                episode_id=episode_id,
                iteration_k=iteration_k,
                env_state=state,
            )
        )
        state = env.step(state, executed)
    return Trajectory(
        episode_id=episode_id,
        iteration_k=iteration_k,
        seed=init_rng.root_seed,
        method="pa" if variant.uses_pa else "manual",
        sigma=sigma.sigma,
        steps=tuple(steps),
        success=env.is_success(state),
        terminal=state,
    )


def collect_iteration(
    variant: MethodVariant,
    env: Env,
    operator: ScriptedOperator,
    sigma_k: DisturbanceLevel,
    episodes: int,
    rng: RngStream,
    iteration_k: int,
) -> list[Trajectory]:
    """Collect one iteration's demonstrations.

    Variants without disturbance injection always collect at zero level.
    A faulted episode is discarded and resampled from a fresh stream.
    """
    if episodes < 1:
        raise ValueError("episodes must be >= 1")
    sigma = sigma_k if variant.uses_disturbance else DisturbanceLevel.zero(sigma_k.iteration_k)
    out = []
    for e in range(episodes):
        for attempt in range(MAX_EPISODE_RETRIES):
            labels = (e,) if attempt == 0 else (e, "retry", attempt)
            try:
                out.append(
                    _collect_episode(
                        variant,
                        env,
                        operator,
                        sigma,
                        rng.substream(*labels, "init"),
                        rng.substream(*labels, "noise"),
                        episode_id=e,
                        iteration_k=iteration_k,
                    )
                )
                break
            except OperatorFault as fault:
                log.warning("episode %d attempt %d faulted (%s); resampling", e, attempt, fault)
        else:
            raise OperatorFault(f"episode {e} faulted {MAX_EPISODE_RETRIES} times in a row")
    return out


# -- policy fitting ----------------------------------------------------------------


def _fit_net(data, spec: TrainSpec, ctx: tuple, out_dim: int) -> tuple[MlpParams, Normalizer, TrainReport]:
    inputs, targets = data
    norm = Normalizer.fit(inputs)
    init_gen = derive_stream(spec.seed, (*ctx, "init")).generator
    params = MlpParams.init((inputs.shape[1], *HIDDEN_LAYERS, out_dim), init_gen)
    fit_seed = int(derive_stream(spec.seed, (*ctx, "split")).generator.integers(2**31))
    trained, report = fit(params, norm.transform(inputs), targets, replace(spec, seed=fit_seed))
    return trained, norm, report


def fit_iteration(
    variant: MethodVariant,
    trajectories,
    train_spec: TrainSpec,
    *,
    seed_ctx: int | str = 0,
    label_source: str = "intended",
) -> tuple[PolicyBundle, dict[str, TrainReport]]:
    """Fit the bundle on the union of all collected iterations (Algorithm 1's
    aggregate update)."""
    data = build_datasets(
        trajectories,
        uses_pa=variant.uses_pa,
        separated=variant.separated_action_nets,
        label_source=label_source,
    )
    n_objects = _n_objects_from(trajectories)
    reports: dict[str, TrainReport] = {}
    action_nets, action_norms = {}, {}
    for key, pair in data.action.items():
        net, norm, rep = _fit_net(pair, train_spec, (seed_ctx, "action", key), pair[1].shape[1])
        action_nets[key], action_norms[key] = net, norm
        reports[f"action_{key}"] = rep
    switch_net = switch_norm = None
    if data.switch is not None:
        switch_net, switch_norm, rep = _fit_net(
            data.switch, train_spec, (seed_ctx, "switch"), data.switch[1].shape[1]
        )
        reports["switch"] = rep
    bundle = PolicyBundle(
        variant_name=variant.name,
        uses_pa=variant.uses_pa,
        separated=variant.separated_action_nets,
        n_objects=n_objects,
        action_nets=action_nets,
        action_norms=action_norms,
        switch_net=switch_net,
        switch_norm=switch_norm,
    )
    return bundle, reports


def _n_objects_from(trajectories) -> int:
    for traj in trajectories:
        for step in traj.steps:
            n, rem = divmod(len(step.state_full) - 5, 3)
            if rem or n < 1:
                raise ValueError(f"bad observation width {len(step.state_full)}")
            return n
    raise ValueError("no steps in trajectories")


# -- disturbance-level update --------------------------------------------------------


def _selected_residuals(
    variant: MethodVariant,
    trajectories,
    bundle: PolicyBundle,
    operator: ScriptedOperator | None = None,
    *,
    literal_eq13: bool = False,
    label_source: str = "intended",
    env_config: EnvConfig | None = None,
) -> np.ndarray:
    """Residual rows (predicted - label) over the steps the variant selects."""
    rows = []
    for traj in trajectories:
        prev_mode = 0
        for step in traj.steps:
            if not variant.uses_pa:
                pred = predict_action_features(bundle, step.state_full, None)
                rows.append(pred.as_array() - step.label(label_source).as_array())
            elif variant.delta_mode_source == "demonstrated":
                if step.mode in bundle.manual_modes:
                    pred = predict_action_features(bundle, step.state_full, step.mode)
                    rows.append(pred.as_array() - step.label(label_source).as_array())
            elif literal_eq13:
                # Literal reading: select by the predicted mode and compare the
                # learned action against the operator queried at this state.
                o_r = predict_mode_features(bundle, step.state_full, prev_mode)
                if o_r in bundle.manual_modes:
                    if operator is None:
                        raise ValueError("the literal update needs a queryable operator")
                    env_state = step.env_state
                    if env_state is None:
                        if env_config is None:
                            raise ValueError("need env_config to rebuild states from file data")
                        env_state = state_from_features(step.state_full, env_config, step.mode, step.t)
                    pred = predict_action_features(bundle, step.state_full, o_r)
                    label = operator.manual_action(env_state, o_r)
                    rows.append(pred.as_array() - label.as_array())
            else:
                # Label-anchored reading: walk the demonstrated-manual steps but
                # act under the predicted mode, so a switcher that wrongly
                # predicts an automatic mode contributes the full auto-vs-manual
                # action gap to the estimate.
                if step.mode in bundle.manual_modes:
                    o_r = predict_mode_features(bundle, step.state_full, prev_mode)
                    pred = predict_action_features(bundle, step.state_full, o_r)
                    rows.append(pred.as_array() - step.label(label_source).as_array())
            prev_mode = step.mode
    return np.array(rows, dtype=float) if rows else np.empty((0, 4))


def update_sigma(
    variant: MethodVariant,
    trajectories,
    bundle: PolicyBundle,
    operator: ScriptedOperator | None = None,
    *,
    literal_eq13: bool = False,
    label_source: str = "intended",
    env_config: EnvConfig | None = None,
) -> DisturbanceLevel:
    """Maximum-likelihood disturbance level: the per-dimension mean of squared
    residuals between the refit policy's actions and the operator labels over
    the selected manual steps."""
    trajectories = list(trajectories)
    if not trajectories:
        raise ValueError("need at least one trajectory")
    next_k = trajectories[0].iteration_k + 1
    if not variant.uses_disturbance:
        return DisturbanceLevel.zero(next_k)
    res = _selected_residuals(
        variant,
        trajectories,
        bundle,
        operator,
        literal_eq13=literal_eq13,
        label_source=label_source,
        env_config=env_config,
    )
    if res.shape[0] == 0:
        log.warning("disturbance update selected no steps; keeping previous level")
        return DisturbanceLevel(trajectories[0].sigma, next_k)
    sig = np.mean(res**2, axis=0)
    return DisturbanceLevel(tuple(float(v) for v in sig), next_k)


def manual_nll(
    trajectories,
    bundle: PolicyBundle,
    sigma,
    variant: MethodVariant = VARIANTS["dipa"],
    operator: ScriptedOperator | None = None,
    *,
    literal_eq13: bool = False,
    label_source: str = "intended",
    env_config: EnvConfig | None = None,
) -> float:
    """Mean negative Gaussian log-density of the operator labels under the
    policy's predictions with diagonal variance ``sigma``.

    Stationary in sigma exactly at the value ``update_sigma`` returns, which
    is the MLE property the diagnostics check.
    """
    var = sigma.as_array() if isinstance(sigma, DisturbanceLevel) else np.asarray(sigma, dtype=float)
    if np.any(var <= 0):
        raise ValueError("manual_nll needs strictly positive variance in every dimension")
    res = _selected_residuals(
        variant,
        trajectories,
        bundle,
        operator,
        literal_eq13=literal_eq13,
        label_source=label_source,
        env_config=env_config,
    )
    if res.shape[0] == 0:
        raise ValueError("no selected manual steps")
    per_step = 0.5 * np.log(2.0 * np.pi * var) + res**2 / (2.0 * var)
    return float(np.mean(per_step.sum(axis=1)))


# -- evaluation ------------------------------------------------------------------


@dataclass(frozen=True)
class EvalMetrics:
    success_rate: float
    mean_objects_moved: float
    mean_episode_length: float
    illegal_transition_count: int
    episodes: int
    sigma: tuple[float, float, float, float] | None = None

    def to_dict(self):
        return {
            "success_rate": self.success_rate,
            "mean_objects_moved": self.mean_objects_moved,
            "mean_episode_length": self.mean_episode_length,
            "illegal_transition_count": self.illegal_transition_count,
            "episodes": self.episodes,
            "sigma": list(self.sigma) if self.sigma is not None else None,
        }

    @classmethod
    def from_dict(cls, obj):
        sigma = obj.get("sigma")
        return cls(
            success_rate=obj["success_rate"],
            mean_objects_moved=obj["mean_objects_moved"],
            mean_episode_length=obj["mean_episode_length"],
            illegal_transition_count=obj["illegal_transition_count"],
            episodes=obj["episodes"],
            sigma=tuple(sigma) if sigma is not None else None,
        )


def count_illegal_transitions(trajectory: Trajectory) -> int:
    bad = 0
    for a, b in zip(trajectory.steps, trajectory.steps[1:]):
        if b.mode not in (a.mode, next_mode(a.mode)):
            bad += 1
    return bad


def evaluate_bundle(
    bundle: PolicyBundle, env: Env, episodes: int, rng: RngStream, sigma=None
) -> EvalMetrics:
    """Seeded disturbance-free rollouts aggregated into test metrics."""
    wins = 0
    moved, lengths = [], []
    illegal = 0
    for i in range(episodes):
        traj = rollout(bundle, env, rng.substream(i, "init"), episode_id=i)
        wins += traj.success
        moved.append(traj.terminal.moved_count if traj.terminal is not None else 0)
        lengths.append(len(traj))
        illegal += count_illegal_transitions(traj)
    return EvalMetrics(
        success_rate=wins / episodes,
        mean_objects_moved=float(np.mean(moved)),
        mean_episode_length=float(np.mean(lengths)),
        illegal_transition_count=illegal,
        episodes=episodes,
        sigma=tuple(sigma.sigma) if isinstance(sigma, DisturbanceLevel) else sigma,
    )


# -- the full iterative experiment ----------------------------------------------------


@dataclass
class IterationRecord:
    k: int
    sigma_used: DisturbanceLevel
    sigma_next: DisturbanceLevel
    trajectories: tuple[Trajectory, ...]
    bundle: PolicyBundle
    manual_step_nll: float | None
    eval: EvalMetrics
    train_reports: dict[str, TrainReport]


def run_experiment(
    config: "ExperimentConfig",
    method: str | None = None,
    seed: int | None = None,
    out_dir=None,
) -> list[IterationRecord]:
    """Run one (method, seed) cell for K iterations.

    Artifacts are persisted per iteration when ``out_dir`` is given; on any
    stage failure the completed iterations remain on disk and a status file
    marks the run partial.
    """
    variant = get_variant(method if method is not None else config.methods[0])
    root_seed = seed if seed is not None else config.seeds[0]
    env = Env(config.env)
    operator = ScriptedOperator(config.operator, config.env)
    label_source = config.operator.label_source
    train_spec = replace(config.train, seed=root_seed)

    out = Path(out_dir) if out_dir is not None else None
    records: list[IterationRecord] = []
    all_trajectories: list[Trajectory] = []
    sigma = DisturbanceLevel.zero(1)

    try:
        for k in range(1, config.iterations + 1):
            trajs = collect_iteration(
                variant, env, operator, sigma, config.episodes_per_iteration,
                derive_stream(root_seed, ("collect", k)), k,
            )
            all_trajectories.extend(trajs)
            bundle, reports = fit_iteration(
                variant, all_trajectories, train_spec, seed_ctx=k, label_source=label_source
            )
            sigma_next = update_sigma(
                variant, trajs, bundle, operator,
                literal_eq13=config.eq13_literal,
                label_source=label_source,
                env_config=config.env,
            )
            nll = None
            if variant.uses_disturbance and all(v > 0 for v in sigma_next.sigma):
                nll = manual_nll(
                    trajs, bundle, sigma_next, variant, operator,
                    literal_eq13=config.eq13_literal,
                    label_source=label_source,
                    env_config=config.env,
                )
            metrics = evaluate_bundle(
                bundle, env, config.eval_episodes, derive_stream(root_seed, ("eval", k)), sigma=sigma_next
            )
            record = IterationRecord(
                k=k,
                sigma_used=sigma,
                sigma_next=sigma_next,
                trajectories=tuple(trajs),
                bundle=bundle,
                manual_step_nll=nll,
                eval=metrics,
                train_reports=reports,
            )
            records.append(record)
            if out is not None:
                _persist_iteration(out, record)
            if variant.uses_disturbance:
                sigma = sigma_next
            else:
                sigma = DisturbanceLevel((0.0,) * 4, k + 1)
    except Exception as exc:
        if out is not None:
            _write_status(out, "partial", len(records), error=repr(exc))
        raise
    if out is not None:
        _write_status(out, "complete", len(records))
    return records


def _persist_iteration(out: Path, record: IterationRecord) -> None:
    d = out / f"iter{record.k}"
    d.mkdir(parents=True, exist_ok=True)
    write_trajectories(record.trajectories, d / "trajectories.jsonl")
    save_bundle(d / "bundle", record.bundle)
    (d / "sigma.json").write_text(
        json.dumps(
            {
                "iteration": record.k,
                "sigma_used": list(record.sigma_used.sigma),
                "sigma_next": list(record.sigma_next.sigma),
            }
        ),
        encoding="utf-8",
    )
    (d / "metrics.json").write_text(
        json.dumps(
            {
                "iteration": record.k,
                "eval": record.eval.to_dict(),
                "manual_nll": record.manual_step_nll,
                "train": {k: r.to_dict() for k, r in record.train_reports.items()},
                "n_trajectories": len(record.trajectories),
                "n_steps": sum(len(t) for t in record.trajectories),
            }
        ),
        encoding="utf-8",
    )


def _write_status(out: Path, status: str, iterations_completed: int, error: str | None = None) -> None:
    out.mkdir(parents=True, exist_ok=True)
    (out / "status.json").write_text(
        json.dumps({"status": status, "iterations_completed": iterations_completed, "error": error}),
        encoding="utf-8",
    )
