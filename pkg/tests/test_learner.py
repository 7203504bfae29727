"""Variant matrix, collection behavior, the disturbance-level update against
independent oracles, and the iterative experiment driver."""

import logging
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import collect_demos, const_action_net, make_nopa_bundle, make_pa_bundle
from dipa.config import ExperimentConfig, with_env
from dipa.core import ActionDelta, DisturbanceLevel, FULL_MANUAL_MODE, Step, Trajectory
from dipa.env import Env, EnvConfig
from dipa.learner import (
    VARIANTS,
    collect_iteration,
    fit_iteration,
    get_variant,
    manual_nll,
    normalize_method,
    run_experiment,
    update_sigma,
)
from dipa.nn import MlpParams, TrainSpec
from dipa.policies import SHARED_NET
from dipa.rng import derive_stream
from dipa.scripted_operator import AUTO_ACTIONS, OperatorConfig, ScriptedOperator
from dipa.trajio import trajectory_lines


# -- variant matrix ------------------------------------------------------------------


def test_variant_flags_match_method_matrix():
    rows = {
        "dipa": (True, True, "predicted", False),
        "dipa_minus": (True, True, "demonstrated", False),
        "s_dipa_minus": (True, True, "demonstrated", True),
        "bcpa": (True, False, "none", False),
        "dart": (False, True, "none", False),
        "bc": (False, False, "none", False),
    }
    for name, (pa, di, delta, sep) in rows.items():
        v = VARIANTS[name]
        assert (v.uses_pa, v.uses_disturbance, v.delta_mode_source, v.separated_action_nets) == (
            pa, di, delta, sep,
        )


def test_method_aliases():
    assert normalize_method("DIPA") == "dipa"
    assert normalize_method("dipa(-)") == "dipa_minus"
    assert normalize_method("S-DIPA(-)") == "s_dipa_minus"
    with pytest.raises(ValueError):
        normalize_method("dagger")


# -- collection ------------------------------------------------------------------------


def test_bcpa_collection_noise_free():
    trajs = collect_demos("bcpa", episodes=3, seed=1)
    for traj in trajs:
        for step in traj.steps:
            assert step.action_executed == step.action_intended


def test_bcpa_ignores_requested_sigma():
    noisy = DisturbanceLevel((0.5,) * 4, 2)
    a = collect_demos("bcpa", episodes=2, seed=2, sigma=noisy, iteration_k=2)
    b = collect_demos("bcpa", episodes=2, seed=2, iteration_k=2)
    assert [list(trajectory_lines(t)) for t in a] == [list(trajectory_lines(t)) for t in b]


def test_dipa_iteration1_matches_bcpa_bitwise():
    a = collect_demos("dipa", episodes=4, seed=9)
    b = collect_demos("bcpa", episodes=4, seed=9)
    assert [list(trajectory_lines(t)) for t in a] == [list(trajectory_lines(t)) for t in b]


def test_dart_collection_single_mode_with_disturbance():
    sigma = DisturbanceLevel((0.09,) * 4, 2)
    trajs = collect_demos("dart", episodes=3, seed=3, sigma=sigma, iteration_k=2)
    residuals = []
    for traj in trajs:
        assert {s.mode for s in traj.steps} == {FULL_MANUAL_MODE}
        for step in traj.steps:
            residuals.append(step.action_executed.as_array() - step.action_intended.as_array())
    res = np.array(residuals)
    assert np.all(res.std(axis=0) > 0.1)  # disturbance present on every dimension


def test_pa_injection_locality():
    sigma = DisturbanceLevel((0.25,) * 4, 2)
    trajs = collect_demos("dipa", episodes=5, seed=4, sigma=sigma, iteration_k=2)
    saw_auto = saw_manual = False
    for traj in trajs:
        for step in traj.steps:
            diff = step.action_executed.as_array() - step.action_intended.as_array()
            if step.mode in (0, 2):
                saw_auto = True
                assert step.action_executed == step.action_intended == AUTO_ACTIONS[step.mode]
            else:
                saw_manual = True
    assert saw_auto and saw_manual


# -- update_sigma -----------------------------------------------------------------------


def _manual_traj(labels, modes=None, sigma=(0.0,) * 4, k=1, feature=None):
    """Synthetic trajectory; labels are the intended actions per step."""
    steps = []
    modes = modes if modes is not None else [1] * len(labels)
    for t, (label, mode) in enumerate(zip(labels, modes)):
        vec = feature[t] if feature is not None else (0.0,) * 8
        act = ActionDelta(*label)
        steps.append(Step(t, tuple(vec), act, act, mode, 0, k))
    return Trajectory(0, k, 0, "pa", tuple(sigma), tuple(steps), True, None)


def test_update_sigma_mean_of_squares():
    # arithmetic oracle: residuals 1.0 and 3.0 on dim 0 -> mean of squares 5.0
    net = const_action_net(7, [0.0, 0.0, 0.0, 0.0])
    bundle = make_pa_bundle(1, None, net)
    traj = _manual_traj([(-1.0, 0, 0, 0), (-3.0, 0, 0, 0)])
    sig = update_sigma(VARIANTS["dipa_minus"], [traj], bundle)
    assert sig.sigma[0] == 5.0
    assert sig.sigma[1:] == (0.0, 0.0, 0.0)
    assert sig.iteration_k == 2


def test_update_sigma_perfect_imitation_zero():
    c = (1.0, -0.5, 0.25, 0.1)
    bundle = make_pa_bundle(1, None, const_action_net(7, list(c)))
    traj = _manual_traj([c] * 6)
    sig = update_sigma(VARIANTS["dipa_minus"], [traj], bundle)
    assert sig.sigma == (0.0, 0.0, 0.0, 0.0)


def test_update_sigma_no_disturbance_variants_zero():
    bundle = make_pa_bundle(1, None, const_action_net(7, [9.0, 9.0, 9.0, 9.0]))
    traj = _manual_traj([(0.0, 0, 0, 0)] * 3)
    for name in ("bcpa", "bc"):
        assert update_sigma(VARIANTS[name], [traj], bundle).sigma == (0.0,) * 4


def test_update_sigma_empty_selection_keeps_previous(caplog):
    bundle = make_pa_bundle(1, None, const_action_net(7, [0.0] * 4))
    prev = (0.3, 0.2, 0.1, 0.05)
    traj = _manual_traj([(0.0, 0, 0, 0)] * 3, modes=[0, 0, 2], sigma=prev, k=2)
    with caplog.at_level(logging.WARNING):
        sig = update_sigma(VARIANTS["dipa_minus"], [traj], bundle)
    assert sig.sigma == prev
    assert any("no steps" in r.message for r in caplog.records)


def _misprediction_fixture(n_manual=100, n_mispredicted=20, c=(-1.0, 0.5, 0.25, -0.125)):
    """One auto step, then ``n_manual`` manual steps whose labels the action
    net reproduces exactly; the switch net predicts the auto carry mode
    wherever feature 0 is set."""
    switch = MlpParams.zeros((8, 4))
    switch.weights[0][0, 2] = 10.0
    switch.biases[0][:] = [0.0, 1.0, -5.0, 0.0]
    bundle = make_pa_bundle(1, switch, const_action_net(7, list(c)))

    labels = [(-5.0, 0.0, 0.0, 1.0)] + [c] * n_manual
    modes = [0] + [1] * n_manual
    features = [(0.0,) * 8]
    flags = [1.0] * n_mispredicted + [0.0] * (n_manual - n_mispredicted)
    flags = flags[::-1]  # mispredictions last: their previous mode is 1
    for f in flags:
        features.append((f, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0))
    traj = _manual_traj(labels, modes=modes, feature=features)
    return bundle, traj


def test_update_sigma_dipa_vs_minus_closed_form():
    # constructed dataset: the switcher wrongly predicts the auto carry mode on
    # 20% of the manual steps; the action gap on dim 0 is |5 - (-1)| = 6, so
    # the label-anchored update exceeds the demonstrated-mode one by
    # 0.2 * 36 = 7.2 there, and the demonstrated-mode residuals vanish.
    bundle, traj = _misprediction_fixture()
    sig_dipa = update_sigma(VARIANTS["dipa"], [traj], bundle)
    sig_minus = update_sigma(VARIANTS["dipa_minus"], [traj], bundle)
    assert sig_minus.sigma == (0.0, 0.0, 0.0, 0.0)
    assert abs(sig_dipa.sigma[0] - 20 * 36.0 / 100) < 1e-12
    oracle = np.array([(5.0, 0.0, 3.0, -1.0)] * 20) - np.array([(-1.0, 0.5, 0.25, -0.125)] * 20)
    expected = (oracle**2).sum(axis=0) / 100
    assert np.allclose(np.array(sig_dipa.sigma), expected, atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(
    n_manual=st.integers(3, 30),
    data=st.data(),
)
def test_update_sigma_underestimation_ordering(n_manual, data):
    # property: whenever the switcher mispredicts at least one demonstrated
    # manual step and the action net's residuals are small, the
    # predicted-mode update dominates the demonstrated-mode one componentwise
    c = (-1.0, 1.0, 1.0, 0.5)  # auto gap per dim: (6, 1, 2, 1.5), all >= 0.2
    deltas = data.draw(
        st.lists(
            st.tuples(*[st.floats(-0.1, 0.1, allow_nan=False)] * 4),
            min_size=n_manual,
            max_size=n_manual,
        )
    )
    mispredict = data.draw(st.lists(st.booleans(), min_size=n_manual - 1, max_size=n_manual - 1))
    if not any(mispredict):
        mispredict[0] = True

    switch = MlpParams.zeros((8, 4))
    switch.weights[0][0, 2] = 10.0
    switch.biases[0][:] = [0.0, 1.0, -5.0, 0.0]
    bundle = make_pa_bundle(1, switch, const_action_net(7, list(c)))

    labels = [(-5.0, 0.0, 0.0, 1.0)] + [tuple(np.add(c, d)) for d in deltas]
    modes = [0] + [1] * n_manual
    features = [(0.0,) * 8, (0.0,) * 8]  # auto step + first manual step (prev mode 0)
    for flag in mispredict:
        features.append((1.0 if flag else 0.0,) + (0.0,) * 7)
    traj = _manual_traj(labels, modes=modes, feature=features)

    sig_dipa = update_sigma(VARIANTS["dipa"], [traj], bundle).as_array()
    sig_minus = update_sigma(VARIANTS["dipa_minus"], [traj], bundle).as_array()
    assert np.all(sig_dipa >= sig_minus - 1e-15)
    assert sig_dipa[0] > sig_minus[0]


def test_update_sigma_dart_uses_all_steps():
    full_net = const_action_net(8, [0.0, 0.0, 0.0, 0.0])
    bundle = make_nopa_bundle(1, full_net)
    steps = []
    for t, label in enumerate([(1.0, 0, 0, 0), (2.0, 0, 0, 0), (3.0, 0, 0, 0)]):
        act = ActionDelta(*label)
        steps.append(Step(t, (0.0,) * 8, act, act, FULL_MANUAL_MODE, 0, 1))
    traj = Trajectory(0, 1, 0, "manual", (0.0,) * 4, tuple(steps), True, None)
    sig = update_sigma(VARIANTS["dart"], [traj], bundle)
    assert sig.sigma[0] == (1.0 + 4.0 + 9.0) / 3


def test_update_sigma_literal_reading_queries_operator():
    # literal extraction selects by the predicted mode and compares against
    # the operator queried at the stored state
    cfg = EnvConfig(n_objects=1)
    env = Env(cfg)
    op = ScriptedOperator(OperatorConfig(), cfg)
    trajs = collect_demos("dipa", episodes=3, seed=6)
    bundle, _ = fit_iteration(VARIANTS["dipa"], trajs, TrainSpec(seed=0), seed_ctx=1)
    lit = update_sigma(VARIANTS["dipa"], trajs, bundle, op, literal_eq13=True, env_config=cfg)
    assert all(v >= 0 for v in lit.sigma)
    # dropping the in-memory states forces reconstruction from the vectors
    stripped = [
        Trajectory(
            t.episode_id, t.iteration_k, t.seed, t.method, t.sigma,
            tuple(
                Step(s.t, s.state_full, s.action_intended, s.action_executed, s.mode, s.episode_id, s.iteration_k)
                for s in t.steps
            ),
            t.success, t.terminal,
        )
        for t in trajs
    ]
    rebuilt = update_sigma(VARIANTS["dipa"], stripped, bundle, op, literal_eq13=True, env_config=cfg)
    assert rebuilt.sigma == lit.sigma


def test_update_sigma_s_dipa_minus_pooled():
    nets = {"mode1": const_action_net(7, [0.0] * 4), "mode3": const_action_net(7, [0.0] * 4)}
    bundle = make_pa_bundle(1, None, None, separated=True, action_nets=nets)
    traj = _manual_traj([(2.0, 0, 0, 0), (4.0, 0, 0, 0)], modes=[1, 3])
    sig = update_sigma(VARIANTS["s_dipa_minus"], [traj], bundle)
    assert sig.sigma[0] == (4.0 + 16.0) / 2  # single pooled level across manual modes


# -- manual_nll ----------------------------------------------------------------------


def test_manual_nll_zero_residual_closed_form():
    c = (1.0, -0.5, 0.25, 0.1)
    bundle = make_pa_bundle(1, None, const_action_net(7, list(c)))
    traj = _manual_traj([c] * 4)
    s = 0.09
    nll = manual_nll([traj], bundle, np.full(4, s), VARIANTS["dipa_minus"])
    assert abs(nll - 4 * 0.5 * math.log(2 * math.pi * s)) < 1e-12


def test_manual_nll_matches_density_oracle():
    bundle = make_pa_bundle(1, None, const_action_net(7, [0.0] * 4))
    labels = [(0.5, -0.2, 0.1, 0.05), (1.0, 0.3, -0.4, 0.2), (-0.3, 0.8, 0.2, -0.1),
              (0.0, 0.0, 0.0, 0.0), (2.0, -1.0, 0.5, 0.25)]
    traj = _manual_traj(labels)
    var = np.array([0.5, 0.25, 0.75, 0.1])
    nll = manual_nll([traj], bundle, var, VARIANTS["dipa_minus"])
    dens = []
    for lbl in labels:
        logp = 0.0
        for d in range(4):
            r = 0.0 - lbl[d]
            logp += -0.5 * math.log(2 * math.pi * var[d]) - r * r / (2 * var[d])
        dens.append(-logp)
    assert abs(nll - sum(dens) / len(dens)) < 1e-12


def test_manual_nll_rejects_zero_variance():
    bundle = make_pa_bundle(1, None, const_action_net(7, [0.0] * 4))
    traj = _manual_traj([(1.0, 0, 0, 0)])
    with pytest.raises(ValueError):
        manual_nll([traj], bundle, np.array([0.0, 0.1, 0.1, 0.1]), VARIANTS["dipa_minus"])


def test_manual_nll_stationary_at_mle():
    # finite differences in sigma around the MLE must vanish
    bundle = make_pa_bundle(1, None, const_action_net(7, [0.0] * 4))
    labels = [(0.5, -0.2, 0.3, 0.05), (1.0, 0.3, -0.4, 0.2), (-0.7, 0.8, 0.2, -0.1)]
    traj = _manual_traj(labels)
    variant = VARIANTS["dipa_minus"]
    sig = update_sigma(variant, [traj], bundle).as_array()
    h = 1e-6
    for d in range(4):
        up, down = sig.copy(), sig.copy()
        up[d] += h
        down[d] -= h
        grad = (manual_nll([traj], bundle, up, variant) - manual_nll([traj], bundle, down, variant)) / (2 * h)
        assert abs(grad) < 1e-6


# -- fit_iteration / run_experiment -----------------------------------------------------


def test_fit_iteration_aggregates_rows():
    t1 = collect_demos("bcpa", episodes=2, seed=10)
    t2 = collect_demos("bcpa", episodes=2, seed=11, iteration_k=2)
    bundle, reports = fit_iteration(VARIANTS["bcpa"], t1 + t2, TrainSpec(max_epochs=2, seed=0))
    total_steps = sum(len(t) for t in t1 + t2)
    assert reports["switch"].epochs_run >= 1
    assert bundle.switch_net is not None


def test_fit_iteration_bc_has_no_switch_net():
    trajs = collect_demos("bc", episodes=2, seed=12)
    bundle, reports = fit_iteration(VARIANTS["bc"], trajs, TrainSpec(max_epochs=2, seed=0))
    assert bundle.switch_net is None
    assert set(bundle.action_nets) == {SHARED_NET}
    assert "switch" not in reports


def test_fit_iteration_s_dipa_separated_nets():
    trajs = collect_demos("bcpa", episodes=3, seed=13)
    bundle, _ = fit_iteration(VARIANTS["s_dipa_minus"], trajs, TrainSpec(max_epochs=2, seed=0))
    assert set(bundle.action_nets) == {"mode1", "mode3"}


def test_fit_iteration_deterministic():
    trajs = collect_demos("bcpa", episodes=3, seed=14)
    spec = TrainSpec(max_epochs=5, seed=3)
    a, _ = fit_iteration(VARIANTS["dipa"], trajs, spec, seed_ctx=1)
    b, _ = fit_iteration(VARIANTS["dipa"], trajs, spec, seed_ctx=1)
    for key in a.action_nets:
        for wa, wb in zip(a.action_nets[key].weights, b.action_nets[key].weights):
            assert np.array_equal(wa, wb)
    for wa, wb in zip(a.switch_net.weights, b.switch_net.weights):
        assert np.array_equal(wa, wb)


def test_run_experiment_emits_records(quick_config, tmp_path):
    records = run_experiment(quick_config, "dipa", seed=0, out_dir=tmp_path / "cell")
    assert len(records) == 2
    assert records[0].sigma_used.is_zero
    assert records[0].k == 1 and records[1].k == 2
    assert (tmp_path / "cell" / "iter1" / "trajectories.jsonl").exists()
    assert (tmp_path / "cell" / "iter2" / "bundle" / "manifest.json").exists()
    assert (tmp_path / "cell" / "status.json").exists()
    # aggregation monotonicity: training data grows with k
    assert sum(len(t) for t in records[1].trajectories) > 0


def test_run_experiment_deterministic(quick_config):
    a = run_experiment(quick_config, "dipa", seed=1)
    b = run_experiment(quick_config, "dipa", seed=1)
    assert [r.sigma_next.sigma for r in a] == [r.sigma_next.sigma for r in b]
    assert [r.eval.success_rate for r in a] == [r.eval.success_rate for r in b]
    assert [list(trajectory_lines(t)) for r in a for t in r.trajectories] == [
        list(trajectory_lines(t)) for r in b for t in r.trajectories
    ]


def test_run_experiment_k1_disturbance_matches_no_di(quick_config):
    dipa_records = run_experiment(quick_config, "dipa", seed=5)
    bcpa_records = run_experiment(quick_config, "bcpa", seed=5)
    a = [list(trajectory_lines(t)) for t in dipa_records[0].trajectories]
    b = [list(trajectory_lines(t)) for t in bcpa_records[0].trajectories]
    assert a == b
