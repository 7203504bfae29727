"""Shared fixtures: small demonstration sets and synthetic policy bundles."""

import numpy as np
import pytest

from dipa.config import ExperimentConfig, with_env
from dipa.core import DisturbanceLevel
from dipa.env import Env, EnvConfig
from dipa.learner import VARIANTS, collect_iteration, fit_iteration
from dipa.nn import MlpParams, Normalizer, TrainSpec
from dipa.policies import SHARED_NET, PolicyBundle
from dipa.rng import derive_stream
from dipa.scripted_operator import OperatorConfig, ScriptedOperator


def collect_demos(
    method="bcpa",
    n_objects=1,
    episodes=5,
    sigma=None,
    seed=0,
    iteration_k=1,
    env_config=None,
):
    cfg = env_config or EnvConfig(n_objects=n_objects)
    env = Env(cfg)
    op = ScriptedOperator(OperatorConfig(), cfg)
    level = sigma if sigma is not None else DisturbanceLevel.zero(iteration_k)
    return collect_iteration(
        VARIANTS[method], env, op, level, episodes, derive_stream(seed, ("collect", iteration_k)), iteration_k
    )


def const_action_net(in_dim, out):
    """Single-layer net with zero weights whose bias is the constant output."""
    net = MlpParams.zeros((in_dim, len(out)))
    net.biases[0][:] = out
    return net


def make_nopa_bundle(n_objects, action_net):
    """Synthetic full-manual bundle (single network on the full observation)."""
    full_dim = 5 + 3 * n_objects
    return PolicyBundle(
        variant_name="fixture",
        uses_pa=False,
        separated=False,
        n_objects=n_objects,
        action_nets={SHARED_NET: action_net},
        action_norms={SHARED_NET: Normalizer.identity(full_dim)},
    )


def make_pa_bundle(n_objects, switch_net, action_net, separated=False, action_nets=None):
    """Synthetic PA bundle with identity normalizers for constructed fixtures."""
    full_dim = 5 + 3 * n_objects
    pa_dim = full_dim - 1
    if action_nets is None:
        action_nets = {SHARED_NET: action_net}
    return PolicyBundle(
        variant_name="fixture",
        uses_pa=True,
        separated=separated,
        n_objects=n_objects,
        action_nets=action_nets,
        action_norms={k: Normalizer.identity(pa_dim) for k in action_nets},
        switch_net=switch_net,
        switch_norm=Normalizer.identity(full_dim) if switch_net is not None else None,
    )


@pytest.fixture(scope="session")
def demos_1obj():
    """Ten clean partially automated episodes on one object."""
    return collect_demos("bcpa", n_objects=1, episodes=10, seed=3)


@pytest.fixture(scope="session")
def trained_1obj():
    """A DIPA bundle fitted on the clean one-object demonstrations."""
    demos = collect_demos("bcpa", n_objects=1, episodes=10, seed=3)
    spec = TrainSpec(seed=1, max_epochs=800, patience=200, learning_rate=2e-3)
    bundle, reports = fit_iteration(VARIANTS["dipa"], demos, spec, seed_ctx=1)
    return demos, bundle, reports


@pytest.fixture(scope="session")
def quick_config():
    """Small but functional experiment configuration for driver tests."""
    return with_env(
        ExperimentConfig(iterations=2, episodes_per_iteration=3, eval_episodes=3, seeds=(0,)),
        n_objects=1,
    )
