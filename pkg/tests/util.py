"""Shared helpers for the test suite."""

from __future__ import annotations

import numpy as np

from semibandit.core import Decision, Policy
from semibandit.envs import EnvironmentSpec
from semibandit.harness import ExperimentConfig, PolicySpec


class OraclePolicy(Policy):
    """Test-only policy that knows mu and always plays the optimal arm."""

    name = "oracle"

    def __init__(self, mu):
        self.mu = np.asarray(mu, dtype=float)

    def reset(self, dim, horizon):
        assert dim == self.mu.shape[0]

    def choose(self, round, rng):
        chosen = int(np.argmax(round.contexts @ self.mu))
        pi = np.zeros(round.n_arms)
        pi[chosen] = 1.0
        return Decision(
            chosen_arm=chosen,
            arm_distribution=pi,
            centered_mean=round.contexts[chosen].copy(),
            surviving_set=(chosen,),
        )

    def update(self, feedback):
        pass


def tiny_config(out_dir=None, policies=None, horizon=40, n_reps=3, gammas=(0.1, 1.0)):
    """A fast sweep config for harness-level tests."""
    if policies is None:
        policies = [
            PolicySpec(kind="gbose", name="GBOSE", options={"ridge": 1.0}),
            PolicySpec(kind="lints", name="TS"),
        ]
    return ExperimentConfig(
        horizon=horizon,
        environments=[
            EnvironmentSpec(n_arms=2, dim=4, confounder="I", context_mode="block"),
        ],
        policies=policies,
        gamma_grid=list(gammas),
        n_reps=n_reps,
        master_seed=7,
        output_dir=None if out_dir is None else str(out_dir),
        parallelism=1,
        record_every=10,
    )
