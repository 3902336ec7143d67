"""Shared vocabulary between policies, environments, and the harness.

Round records are immutable value objects and may be shared freely;
policy instances own their mutable state and belong to one worker at a
time.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

logger = logging.getLogger("semibandit")

# Context norms above this are flagged as violating the unit-ball
# assumption the regret analysis relies on. Violations are logged, not
# rejected: some reference experiment settings break the bound on purpose.
NORM_BOUND = 1.0
_NORM_SLACK = 1e-9


@dataclass(frozen=True, slots=True)
class RoundContext:
    """The contexts offered at one time step: one d-vector per arm."""

    t: int
    contexts: np.ndarray  # shape (n_arms, dim)

    @property
    def n_arms(self) -> int:
        return self.contexts.shape[0]

    @property
    def dim(self) -> int:
        return self.contexts.shape[1]

    def norm_violations(self) -> np.ndarray:
        """Indices of arms whose context leaves the unit ball."""
        sq = np.sum(self.contexts * self.contexts, axis=1)
        return np.nonzero(sq > (NORM_BOUND + _NORM_SLACK) ** 2)[0]


def make_round(t: int, contexts: np.ndarray) -> RoundContext:
    """Validated RoundContext from a (n_arms, dim) context matrix."""
    contexts = np.asarray(contexts, dtype=np.float64)
    if contexts.ndim != 2:
        raise ValueError(f"contexts must be a 2-d array, got shape {contexts.shape}")
    if contexts.shape[0] < 2:
        raise ValueError(f"need at least 2 arms, got {contexts.shape[0]}")
    if t < 1:
        raise ValueError(f"time step must be positive, got {t}")
    return RoundContext(t=int(t), contexts=contexts)


@dataclass(frozen=True, slots=True)
class Decision:
    """A policy's output for one round.

    ``arm_distribution`` sums to one and is supported only on
    ``surviving_set``; ``centered_mean`` is the context mean under that
    distribution. Whether the truly optimal arm survived can be checked
    from the outside by membership in ``surviving_set``.
    """

    chosen_arm: int
    arm_distribution: np.ndarray
    centered_mean: np.ndarray
    surviving_set: tuple[int, ...]
    diagnostics: dict[str, float] | None = None


@dataclass(frozen=True, slots=True)
class Feedback:
    """What the policy learns after playing: the realized reward."""

    reward: float
    round: RoundContext
    decision: Decision


class Policy:
    """Abstract policy contract.

    ``choose`` must not mutate policy state (all learning happens in
    ``update``) and must be deterministic given the rng state.
    """

    name: str = "policy"

    def reset(self, dim: int, horizon: int) -> None:
        raise NotImplementedError

    def choose(self, round: RoundContext, rng: np.random.Generator) -> Decision:
        raise NotImplementedError

    def update(self, feedback: Feedback) -> None:
        raise NotImplementedError


def optimal_arm(mu: np.ndarray, round: RoundContext) -> int:
    """Index of the arm with the highest mean reward, lowest index on ties."""
    scores = round.contexts @ np.asarray(mu, dtype=np.float64)
    return int(np.argmax(scores))


def instant_regret(mu: np.ndarray, round: RoundContext, chosen: int) -> float:
    """Mean-reward gap between the best arm and the chosen one.

    The confounder never enters: it shifts all arms equally, so the
    signature does not even admit it.
    """
    if not 0 <= chosen < round.n_arms:
        raise ValueError(f"chosen arm {chosen} out of range for {round.n_arms} arms")
    scores = round.contexts @ np.asarray(mu, dtype=np.float64)
    return float(scores.max() - scores[chosen])
