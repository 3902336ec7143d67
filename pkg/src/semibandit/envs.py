"""Synthetic semiparametric reward environments.

Rewards are linear in the played context plus an action-independent
confounder term and Gaussian noise. Context layouts: "block" reserves a
zero vector for arm 1 and gives every other arm its own coordinate block
holding a unit-sphere draw; "sphere" gives every arm an independent draw
from the full-dimensional unit sphere.

The per-round generator order is fixed (contexts, then reward noise), so
two environments built from the same seed expose identical context and
noise streams to any pair of policies.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .core import NORM_BOUND, RoundContext, instant_regret, logger
from .linalg import MAX_DIM


class ConfigurationError(ValueError):
    """An environment or experiment description that can never run."""


ConfounderFn = Callable[[int, float], float]

_CONFOUNDERS: dict[str, ConfounderFn] = {}


def register_confounder(tag: str, fn: ConfounderFn, replace: bool = False) -> None:
    """Register a confounder v(t) under a tag usable in EnvironmentSpec.

    The callable receives the 1-based time step and the optimal arm's
    mean reward for that round (only the third built-in uses it).
    """
    if tag in _CONFOUNDERS and not replace:
        raise ValueError(f"confounder tag {tag!r} already registered")
    _CONFOUNDERS[tag] = fn


def confounder_value(spec: "EnvironmentSpec", t: int, optimal_inner: float) -> float:
    """Evaluate the spec's confounder at step t."""
    return _CONFOUNDERS[spec.confounder](t, optimal_inner)


register_confounder("I", lambda t, optimal_inner: 0.0)
register_confounder(
    "II",
    lambda t, optimal_inner: math.log2(t + 1.0) * math.sin(0.0005 * t) ** 2
    + t**0.25,
)
register_confounder(
    "III",
    lambda t, optimal_inner: -math.cos(0.0005 * t) * math.sqrt(abs(optimal_inner)),
)


@dataclass(frozen=True)
class EnvironmentSpec:
    """Reward-model parameters for one synthetic environment.

    ``noise_variance`` is the variance (not the standard deviation) of
    the reward noise. ``fixed_mu``, when given, pins the coefficient
    vector; otherwise each replication draws it per coordinate from the
    uniform range.
    """

    n_arms: int
    dim: int
    confounder: str = "I"
    noise_variance: float = 0.12
    context_mode: str = "block"
    mu_range: tuple[float, float] = (-0.5, 0.5)
    fixed_mu: tuple[float, ...] | None = None
    seed: int = 0
    label: str | None = None

    def __post_init__(self) -> None:
        if self.n_arms < 2:
            raise ConfigurationError(f"need at least 2 arms, got {self.n_arms}")
        if self.dim < 1:
            raise ConfigurationError(f"dim must be positive, got {self.dim}")
        if self.dim > MAX_DIM:
            raise ConfigurationError(f"dim {self.dim} exceeds the maximum {MAX_DIM}")
        if not self.noise_variance > 0.0:
            raise ConfigurationError(
                f"noise_variance must be positive, got {self.noise_variance!r}"
            )
        if self.context_mode not in ("block", "sphere"):
            raise ConfigurationError(
                f"context_mode must be 'block' or 'sphere', got {self.context_mode!r}"
            )
        if self.context_mode == "block" and self.dim % (self.n_arms - 1) != 0:
            raise ConfigurationError(
                f"block mode needs (n_arms - 1) to divide dim; "
                f"got n_arms={self.n_arms}, dim={self.dim}"
            )
        if self.mu_range[0] > self.mu_range[1]:
            raise ConfigurationError(f"empty mu_range {self.mu_range!r}")
        if self.fixed_mu is not None and len(self.fixed_mu) != self.dim:
            raise ConfigurationError(
                f"fixed_mu has length {len(self.fixed_mu)}, expected {self.dim}"
            )
        if self.label is not None and not all(
            c.isalnum() or c in "_.-" for c in self.label
        ):
            raise ConfigurationError(
                f"label must be filesystem-safe ([A-Za-z0-9_.-]), got {self.label!r}"
            )

    @property
    def display_label(self) -> str:
        if self.label is not None:
            return self.label
        return f"N{self.n_arms}-d{self.dim}-{self.confounder}"


def gen_mu(spec: EnvironmentSpec, rng: np.random.Generator) -> np.ndarray:
    """Coefficient vector for one replication; warns if it leaves the unit ball."""
    if spec.fixed_mu is not None:
        mu = np.asarray(spec.fixed_mu, dtype=np.float64)
    else:
        lo, hi = spec.mu_range
        mu = rng.uniform(lo, hi, spec.dim)
    norm = float(np.linalg.norm(mu))
    if norm > NORM_BOUND:
        logger.warning(
            "coefficient vector norm %.4f exceeds the unit-ball assumption", norm
        )
    return mu


class Environment:
    """One seeded replication of a synthetic environment.

    Cumulative regret is tracked here, from the environment's own view of
    the optimal arm; it never reads anything from the policy beyond the
    chosen arm index.
    """

    def __init__(self, spec: EnvironmentSpec, seed=None):
        if spec.confounder not in _CONFOUNDERS:
            raise ConfigurationError(f"unknown confounder tag {spec.confounder!r}")
        self.spec = spec
        self.rng = np.random.default_rng(spec.seed if seed is None else seed)
        self.mu = gen_mu(spec, self.rng)
        self.t = 0
        self.cumulative_regret = 0.0
        self._noise_sd = math.sqrt(spec.noise_variance)
        self._confounder = _CONFOUNDERS[spec.confounder]
        self._scores: np.ndarray | None = None
        self._warned_context_norm = False
        self._warned_confounder = False
        if spec.context_mode == "block":
            width = spec.dim // (spec.n_arms - 1)
            self._block_rows = np.repeat(np.arange(1, spec.n_arms), width)
            self._block_cols = np.arange(spec.dim)
            self._block_width = width

    def new_round(self) -> RoundContext:
        """Generate the next round's contexts; advances the clock."""
        self.t += 1
        spec = self.spec
        if spec.context_mode == "block":
            draws = self._unit_rows(spec.n_arms - 1, self._block_width)
            contexts = np.zeros((spec.n_arms, spec.dim))
            contexts[self._block_rows, self._block_cols] = draws.ravel()
        else:
            contexts = self._unit_rows(spec.n_arms, spec.dim)
        # Construction guarantees make_round's shape checks, so build the
        # record directly; the norm hook still runs until it first fires.
        round = RoundContext(t=self.t, contexts=contexts)
        if not self._warned_context_norm:
            violations = round.norm_violations()
            if violations.size:
                self._warned_context_norm = True
                logger.warning(
                    "context norms exceed the unit ball for arms %s at t=%d",
                    [int(i) + 1 for i in violations],
                    self.t,
                )
        self._scores = contexts @ self.mu
        return round

    def realize(self, round: RoundContext, chosen: int) -> float:
        """Reward for the chosen arm; accumulates this round's regret."""
        scores = self._scores
        if scores is None or round.t != self.t:
            scores = round.contexts @ self.mu
        optimal_inner = float(scores.max())
        v = self._confounder(round.t, optimal_inner)
        if abs(v) > 1.0 and not self._warned_confounder:
            self._warned_confounder = True
            logger.warning(
                "confounder %r leaves [-1, 1] at t=%d (v=%.6g); the bounded-"
                "confounder assumption does not hold for this run",
                self.spec.confounder,
                round.t,
                v,
            )
        noise = self.rng.normal(0.0, self._noise_sd)
        self.cumulative_regret += optimal_inner - float(scores[chosen])
        return float(scores[chosen]) + v + noise

    def regret_of(self, round: RoundContext, chosen: int) -> float:
        """Instantaneous regret of a hypothetical choice; does not accumulate."""
        return instant_regret(self.mu, round, chosen)

    def _unit_rows(self, count: int, width: int) -> np.ndarray:
        draws = self.rng.standard_normal((count, width))
        norms = np.sqrt(np.sum(draws * draws, axis=1))
        while np.any(norms == 0.0):  # probability zero, kept for determinism
            dead = norms == 0.0
            draws[dead] = self.rng.standard_normal((int(dead.sum()), width))
            norms = np.sqrt(np.sum(draws * draws, axis=1))
        draws /= norms[:, None]
        return draws
