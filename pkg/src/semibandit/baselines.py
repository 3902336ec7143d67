"""Thompson-sampling comparison policies.

Three posterior-sampling policies behind the same interface as the pair
sampler: plain linear TS, an action-centered variant that hedges between
a designated base arm and the sampled best non-base arm, and a
semiparametric variant that centers its update by the arm-selection
distribution. The update rules follow the standard published forms of
each method; see the class docstrings for the exact estimators.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import Decision, Feedback, Policy, RoundContext
from .gbose import EstimatorState
from .linalg import cholesky


def _std_normal_cdf(x: float) -> float:
    return 0.5 * (1.0 + math.erf(x / math.sqrt(2.0)))


@dataclass
class TsConfig:
    """Shared knobs for the TS family.

    ``scale`` multiplies the posterior width and is the hyperparameter the
    experiment sweeps tune. ``mc_samples`` only matters for the
    semiparametric variant, ``clip`` only for the action-centered one.
    ``exact_pair_probs`` lets the semiparametric variant compute the
    two-arm selection probability in closed form (the score difference is
    Gaussian) instead of by Monte Carlo; with more than two arms the
    Monte Carlo path is always used.
    """

    scale: float = 1.0
    ridge: float = 1.0
    mc_samples: int = 1000
    clip: tuple[float, float] = (0.1, 0.9)
    exact_pair_probs: bool = False

    def __post_init__(self) -> None:
        if self.scale < 0.0:
            raise ValueError(f"scale must be nonnegative, got {self.scale!r}")
        if not self.ridge > 0.0:
            raise ValueError(f"ridge must be positive, got {self.ridge!r}")
        if self.mc_samples < 1:
            raise ValueError(f"mc_samples must be positive, got {self.mc_samples!r}")
        lo, hi = self.clip
        if not (0.0 < lo <= hi < 1.0):
            raise ValueError(f"clip must satisfy 0 < lo <= hi < 1, got {self.clip!r}")


class _TsBase(Policy):
    def __init__(self, config: TsConfig | None = None, collect_diagnostics: bool = False):
        self.config = config if config is not None else TsConfig()
        self.collect_diagnostics = collect_diagnostics
        self.estimator: EstimatorState | None = None

    def reset(self, dim: int, horizon: int) -> None:
        del horizon
        self.estimator = EstimatorState.create(dim, self.config.ridge)

    def _require_state(self) -> EstimatorState:
        if self.estimator is None:
            raise RuntimeError("policy used before reset()")
        return self.estimator

    def _sample_mu(self, state: EstimatorState, rng: np.random.Generator) -> np.ndarray:
        """Posterior draw N(mu_hat, scale^2 * inv); exact mean at scale 0."""
        if self.config.scale == 0.0:
            return state.mu_hat.copy()
        low = cholesky(state.psd.inv)
        z = rng.standard_normal(state.psd.dim)
        return state.mu_hat + self.config.scale * (low @ z)


class LinTsPolicy(_TsBase):
    """Plain linear Thompson sampling over an uncentered ridge estimator.

    Sampling and update follow Agrawal and Goyal's scheme: draw a
    parameter from the Gaussian posterior, play the argmax, regress the
    raw reward on the played context.
    """

    name = "lints"

    def choose(self, round: RoundContext, rng: np.random.Generator) -> Decision:
        state = self._require_state()
        mu_tilde = self._sample_mu(state, rng)
        chosen = int(np.argmax(round.contexts @ mu_tilde))
        pi = np.zeros(round.n_arms)
        pi[chosen] = 1.0
        diagnostics = None
        if self.collect_diagnostics:
            diagnostics = {"mu_tilde_norm": float(np.linalg.norm(mu_tilde))}
        return Decision(
            chosen_arm=chosen,
            arm_distribution=pi,
            centered_mean=round.contexts[chosen].copy(),
            surviving_set=(chosen,),
            diagnostics=diagnostics,
        )

    def update(self, feedback: Feedback) -> None:
        state = self._require_state()
        played = feedback.round.contexts[feedback.decision.chosen_arm]
        state.absorb(played, feedback.reward)


class SemiTsPolicy(_TsBase):
    """Thompson sampling with an action-centered semiparametric estimator.

    The selection probabilities are estimated by Monte Carlo: the realized
    posterior draw plus ``mc_samples`` fresh draws, each voting for its
    argmax arm. Counts are normalized by the total number of draws, so the
    probabilities sum to one exactly and the played arm always has
    positive mass. The design update adds the centered played context and
    every arm's centered context weighted by its selection probability;
    the response sum uses twice the centered played context, following Kim's
    estimator for this reward model.
    """

    name = "semits"

    def choose(self, round: RoundContext, rng: np.random.Generator) -> Decision:
        state = self._require_state()
        cfg = self.config
        n = round.n_arms
        if cfg.scale == 0.0:
            chosen = int(np.argmax(round.contexts @ state.mu_hat))
            pi = np.zeros(n)
            pi[chosen] = 1.0
        else:
            low = cholesky(state.psd.inv)
            # Realized draw first, then the estimation draws. Scores are
            # sampled directly in arm space: contexts @ (mu_hat + s L z)
            # = base + s (contexts @ L) z, never materializing the draws
            # of the parameter vector itself.
            base = round.contexts @ state.mu_hat
            spread = cfg.scale * (round.contexts @ low)
            z = rng.standard_normal(state.psd.dim)
            chosen = int(np.argmax(base + spread @ z))
            if cfg.exact_pair_probs and n == 2:
                pi = self._pair_probabilities(state, round.contexts)
            else:
                extra = rng.standard_normal((state.psd.dim, cfg.mc_samples))
                winners = np.argmax(base[:, None] + spread @ extra, axis=0)
                counts = np.bincount(winners, minlength=n).astype(np.float64)
                counts[chosen] += 1.0
                pi = counts / (cfg.mc_samples + 1)
        centered = pi @ round.contexts
        diagnostics = None
        if self.collect_diagnostics:
            diagnostics = {f"pi_{i}": float(pi[i]) for i in range(n)}
        return Decision(
            chosen_arm=chosen,
            arm_distribution=pi,
            centered_mean=centered,
            surviving_set=tuple(range(n)),
            diagnostics=diagnostics,
        )

    def _pair_probabilities(self, state: EstimatorState, contexts: np.ndarray) -> np.ndarray:
        """P(arm 1 wins a fresh posterior draw), in closed form.

        The score difference under the posterior is Gaussian with mean
        <b1 - b2, mu_hat> and standard deviation scale * ||b1 - b2|| in
        the inverse-design norm. A zero spread degenerates to the argmax
        indicator with ties to the first arm.
        """
        diff = contexts[0] - contexts[1]
        mean = float(diff @ state.mu_hat)
        sd = self.config.scale * math.sqrt(state.psd.mahalanobis_sq(diff))
        if sd == 0.0:
            p_first = 1.0 if mean >= 0.0 else 0.0
        else:
            p_first = _std_normal_cdf(mean / sd)
        return np.array([p_first, 1.0 - p_first])

    def update(self, feedback: Feedback) -> None:
        state = self._require_state()
        decision = feedback.decision
        contexts = feedback.round.contexts
        center = decision.centered_mean
        x = contexts[decision.chosen_arm] - center
        # One rank-1 term for the played centered context, one per arm
        # carrying selection mass; the coefficient estimate is refreshed
        # once after the whole batch.
        psd = state.psd
        psd.rank1_update(x)
        diffs = contexts - center
        pi = decision.arm_distribution
        for i in np.nonzero(pi)[0]:
            psd.rank1_update(math.sqrt(pi[i]) * diffs[i])
        state.weighted_sum += (2.0 * feedback.reward) * x
        state.mu_hat = psd.inv @ state.weighted_sum


class ActionCenteredTsPolicy(_TsBase):
    """Two-stage TS that hedges between a base arm and a sampled arm.

    Arm 1 (index 0) is treated as the base arm. Stage one picks the best
    non-base arm under a posterior draw; stage two plays it with a
    probability given by the posterior evidence that its mean reward
    beats the base, clipped into the configured band. The update uses
    Greenewald's pseudo-outcome form, which regresses the reward against
    the stage-one arm weighted by the centered play indicator.
    """

    name = "acts"

    def choose(self, round: RoundContext, rng: np.random.Generator) -> Decision:
        if round.n_arms < 2:
            raise ValueError("action-centered TS needs a base arm plus at least one other")
        state = self._require_state()
        cfg = self.config
        mu_tilde = self._sample_mu(state, rng)
        scores = round.contexts[1:] @ mu_tilde
        candidate = 1 + int(np.argmax(scores))
        b_cand = round.contexts[candidate]
        evidence = float(b_cand @ state.mu_hat)
        spread = cfg.scale * math.sqrt(state.psd.mahalanobis_sq(b_cand))
        if spread > 0.0:
            p_play = _std_normal_cdf(evidence / spread)
        else:
            p_play = 1.0 if evidence > 0.0 else 0.0
        p_play = min(max(p_play, cfg.clip[0]), cfg.clip[1])
        chosen = candidate if rng.random() < p_play else 0
        pi = np.zeros(round.n_arms)
        pi[candidate] = p_play
        pi[0] = 1.0 - p_play
        centered = pi @ round.contexts
        diagnostics = None
        if self.collect_diagnostics:
            diagnostics = {
                "pi_play": p_play,
                "mu_tilde_norm": float(np.linalg.norm(mu_tilde)),
            }
        return Decision(
            chosen_arm=chosen,
            arm_distribution=pi,
            centered_mean=centered,
            surviving_set=(0, candidate),
            diagnostics=diagnostics,
        )

    def update(self, feedback: Feedback) -> None:
        state = self._require_state()
        decision = feedback.decision
        candidate = decision.surviving_set[1]
        p_play = float(decision.arm_distribution[candidate])
        b_cand = feedback.round.contexts[candidate]
        state.psd.rank1_update(math.sqrt(p_play * (1.0 - p_play)) * b_cand)
        indicator = 1.0 if decision.chosen_arm == candidate else 0.0
        state.weighted_sum += b_cand * ((indicator - p_play) * feedback.reward)
        state.mu_hat = state.psd.inv @ state.weighted_sum
