"""Episodes, sweeps, aggregation, and result files."""

from __future__ import annotations

import json

import numpy as np
import pytest

from semibandit.envs import ConfigurationError, EnvironmentSpec
from semibandit.gbose import GboseConfig, GbosePolicy
from semibandit.harness import (
    AggregateBand,
    ExperimentConfig,
    PolicySpec,
    RegretCurve,
    aggregate_band,
    best_bands,
    cell_seed,
    default_gamma_grid,
    ensure_writable,
    paper_config,
    read_agg,
    record_steps,
    register_policy_kind,
    run_episode,
    run_sweep,
    select_best_gamma,
    thin_curve,
    write_results,
)

from util import OraclePolicy, tiny_config


def gbose_policy():
    return GbosePolicy(GboseConfig(ridge_override=1.0))


class TestRunEpisode:
    def test_minimal_horizon(self):
        env = EnvironmentSpec(n_arms=2, dim=2, context_mode="sphere")
        curve = run_episode(gbose_policy(), env, horizon=1, seed=0)
        assert curve.values.shape == (1,)
        assert curve.values[0] >= 0.0

    def test_same_seed_bit_identical(self):
        env = EnvironmentSpec(n_arms=3, dim=3, confounder="II", context_mode="sphere")
        a = run_episode(gbose_policy(), env, horizon=50, seed=4)
        b = run_episode(gbose_policy(), env, horizon=50, seed=4)
        assert np.array_equal(a.values, b.values)

    def test_oracle_policy_has_zero_regret(self):
        mu = (0.3, -0.2, 0.1)
        env = EnvironmentSpec(n_arms=4, dim=3, fixed_mu=mu, context_mode="sphere")
        curve = run_episode(OraclePolicy(mu), env, horizon=100, seed=1)
        assert np.all(curve.values == 0.0)

    def test_curve_is_nondecreasing(self):
        env = EnvironmentSpec(n_arms=2, dim=2, confounder="III", context_mode="sphere")
        curve = run_episode(gbose_policy(), env, horizon=200, seed=9)
        assert np.all(np.diff(curve.values) >= 0.0)

    def test_bad_horizon(self):
        env = EnvironmentSpec(n_arms=2, dim=2)
        with pytest.raises(ConfigurationError):
            run_episode(gbose_policy(), env, horizon=0, seed=0)


class TestThinning:
    def test_record_steps_includes_endpoints(self):
        grid = record_steps(95, 10)
        assert grid[0] == 1
        assert grid[-1] == 95
        assert set(grid.tolist()) == {1, 10, 20, 30, 40, 50, 60, 70, 80, 90, 95}

    def test_thin_curve_picks_grid_values(self):
        env = EnvironmentSpec(n_arms=2, dim=2, context_mode="sphere")
        curve = run_episode(gbose_policy(), env, horizon=95, seed=3)
        thin = thin_curve(curve, 10)
        assert thin.steps.tolist() == record_steps(95, 10).tolist()
        assert thin.values[-1] == curve.values[-1]
        assert thin.values[0] == curve.values[0]


class TestRunSweep:
    def test_episode_count(self, tmp_path):
        config = tiny_config(tmp_path, horizon=20, n_reps=10, gammas=default_gamma_grid())
        result = run_sweep(config)
        assert len(result.curves) == 2 * 1 * 11 * 10
        assert result.failures == []

    def test_parallelism_does_not_change_results(self, tmp_path):
        serial = tiny_config(tmp_path / "s", horizon=30, n_reps=2)
        parallel = tiny_config(tmp_path / "p", horizon=30, n_reps=2)
        parallel.parallelism = 3
        res_s = run_sweep(serial)
        res_p = run_sweep(parallel)
        paths_s = write_results(res_s.curves, best_bands(serial, res_s.curves), serial)
        paths_p = write_results(res_p.curves, best_bands(parallel, res_p.curves), parallel)
        assert paths_s["raw"].read_bytes() == paths_p["raw"].read_bytes()
        assert paths_s["agg"].read_bytes() == paths_p["agg"].read_bytes()

    def test_failure_isolation(self, tmp_path):
        class ExplodingPolicy(OraclePolicy):
            def choose(self, round, rng):
                if round.t == 2:
                    raise RuntimeError("injected failure")
                return super().choose(round, rng)

        def build_exploder(spec, gamma, horizon):
            if gamma == 0.1:
                return ExplodingPolicy(np.zeros(4))
            return OraclePolicy(np.zeros(4))

        try:
            register_policy_kind("exploder", build_exploder)
        except ValueError:
            pass
        config = tiny_config(
            tmp_path,
            policies=[
                PolicySpec(kind="exploder", name="X"),
                PolicySpec(kind="lints", name="TS"),
            ],
            n_reps=1,
            gammas=(0.1, 1.0),
        )
        result = run_sweep(config)
        assert len(result.failures) == 1
        assert len(result.curves) == 2 * 2 * 1 - 1
        assert result.failures[0]["policy"] == "X"
        assert "injected failure" in result.failures[0]["error"]

    def test_cell_seed_is_stable(self):
        env = EnvironmentSpec(n_arms=2, dim=2)
        seed_a = cell_seed(0, env, 0, 0, 0, 0)
        seed_b = cell_seed(0, env, 0, 0, 0, 0)
        assert seed_a == seed_b
        assert cell_seed(0, env, 0, 0, 0, 1) != seed_a
        assert cell_seed(1, env, 0, 0, 0, 0) != seed_a


class TestAggregation:
    def make_curves(self, finals, setting="N2-d4-I"):
        curves = []
        for rep, final in enumerate(finals):
            steps = np.array([1, 10, 20])
            values = np.array([final / 3.0, final / 2.0, final])
            curves.append(
                RegretCurve(
                    policy="P", setting=setting, n_arms=2, dim=4,
                    gamma_mult=1.0, rep=rep, seed=rep, steps=steps, values=values,
                )
            )
        return curves

    def test_hand_evaluated_quartiles(self):
        # Oracle: linear interpolation at rank p*(n-1) over {1..10} gives
        # q1 = 3.25, median = 5.5, q3 = 7.75.
        curves = self.make_curves(range(1, 11))
        band = aggregate_band(curves)
        assert band.median[-1] == pytest.approx(5.5)
        assert band.q1[-1] == pytest.approx(3.25)
        assert band.q3[-1] == pytest.approx(7.75)

    def test_single_rep_band_collapses(self):
        band = aggregate_band(self.make_curves([4.0]))
        np.testing.assert_array_equal(band.median, band.q1)
        np.testing.assert_array_equal(band.median, band.q3)

    def test_band_ordering(self):
        rng = np.random.default_rng(0)
        curves = self.make_curves(rng.uniform(1, 100, size=9))
        band = aggregate_band(curves)
        assert np.all(band.q1 <= band.median + 1e-15)
        assert np.all(band.median <= band.q3 + 1e-15)

    def test_permutation_invariance(self):
        curves = self.make_curves([5, 1, 9, 3, 7])
        shuffled = [curves[i] for i in (3, 0, 4, 2, 1)]
        a = aggregate_band(curves)
        b = aggregate_band(shuffled)
        np.testing.assert_array_equal(a.median, b.median)
        np.testing.assert_array_equal(a.q1, b.q1)

    def test_empty_input_rejected(self):
        with pytest.raises(ValueError):
            aggregate_band([])

    def test_mismatched_grids_rejected(self):
        curves = self.make_curves([1.0, 2.0])
        curves[1].steps = np.array([1, 5, 20])
        with pytest.raises(ValueError):
            aggregate_band(curves)


class TestSelectBestGamma:
    def curves_for(self, gamma_to_finals, n_reps=None):
        curves = []
        for gamma, finals in gamma_to_finals.items():
            for rep, final in enumerate(finals):
                curves.append(
                    RegretCurve(
                        policy="P", setting="S", n_arms=2, dim=4,
                        gamma_mult=gamma, rep=rep, seed=rep,
                        steps=np.array([1, 20]), values=np.array([0.0, float(final)]),
                    )
                )
        return curves

    def test_single_gamma(self):
        curves = self.curves_for({0.5: [3, 1, 2]})
        gamma, band = select_best_gamma(curves, "P", "S", n_reps=3)
        assert gamma == 0.5
        assert band.median[-1] == 2.0

    def test_even_count_median(self):
        curves = self.curves_for({1.0: list(range(1, 11))})
        _, band = select_best_gamma(curves, "P", "S", n_reps=10)
        assert band.median[-1] == pytest.approx(5.5)

    def test_argmin_of_median(self):
        curves = self.curves_for({0.1: [100, 100], 1.0: [90, 90]})
        gamma, _ = select_best_gamma(curves, "P", "S", n_reps=2)
        assert gamma == 1.0

    def test_incomplete_gamma_excluded_with_warning(self, caplog):
        curves = self.curves_for({0.1: [1.0], 1.0: [50, 60]})
        import logging
        with caplog.at_level(logging.WARNING, logger="semibandit"):
            gamma, _ = select_best_gamma(curves, "P", "S", n_reps=2)
        assert gamma == 1.0  # the lower-regret gamma lacked a replication
        assert any("excluding gamma" in r.message for r in caplog.records)

    def test_all_excluded_is_error(self):
        curves = self.curves_for({0.1: [1.0]})
        with pytest.raises(ValueError):
            select_best_gamma(curves, "P", "S", n_reps=2)


class TestWriteResults:
    def test_round_trip_and_shapes(self, tmp_path):
        config = tiny_config(tmp_path, horizon=50, n_reps=4)
        result = run_sweep(config)
        bands = best_bands(config, result.curves)
        paths = write_results(result.curves, bands, config)

        parsed = read_agg(paths["agg"])
        assert len(parsed) == len(bands)
        for got, expected in zip(parsed, sorted(bands, key=lambda b: (b.policy, b.setting))):
            assert got.policy == expected.policy
            assert got.setting == expected.setting
            assert got.gamma_mult == expected.gamma_mult
            np.testing.assert_array_equal(got.steps, expected.steps)
            np.testing.assert_array_equal(got.median, expected.median)
            np.testing.assert_array_equal(got.q1, expected.q1)
            np.testing.assert_array_equal(got.q3, expected.q3)

        summary_lines = paths["summary"].read_text().strip().splitlines()
        assert len(summary_lines) == 1 + len(config.policies) * len(config.environments)

        raw_lines = paths["raw"].read_text().strip().splitlines()
        expected_rows = len(result.curves) * len(record_steps(50, 10))
        assert len(raw_lines) == 1 + expected_rows
        assert raw_lines[0] == "policy,setting,n_arms,dim,gamma_mult,rep,seed,t,cum_regret"

        run_meta = json.loads(paths["run"].read_text())
        assert run_meta["config"]["horizon"] == 50
        assert run_meta["code_version"]
        assert run_meta["failures"] == []

    def test_float_format_round_trips(self, tmp_path):
        config = tiny_config(tmp_path, horizon=23, n_reps=2)
        result = run_sweep(config)
        bands = best_bands(config, result.curves)
        paths = write_results(result.curves, bands, config)
        import csv
        by_key = {}
        with open(paths["raw"], newline="") as fh:
            for row in csv.DictReader(fh):
                key = (row["policy"], float(row["gamma_mult"]), int(row["rep"]), int(row["t"]))
                by_key[key] = float(row["cum_regret"])
        for curve in result.curves:
            assert by_key[(curve.policy, curve.gamma_mult, curve.rep, 23)] == curve.values[-1]

    def test_failures_manifest_written(self, tmp_path):
        config = tiny_config(tmp_path, horizon=10, n_reps=1)
        failures = [{"policy": "X", "setting": "S", "gamma_mult": 0.1,
                     "rep": 0, "seed": 1, "error": "boom"}]
        paths = write_results([], [], config, failures=failures)
        assert json.loads(paths["failures"].read_text())[0]["error"] == "boom"

    def test_unwritable_output_dir_fails_fast(self, tmp_path):
        blocker = tmp_path / "blocker"
        blocker.write_text("not a directory")
        with pytest.raises(OSError):
            ensure_writable(blocker / "sub")


class TestConfig:
    def test_dict_round_trip(self, tmp_path):
        config = paper_config(output_dir=str(tmp_path), master_seed=3)
        clone = ExperimentConfig.from_dict(json.loads(json.dumps(config.to_dict())))
        assert clone.to_dict() == config.to_dict()

    def test_validation_catches_duplicates(self):
        config = tiny_config()
        config.policies = [PolicySpec(kind="lints", name="A")] * 2
        with pytest.raises(ConfigurationError):
            config.validate()

    def test_validation_unknown_kind(self):
        config = tiny_config()
        config.policies = [PolicySpec(kind="martian", name="M")]
        with pytest.raises(ConfigurationError):
            config.validate()

    def test_gamma_grid_must_be_positive(self):
        config = tiny_config()
        config.gamma_grid = [0.1, -1.0]
        with pytest.raises(ConfigurationError):
            config.validate()

    def test_default_grid_shape(self):
        grid = default_gamma_grid()
        assert len(grid) == 11
        assert grid[0] == pytest.approx(0.01)
        assert grid[-1] == pytest.approx(10.0)
        assert all(a < b for a, b in zip(grid, grid[1:]))

    def test_output_dir_env_fallback(self, tmp_path, monkeypatch):
        from semibandit.harness import resolve_output_dir
        config = tiny_config()
        config.output_dir = None
        monkeypatch.setenv("SEMIBANDIT_OUT", str(tmp_path / "envdir"))
        assert resolve_output_dir(config) == tmp_path / "envdir"

    def test_paper_config_structure(self):
        config = paper_config()
        assert config.horizon == 20000
        assert config.n_reps == 10
        assert len(config.gamma_grid) == 11
        assert len(config.environments) == 9
        assert len(config.policies) == 4
        modes = {
            (env.n_arms, env.dim): env.context_mode for env in config.environments
        }
        assert modes[(2, 10)] == "block"
        assert modes[(10, 2)] == "sphere"
        assert modes[(10, 10)] == "sphere"
        config.validate()


class TestPolicyExchangeability:
    def test_harness_runs_all_policies_without_branching(self):
        env = EnvironmentSpec(n_arms=3, dim=4, confounder="III", context_mode="sphere")
        from semibandit.baselines import (
            ActionCenteredTsPolicy, LinTsPolicy, SemiTsPolicy, TsConfig,
        )
        policies = [
            GbosePolicy(GboseConfig(ridge_override=1.0)),
            LinTsPolicy(TsConfig(scale=0.5)),
            SemiTsPolicy(TsConfig(scale=0.5, mc_samples=50)),
            ActionCenteredTsPolicy(TsConfig(scale=0.5)),
        ]
        for policy in policies:
            curve = run_episode(policy, env, horizon=30, seed=5)
            assert curve.values.shape == (30,)
            assert np.all(np.diff(curve.values) >= 0.0)
