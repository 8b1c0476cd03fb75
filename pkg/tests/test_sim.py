import json

import numpy as np
import pytest

from spbandit import (
    AlgoConfig,
    Environment,
    ExperimentPlan,
    InsufficientPoints,
    RegretTrace,
    extract_order,
    fit_slope,
    fits_from_csv,
    generate_sp_instance,
    make_rng,
    peaks_of,
    permute_columns,
    read_results_csv,
    run_plan,
    simulate,
    subsample_grid,
    write_results_csv,
)
from spbandit.sim import RunRecord

from conftest import unimodal_with_peak


class TestRngContract:
    def test_philox_uniform_test_vector(self):
        # Frozen stream: the whole package draws only these uniform doubles.
        got = make_rng(0).random(4)
        want = [0.014067035665647709, 0.2577672456246177,
                0.47156538101528966, 0.0914196711073687]
        assert np.array_equal(got, np.asarray(want))

    def test_seed_sequence_vector(self):
        got = make_rng(np.random.SeedSequence([7, 1, 0])).random(3)
        want = [0.8525380166785683, 0.4035879395633938, 0.7639735873046407]
        assert np.array_equal(got, np.asarray(want))


class TestGenerator:
    def test_rows_unimodal_and_in_range(self):
        for seed in range(25):
            gen = generate_sp_instance(6, 7, seed=seed, horizon=1000)
            peaks = peaks_of(gen.instance.theta)  # must not raise
            theta = gen.instance.theta
            assert theta.min() >= 0.2 and theta.max() <= 0.9
            for u in range(6):
                assert unimodal_with_peak(theta[u], gen.peaks[u])
            assert np.array_equal(peaks, gen.peaks)

    def test_determinism(self):
        a = generate_sp_instance(5, 6, seed=123, horizon=1000)
        b = generate_sp_instance(5, 6, seed=123, horizon=1000)
        assert np.array_equal(a.instance.theta, b.instance.theta)
        assert np.array_equal(a.peaks, b.peaks)

    def test_default_costs_and_budget(self):
        gen = generate_sp_instance(3, 8, seed=1, horizon=1000)
        assert np.all(gen.instance.costs == 1)
        assert gen.instance.budget == 4

    def test_single_arm(self):
        gen = generate_sp_instance(3, 1, seed=2, horizon=100)
        assert gen.instance.budget == 1
        assert gen.peaks.tolist() == [0, 0, 0]

    def test_random_costs_within_budget(self):
        gen = generate_sp_instance(4, 6, seed=3, horizon=1000, costs_mode="random")
        assert gen.instance.costs.min() >= 1
        assert gen.instance.costs.max() <= gen.instance.budget

    def test_peak_gap_enforced(self):
        for seed in range(20):
            gen = generate_sp_instance(8, 5, seed=seed, horizon=1000, peak_gap=0.25)
            theta = gen.instance.theta
            top = np.sort(theta, axis=1)
            assert np.all(top[:, -1] - top[:, -2] >= 0.25 - 1e-12)


class TestPermutation:
    def test_sp_order_restores_unimodality(self):
        gen = generate_sp_instance(5, 7, seed=4, horizon=1000)
        perm = permute_columns(gen.instance, seed=9)
        peaks_of(perm.instance.theta, perm.sp_order)  # must not raise
        inverse = np.argsort(perm.permutation)
        assert np.array_equal(
            perm.instance.theta[:, inverse], gen.instance.theta)

    def test_costs_follow_their_arms(self):
        gen = generate_sp_instance(3, 5, seed=5, horizon=1000, costs_mode="random")
        perm = permute_columns(gen.instance, seed=10)
        assert np.array_equal(perm.instance.costs,
                              gen.instance.costs[perm.permutation])

    def test_single_column_unchanged(self):
        gen = generate_sp_instance(3, 1, seed=6, horizon=100)
        perm = permute_columns(gen.instance, seed=11)
        assert np.array_equal(perm.instance.theta, gen.instance.theta)

    def test_extraction_recovers_shuffled_instance(self):
        for seed in range(20):
            gen = generate_sp_instance(6, 6, seed=seed, horizon=1000)
            perm = permute_columns(gen.instance, seed=seed + 100)
            order = extract_order(perm.instance.theta, 0.0)
            peaks_of(perm.instance.theta, order)  # must not raise


class TestEnvironment:
    def test_reward_stream_reproducible(self):
        gen = generate_sp_instance(4, 5, seed=7, horizon=1000)
        a = Environment(gen.instance, seed=42)
        b = Environment(gen.instance, seed=42)
        arms = np.array([0, 1, 2, 3])
        for _ in range(5):
            assert np.array_equal(a.draw_round(arms), b.draw_round(arms))
        assert np.array_equal(a.draw_arm_block(2, 100), b.draw_arm_block(2, 100))

    def test_deterministic_mode_returns_means(self):
        gen = generate_sp_instance(4, 5, seed=7, horizon=1000)
        env = Environment(gen.instance, seed=0, deterministic=True)
        arms = np.array([1, 1, 0, 4])
        assert np.array_equal(env.draw_round(arms),
                              gen.instance.theta[np.arange(4), arms])
        assert np.array_equal(env.draw_arm_block(3, 10),
                              10 * gen.instance.theta[:, 3])

    def test_block_draw_matches_bernoulli_mean(self):
        gen = generate_sp_instance(3, 4, seed=8, horizon=1000)
        env = Environment(gen.instance, seed=1)
        n = 4000
        frac = env.draw_arm_block(0, n) / n
        assert np.all(np.abs(frac - gen.instance.theta[:, 0]) < 0.05)

    def test_optimum_autocomputed_for_shuffled_instances(self):
        gen = generate_sp_instance(4, 5, seed=9, horizon=1000)
        perm = permute_columns(gen.instance, seed=2)
        a = Environment(gen.instance, seed=0)
        b = Environment(perm.instance, seed=0)
        assert a.optimal_value == pytest.approx(b.optimal_value, abs=1e-12)

    def test_optimum_for_general_matrix_uses_enumeration(self):
        theta = np.array([
            [0.9, 0.1, 0.8, 0.2],
            [0.1, 0.9, 0.2, 0.8],
            [0.8, 0.2, 0.1, 0.9],
        ])
        from spbandit import brute_force_opt, new_instance
        inst = new_instance(theta, [1] * 4, 2, 100)
        env = Environment(inst, seed=0)
        assert env.optimal_value == pytest.approx(
            brute_force_opt(theta, [1] * 4, 2)[1], abs=1e-12)


class TestSubsampleGrid:
    def test_dense_then_geometric(self):
        grid = subsample_grid(5000)
        assert grid[0] == 1 and grid[-1] == 5000
        assert np.array_equal(grid[:1000], np.arange(1, 1001))
        steps = np.diff(grid[999:])
        assert np.all(steps >= 1)
        ratio = grid[1000:] / grid[999:-1]
        assert np.all(ratio <= 1.05 + 1e-9)

    def test_short_horizon_is_every_round(self):
        assert np.array_equal(subsample_grid(10), np.arange(1, 11))

    def test_strictly_increasing_and_ends_at_t(self):
        for t in (1001, 12345, 100_000):
            grid = subsample_grid(t)
            assert np.all(np.diff(grid) > 0)
            assert grid[-1] == t


class TestFitSlope:
    def test_exact_power_law(self):
        t = np.unique(np.logspace(1, 5, 20).astype(int))
        fit = fit_slope(t, 7.0 * t ** (2.0 / 3.0))
        assert fit.slope == pytest.approx(2.0 / 3.0, abs=1e-9)
        assert fit.r2 == pytest.approx(1.0, abs=1e-12)

    def test_constant_curve_has_zero_slope(self):
        t = np.array([10, 100, 1000, 10_000])
        fit = fit_slope(t, np.full(4, 5.0))
        assert fit.slope == pytest.approx(0.0, abs=1e-12)

    def test_linear_regret(self):
        t = np.arange(10, 200, 17)
        fit = fit_slope(t, 3.0 * t)
        assert fit.slope == pytest.approx(1.0, abs=1e-9)

    def test_insufficient_points(self):
        with pytest.raises(InsufficientPoints):
            fit_slope([10, 20], [1.0, 2.0])
        with pytest.raises(InsufficientPoints):
            fit_slope([10, 20, 30], [0.0, 0.0, 0.0])  # nonpositive excluded

    def test_range_filtering(self):
        t = np.array([1, 10, 100, 1000, 10_000])
        r = 2.0 * t.astype(float)
        r[0] = 1e6  # outlier outside the fit range
        fit = fit_slope(t, r, t_min=10)
        assert fit.slope == pytest.approx(1.0, abs=1e-9)
        assert fit.n_points == 4


def tiny_plan(**overrides):
    base = dict(
        users=3, arms=4, n_instances=1, seeds_per_instance=1,
        horizons=(300,), algorithms=(AlgoConfig("mvm"), AlgoConfig("greedy_etc")),
        master_seed=11,
    )
    base.update(overrides)
    return ExperimentPlan(**base)


class TestSimulate:
    def test_records_in_plan_order(self):
        plan = tiny_plan(horizons=(200, 300))
        records = simulate(plan)
        keys = [(r.algo, r.instance_id, r.seed, r.horizon) for r in records]
        assert keys == [
            ("mvm", 0, 0, 200), ("mvm", 0, 0, 300),
            ("greedy_etc", 0, 0, 200), ("greedy_etc", 0, 0, 300),
        ]
        for rec in records:
            assert rec.t[-1] == rec.horizon

    def test_deterministic_csv_bytes(self, tmp_path):
        plan = tiny_plan()
        p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
        write_results_csv(simulate(plan), p1)
        write_results_csv(simulate(plan), p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_worker_count_does_not_change_results(self, tmp_path):
        plan = tiny_plan(seeds_per_instance=2)
        p1, p2 = tmp_path / "serial.csv", tmp_path / "parallel.csv"
        write_results_csv(simulate(plan, jobs=1), p1)
        write_results_csv(simulate(plan, jobs=2), p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_per_run_errors_recorded_not_raised(self, tmp_path):
        plan = tiny_plan(arms=5, algorithms=(
            AlgoConfig("cucb", {"max_arms": 2}),  # forces TooManyArms
            AlgoConfig("mvm"),
        ))
        records = simulate(plan)
        assert records[0].flags.startswith("error:TooManyArms")
        assert not records[1].flags.startswith("error:")
        path = tmp_path / "err.csv"
        write_results_csv(records, path)
        fits = fits_from_csv(path)  # the failed run is excluded from fits
        assert [f["algo"] for f in fits] == ["mvm"]

    def test_optimal_playing_stub_yields_zero_column(self, tmp_path):
        # A stub trace that always plays the optimum round-trips as all zeros.
        trace = RegretTrace(algo="mvm", inst=np.zeros(50), optimal_value=2.0)
        t, inst, cum = trace.sample(subsample_grid(50))
        rec = RunRecord(algo="mvm", instance_id=0, seed=0, horizon=50,
                        t=t, inst=inst, cum=cum)
        path = tmp_path / "stub.csv"
        write_results_csv([rec], path)
        cols = read_results_csv(path)
        assert np.all(cols["inst_regret"] == 0.0)
        assert np.all(cols["cum_regret"] == 0.0)

    def test_csv_roundtrip_exact(self, tmp_path):
        plan = tiny_plan()
        records = simulate(plan)
        path = tmp_path / "r.csv"
        write_results_csv(records, path)
        cols = read_results_csv(path)
        total = sum(r.t.shape[0] for r in records)
        assert cols["t"].shape[0] == total
        # shortest-repr floats parse back to identical doubles
        assert cols["cum_regret"][-1] == records[-1].cum[-1]


class TestFitsFromCsv:
    def test_endpoint_mode_for_multi_horizon(self, tmp_path):
        plan = tiny_plan(algorithms=(AlgoConfig("emc"),),
                         horizons=(200, 400, 800), seeds_per_instance=2)
        out = run_plan(plan, tmp_path / "out")
        fits = out["fits"]
        assert len(fits) == 1 and fits[0]["mode"] == "endpoint"
        assert fits[0]["n_points"] == 3
        assert fits[0]["slope"] is not None

    def test_trajectory_mode_for_single_horizon(self, tmp_path):
        plan = tiny_plan(horizons=(2500,), algorithms=(AlgoConfig("mvm"),))
        out = run_plan(plan, tmp_path / "out")
        fits = out["fits"]
        assert fits[0]["mode"] == "trajectory"
        assert fits[0]["t_min"] == 50.0  # ceil(sqrt(2500))
        assert fits[0]["horizon"] == 2500

    def test_rerun_writes_identical_files(self, tmp_path):
        plan = tiny_plan(horizons=(500,), algorithms=(AlgoConfig("emc"), AlgoConfig("mvm")))
        a = run_plan(plan, tmp_path / "a")
        b = run_plan(plan, tmp_path / "b")
        assert (tmp_path / "a/results.csv").read_bytes() == (tmp_path / "b/results.csv").read_bytes()
        assert (tmp_path / "a/slopes.json").read_bytes() == (tmp_path / "b/slopes.json").read_bytes()
        assert json.loads((tmp_path / "a/slopes.json").read_text())["fits"] == a["fits"]
