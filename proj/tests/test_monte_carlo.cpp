#include "cvar_reach/monte_carlo.hpp"
#include "cvar_reach/validation/oracles.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

using namespace cvar_reach;

namespace {

std::shared_ptr<const AugmentedGrid> coarse_pond_grid() {
    return std::make_shared<const AugmentedGrid>(AugmentedGrid::uniform_states(0.0, 6.5, 0.5),
                                                 AugmentedGrid::pond_confidence_levels());
}

McGridOptions small_run(std::size_t samples, unsigned threads) {
    McGridOptions o;
    o.run.samples = samples;
    o.run.bootstrap_resamples = 30;
    o.run.threads = threads;
    return o;
}

} // namespace

TEST(MonteCarlo, TrajectoryIsReproducible) {
    const SystemModel pond = load_pond_benchmark();
    const auto open = RolloutPolicy::fixed_control(1.0);
    const TrajectoryStream s{CounterRng(17), 4, 123};
    const auto a = simulate_trajectory(pond, open, 2.0, 1.0, 48, s);
    const auto b = simulate_trajectory(pond, open, 2.0, 1.0, 48, s);
    EXPECT_EQ(a, b);
    ASSERT_EQ(a.size(), 49u);
    const auto other = simulate_trajectory(pond, open, 2.0, 1.0, 48, TrajectoryStream{CounterRng(17), 4, 124});
    EXPECT_NE(a, other);
    EXPECT_THROW(simulate_trajectory(pond, open, 7.0, 1.0, 48, s), std::domain_error);
    EXPECT_THROW(simulate_trajectory(pond, RolloutPolicy::fixed_control(0.5), 1.0, 1.0, 48, s),
                 std::invalid_argument);
}

TEST(MonteCarlo, DeterministicSystemGivesExactWorstValue) {
    // one disturbance atom: every trajectory is the same ramp 0, 1, 2, 3
    const SystemModel ramp("ramp", {0.0}, DisturbanceDistribution({1.0}, {1.0}),
                           [](double x, double, double w) { return x + w; }, {0.0, 10.0});
    McRunConfig cfg;
    cfg.samples = 200;
    cfg.horizon = 3;
    cfg.jitter_sigma = 0.0;
    cfg.bootstrap_resamples = 20;
    const auto g = SurfaceFunction::linear_offset(2.5);
    const auto e = estimate_W0(ramp, RolloutPolicy::fixed_control(0.0), g, 0.0, 0.2, cfg);
    EXPECT_DOUBLE_EQ(e.value, 0.5);
    EXPECT_EQ(e.standard_error, 0.0);
    StageCostSpec spec;
    spec.beta = 1.0;
    spec.m = 1.0;
    spec.surface = g;
    const double total = std::exp(-2.5) + std::exp(-1.5) + std::exp(-0.5) + std::exp(0.5);
    EXPECT_NEAR(estimate_J0star(ramp, RolloutPolicy::fixed_control(0.0), spec, 0.0, 0.7, cfg).value, total, 1e-12);
}

TEST(MonteCarlo, GridEstimatesIgnoreThreadCount) {
    const SystemModel pond = load_pond_benchmark();
    const auto grid = coarse_pond_grid();
    const std::vector<double> alphas = {0.999, 0.5, 0.05};
    const auto a = estimate_grid(pond, RolloutPolicy::fixed_control(1.0), StageCostSpec{}, grid, alphas, small_run(300, 1));
    const auto b = estimate_grid(pond, RolloutPolicy::fixed_control(1.0), StageCostSpec{}, grid, alphas, small_run(300, 3));
    for (std::size_t n = 0; n < a.w0.size(); ++n) {
        EXPECT_EQ(a.w0[n].value, b.w0[n].value);
        EXPECT_EQ(a.w0[n].standard_error, b.w0[n].standard_error);
        EXPECT_EQ(a.j0[n].value, b.j0[n].value);
        EXPECT_EQ(a.exit_frequency[n], b.exit_frequency[n]);
    }
}

TEST(MonteCarlo, SharedSamplesMakeEstimatesMonotoneInAlpha) {
    const SystemModel pond = load_pond_benchmark();
    const auto grid = coarse_pond_grid();
    const std::vector<double> alphas = {0.999, 0.8, 0.5, 0.2, 0.05};
    const auto r = estimate_grid(pond, RolloutPolicy::fixed_control(1.0), StageCostSpec{}, grid, alphas, small_run(500, 0));
    for (std::size_t i = 0; i < grid->num_states(); ++i)
        for (std::size_t a = 0; a + 1 < alphas.size(); ++a) {
            EXPECT_LE(r.w0[r.index(i, a)].value, r.w0[r.index(i, a + 1)].value + 1e-9);
            EXPECT_LE(r.j0[r.index(i, a)].value, r.j0[r.index(i, a + 1)].value * (1.0 + 1e-9));
        }
}

TEST(MonteCarlo, TablePolicyDrivesRollouts) {
    const SystemModel pond = load_pond_benchmark();
    const auto grid = coarse_pond_grid();
    const auto vi = run_value_iteration(pond, grid, StageCostSpec{}, 48);
    const auto table = std::make_shared<const PolicyTable>(vi.policy);
    const auto policy = RolloutPolicy::table(table);
    EXPECT_TRUE(policy.depends_on_confidence());
    const auto r = estimate_grid(pond, policy, StageCostSpec{}, grid, {0.999, 0.05}, small_run(50, 0));
    EXPECT_EQ(r.w0.size(), 2 * grid->num_states());
    // the greedy policy opens the valve above the outlet, and below it the two
    // controls coincide, so on a shared stream the trajectories are the open-valve ones
    McRunConfig cfg;
    cfg.samples = 200;
    const auto g = SurfaceFunction::linear_offset(5.0);
    for (double x : {0.0, 1.5, 4.0})
        for (double a : {0.999, 0.2}) {
            const auto t = sample_costs(pond, policy, g, nullptr, x, a, cfg, 7);
            const auto o = sample_costs(pond, RolloutPolicy::fixed_control(1.0), g, nullptr, x, a, cfg, 7);
            EXPECT_EQ(t.max_surface, o.max_surface);
        }
    EXPECT_THROW(RolloutPolicy::table(nullptr), std::invalid_argument);
}

TEST(MonteCarlo, CsvRoundTrip) {
    const SystemModel pond = load_pond_benchmark();
    const auto grid = coarse_pond_grid();
    const auto r = estimate_grid(pond, RolloutPolicy::fixed_control(1.0), StageCostSpec{}, grid, {0.5}, small_run(100, 0));
    const auto path = std::filesystem::temp_directory_path() / "cvar_reach_mc_roundtrip.csv";
    write_mc_csv(path, r, false);
    const auto rows = read_mc_csv(path);
    ASSERT_EQ(rows.size(), grid->num_states());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        EXPECT_EQ(rows[i].x, grid->states()[i]);
        EXPECT_EQ(rows[i].estimate, r.w0[i].value);
        EXPECT_EQ(rows[i].standard_error, r.w0[i].standard_error);
        EXPECT_EQ(rows[i].samples, 100u);
    }
    std::filesystem::remove(path);
}

TEST(MonteCarlo, SingleAtomPondMatchesHandRollout) {
    const PondParams p;
    const SystemModel pond = make_pond_model(p, DisturbanceDistribution({12.16}, {1.0}));
    const auto states = simulate_trajectory(pond, RolloutPolicy::fixed_control(1.0), 0.3, 1.0, 48,
                                            TrajectoryStream{CounterRng(1), 0, 0});
    double x = 0.3;
    EXPECT_EQ(states[0], x);
    for (int k = 1; k <= 48; ++k) {
        x = pond_step(p, x, 1.0, 12.16);
        EXPECT_EQ(states[static_cast<std::size_t>(k)], x);
    }
    const auto single = simulate_trajectory(pond, RolloutPolicy::fixed_control(1.0), 0.3, 1.0, 0,
                                            TrajectoryStream{CounterRng(1), 0, 0});
    EXPECT_EQ(single, std::vector<double>{0.3});
}

TEST(MonteCarlo, PondTrajectoriesRise) {
    const SystemModel pond = load_pond_benchmark();
    for (std::uint64_t s = 0; s < 50; ++s) {
        const auto xs = simulate_trajectory(pond, RolloutPolicy::fixed_control(1.0), 1.7, 1.0, 48,
                                            TrajectoryStream{CounterRng(9), 0, s});
        EXPECT_TRUE(std::is_sorted(xs.begin(), xs.end()));
    }
}

TEST(MonteCarlo, PondTopStateAndMeanLimit) {
    const SystemModel pond = load_pond_benchmark();
    McRunConfig cfg;
    cfg.samples = 2000;
    cfg.bootstrap_resamples = 100;
    const auto g = SurfaceFunction::linear_offset(5.0);
    const auto open = RolloutPolicy::fixed_control(1.0);
    for (double a : {0.999, 0.5, 0.001})
        EXPECT_NEAR(estimate_W0(pond, open, g, 6.5, a, cfg).value, 1.5, 1e-9);
    const auto s = sample_costs(pond, open, g, nullptr, 3.0, 1.0, cfg, 0);
    double mean = 0.0;
    for (double v : s.max_surface)
        mean += v / static_cast<double>(s.max_surface.size());
    const auto e = estimate_W0(pond, open, g, 3.0, 1.0, cfg);
    EXPECT_NEAR(e.value, mean, 3.0 * e.standard_error + 1e-9);
}

TEST(MonteCarlo, ZeroHorizonCostIsTheStageCost) {
    const SystemModel pond = load_pond_benchmark();
    McRunConfig cfg;
    cfg.samples = 50;
    cfg.horizon = 0;
    cfg.jitter_sigma = 0.0;
    cfg.bootstrap_resamples = 10;
    const StageCostSpec spec;
    EXPECT_DOUBLE_EQ(estimate_J0star(pond, RolloutPolicy::fixed_control(1.0), spec, 5.7, 0.3, cfg).value,
                     stage_cost(spec, 5.7));
}

TEST(MonteCarlo, RiskNeutralCostMatchesExpectationDp) {
    // the G_s spacing of 0.1 overstates E[sum c] near x = 0 through linear
    // interpolation of the exponential cost, so the oracle runs on a fine mesh
    const SystemModel pond = load_pond_benchmark();
    const StageCostSpec spec;
    const auto fine = AugmentedGrid::uniform_states(0.0, 6.5, 0.002);
    const double oracle = validation::expectation_dp(pond, spec, fine, 48).front();
    McRunConfig cfg;
    cfg.samples = 100000;
    cfg.jitter_sigma = 1e-7;
    const auto e = estimate_J0star(pond, RolloutPolicy::fixed_control(1.0), spec, 0.0, 0.999, cfg);
    EXPECT_NEAR(e.value, oracle, 3.0 * e.standard_error);
}
