#include "cvar_reach/safe_sets.hpp"
#include "cvar_reach/validation/toy_chains.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace cvar_reach;

namespace {

SafeSetGrid make_set(SetSource source, double alpha, double r, std::vector<bool> members,
                     std::vector<double> margins = {}) {
    SafeSetGrid s;
    s.alpha = alpha;
    s.r = r;
    s.source = source;
    for (std::size_t i = 0; i < members.size(); ++i)
        s.states.push_back(static_cast<double>(i));
    s.membership = std::move(members);
    s.statistic.assign(s.states.size(), 0.0);
    s.boundary_margin = margins.empty() ? std::vector<double>(s.states.size(), 10.0) : std::move(margins);
    return s;
}

} // namespace

TEST(SafeSets, ExtractUThresholdsInLogSpace) {
    const auto grid = std::make_shared<const AugmentedGrid>(std::vector<double>{0.0, 1.0, 2.0},
                                                            std::vector<double>{0.5, 1.0});
    ValueTable J(grid, 0);
    const StageCostSpec spec; // beta 1e-3, m 10
    const double level = 1e-3 * std::exp(10.0 * 0.25);
    J.at(0, 1) = 0.5 * level;
    J.at(1, 1) = level;
    J.at(2, 1) = 2.0 * level;
    const auto U = extract_U(J, spec, 1.0, 0.25);
    EXPECT_TRUE(U.membership[0]);
    EXPECT_TRUE(U.membership[1]); // on the threshold counts as inside
    EXPECT_FALSE(U.membership[2]);
    EXPECT_EQ(U.count(), 2u);
    EXPECT_NEAR(U.boundary_margin[0], std::log(2.0), 1e-12);
    EXPECT_THROW(extract_U(J, spec, 0.7, 0.25), std::invalid_argument);
}

TEST(SafeSets, InclusionReportsOnlyConfidentViolations) {
    const auto U = make_set(SetSource::value_iteration, 0.5, 0.0, {true, true, true, false});
    const auto S = make_set(SetSource::monte_carlo, 0.5, 0.0, {true, false, false, false}, {5.0, -1.0, -4.0, -9.0});
    const auto rep = check_inclusion(U, S, 3.0);
    EXPECT_FALSE(rep.pass);
    EXPECT_EQ(rep.banded, 1u);
    ASSERT_EQ(rep.violations.size(), 1u);
    EXPECT_EQ(rep.violations[0].x, 2.0);
    const auto other = make_set(SetSource::monte_carlo, 0.2, 0.0, {true, true, true, true});
    EXPECT_THROW(check_inclusion(U, other, 3.0), std::invalid_argument);
}

TEST(SafeSets, NestingInAlphaAndRisk) {
    std::vector<SafeSetGrid> sets = {
        make_set(SetSource::value_iteration, 0.9, 0.5, {true, true, false}),
        make_set(SetSource::value_iteration, 0.5, 0.5, {true, false, false}),
        make_set(SetSource::value_iteration, 0.9, 0.0, {true, false, false}),
    };
    EXPECT_TRUE(check_nesting(sets, 0.0).pass);
    sets[1].membership = {true, false, true}; // smaller alpha, bigger set
    const auto rep = check_nesting(sets, 0.0);
    EXPECT_FALSE(rep.pass);
    EXPECT_FALSE(rep.violations.empty());
}

TEST(SafeSets, ProbabilityDpOnAKnownChain) {
    // from 0 the walk moves up one state with probability 0.3 per step; K = {x < 2}
    const SystemModel walk("walk", {0.0}, DisturbanceDistribution({0.0, 1.0}, {0.7, 0.3}),
                           [](double x, double, double w) { return x + w; }, {0.0, 2.0});
    const std::vector<double> states = {0.0, 1.0, 2.0};
    const auto t = prob_safety_dp(walk, SurfaceFunction::indicator(2.0), states, 2);
    EXPECT_NEAR(t.safety.front()[0], 0.7 + 0.3 * 0.7, 1e-12); // leaves only by two steps up
    EXPECT_NEAR(t.safety.front()[1], 0.7 * 0.7, 1e-12);     // stays put twice
    EXPECT_EQ(t.safety.front()[2], 0.0);
    EXPECT_NEAR(t.violation(1), 0.51, 1e-12);
}

TEST(SafeSets, SetsCsvOrdering) {
    const auto grid = std::make_shared<const AugmentedGrid>(std::vector<double>{0.0, 1.0},
                                                            std::vector<double>{0.5, 1.0});
    McGridResult mc;
    mc.grid = grid;
    mc.alphas = {1.0, 0.5};
    mc.w0.resize(4);
    for (auto& e : mc.w0)
        e.sample_count = 1;
    mc.j0.resize(4);
    mc.exit_frequency.assign(4, 0.0);
    ValueTable J(grid, 0);
    std::vector<SafeSetGrid> U, S;
    for (double a : mc.alphas)
        for (double r : {0.0, -0.5}) {
            U.push_back(extract_U(J, StageCostSpec{}, a, r));
            S.push_back(extract_S_mc(mc, a, r));
        }
    const auto rows = sets_rows(U, S, mc);
    ASSERT_EQ(rows.size(), 8u);
    EXPECT_EQ(rows[0].x, 0.0);
    EXPECT_EQ(rows[0].alpha, 1.0);
    EXPECT_EQ(rows[0].r, -0.5);
    EXPECT_EQ(rows[1].r, 0.0);
    EXPECT_EQ(rows[2].alpha, 0.5);
    EXPECT_EQ(rows[4].x, 1.0);
}

TEST(SafeSets, ExtremeRiskLevels) {
    const auto grid = std::make_shared<const AugmentedGrid>(std::vector<double>{0.0, 1.0, 2.0},
                                                            std::vector<double>{0.5, 1.0});
    ValueTable J(grid, 0);
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t l = 0; l < 2; ++l)
            J.at(i, l) = 1e30;
    EXPECT_EQ(extract_U(J, StageCostSpec{}, 0.5, 1e3).count(), 3u);

    // deterministic toy with max g = -1 along every trajectory
    const SystemModel flat("flat", {0.0}, DisturbanceDistribution({0.0}, {1.0}),
                           [](double x, double, double) { return x; }, {0.0, 2.0});
    StageCostSpec spec;
    spec.surface = SurfaceFunction::tabulated({0.0, 2.0}, {-1.0, -1.0});
    McGridOptions o;
    o.run.samples = 20;
    o.run.horizon = 3;
    o.run.bootstrap_resamples = 5;
    const auto mc = estimate_grid(flat, RolloutPolicy::fixed_control(0.0), spec, grid, {0.5, 1.0}, o);
    EXPECT_EQ(extract_S_mc(mc, 0.5, 0.0).count(), 3u);
    EXPECT_EQ(extract_S_mc(mc, 0.5, -1.5).count(), 0u);
    EXPECT_THROW(extract_S_mc(mc, 0.25, 0.0), std::invalid_argument);
}

TEST(SafeSets, TrivialInclusionAndNesting) {
    const auto empty = make_set(SetSource::value_iteration, 0.5, 0.0, {false, false});
    const auto partial = make_set(SetSource::monte_carlo, 0.5, 0.0, {true, false});
    const auto full = make_set(SetSource::monte_carlo, 0.5, 0.0, {true, true});
    const auto u = make_set(SetSource::value_iteration, 0.5, 0.0, {true, true});
    EXPECT_TRUE(check_inclusion(empty, partial, 3.0).pass);
    EXPECT_TRUE(check_inclusion(u, full, 3.0).pass);
    const SafeSetGrid one[] = {partial};
    EXPECT_TRUE(check_nesting(one, 3.0).pass);
}

TEST(SafeSets, ProbabilityDpEdgeCases) {
    const SystemModel stay("stay", {0.0}, DisturbanceDistribution({0.0}, {1.0}),
                           [](double x, double, double) { return x; }, {0.0, 2.0});
    const std::vector<double> states = {0.0, 1.0, 2.0};
    const auto t = prob_safety_dp(stay, SurfaceFunction::indicator(1.5), states, 4);
    EXPECT_EQ(t.violation(0), 0.0); // absorbing inside K
    EXPECT_EQ(t.violation(2), 1.0); // starts outside K
}

TEST(SafeSets, SpecialCaseTrivialEpsilons) {
    const SystemModel pond = load_pond_benchmark();
    const auto states = AugmentedGrid::uniform_states(0.0, 6.5, 0.5);
    McRunConfig cfg;
    cfg.samples = 500;
    cfg.bootstrap_resamples = 20;
    const auto all = special_case_equivalence(pond, 5.0, states, 1.0, RolloutPolicy::fixed_control(1.0), cfg);
    EXPECT_TRUE(all.pass);
    for (std::size_t i = 0; i < states.size(); ++i) {
        EXPECT_TRUE(all.in_dp[i]);
        EXPECT_TRUE(all.in_risk[i]);
    }

    // water never rises: everything below the constraint stays safe, the rest never is
    const SystemModel still("still", {0.0}, DisturbanceDistribution({0.0}, {1.0}),
                            [](double x, double, double) { return x; }, {0.0, 6.5});
    const auto none = special_case_equivalence(still, 5.0, states, 0.0, RolloutPolicy::fixed_control(0.0), cfg);
    EXPECT_TRUE(none.pass);
    for (std::size_t i = 0; i < states.size(); ++i) {
        EXPECT_EQ(none.in_dp[i], states[i] < 5.0);
        EXPECT_EQ(none.in_risk[i], states[i] < 5.0);
    }
}

TEST(SafeSets, PondViolationProbabilityMatchesExitFrequency) {
    // interpolation of the indicator across G_s smears the probability near
    // x = 0, so the DP runs on a fine mesh for this comparison
    const SystemModel pond = load_pond_benchmark();
    const auto fine = AugmentedGrid::uniform_states(0.0, 6.5, 0.002);
    const auto dp = prob_safety_dp(pond, SurfaceFunction::indicator(5.0), fine, 48);
    McRunConfig cfg;
    cfg.samples = 20000;
    for (double x : {0.0, 1.0, 2.5, 4.0}) {
        const std::size_t i = static_cast<std::size_t>(std::lround(x / 0.002));
        const auto s = sample_costs(pond, RolloutPolicy::fixed_control(1.0), SurfaceFunction::indicator(5.0),
                                    nullptr, x, 1.0, cfg, 0);
        const double p = static_cast<double>(s.exits) / static_cast<double>(cfg.samples);
        const double se = std::sqrt(std::max(p * (1.0 - p), 1e-6) / static_cast<double>(cfg.samples));
        EXPECT_NEAR(dp.violation(i), p, 3.0 * se) << "x = " << x;
    }
}

TEST(SafeSets, PondGapShrinksWithExponent) {
    const SystemModel pond = load_pond_benchmark();
    const auto grid = std::make_shared<const AugmentedGrid>(AugmentedGrid::uniform_states(0.0, 6.5, 0.1),
                                                            AugmentedGrid::pond_confidence_levels());
    McGridOptions o;
    o.run.samples = 5000;
    o.run.bootstrap_resamples = 50;
    o.with_j0 = false;
    const std::vector<double> alphas = {0.999, 0.5};
    const auto mc = estimate_grid(pond, RolloutPolicy::fixed_control(1.0), StageCostSpec{}, grid, alphas, o);
    auto gap = [&](double m) {
        StageCostSpec spec;
        spec.m = m;
        const auto vi = run_value_iteration(pond, grid, spec, 48);
        std::size_t n = 0;
        for (double a : alphas) {
            const auto U = extract_U(vi.J0(), spec, a, 0.0);
            const auto S = extract_S_mc(mc, a, 0.0);
            for (std::size_t i = 0; i < U.states.size(); ++i)
                n += S.membership[i] && !U.membership[i];
        }
        return n;
    };
    EXPECT_LE(gap(10.0), gap(3.0));
}

TEST(SafeSets, PondNestingAndInclusionOnALattice) {
    const SystemModel pond = load_pond_benchmark();
    const auto grid = std::make_shared<const AugmentedGrid>(AugmentedGrid::uniform_states(0.0, 6.5, 0.1),
                                                            AugmentedGrid::pond_confidence_levels());
    const StageCostSpec spec;
    const auto vi = run_value_iteration(pond, grid, spec, 48);
    McGridOptions o;
    o.run.samples = 5000;
    o.run.bootstrap_resamples = 50;
    o.with_j0 = false;
    const std::vector<double> alphas = {0.999, 0.5, 0.05};
    const auto mc = estimate_grid(pond, RolloutPolicy::fixed_control(1.0), spec, grid, alphas, o);
    std::vector<SafeSetGrid> U, S;
    for (double a : alphas)
        for (double r : {-0.25, 0.0, 0.25, 1.0, 1.5}) {
            U.push_back(extract_U(vi.J0(), spec, a, r));
            S.push_back(extract_S_mc(mc, a, r));
            EXPECT_TRUE(check_inclusion(U.back(), S.back(), 3.0).pass) << "alpha " << a << " r " << r;
        }
    EXPECT_TRUE(check_nesting(U, 0.0).pass);
    EXPECT_TRUE(check_nesting(S, 3.0).pass);
    // W0 never exceeds g(6.5) = 1.5, so r = 1.5 admits every state
    EXPECT_EQ(extract_S_mc(mc, 0.999, 1.5).count(), grid->num_states());
}
