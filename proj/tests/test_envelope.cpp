#include "cvar_reach/envelope.hpp"
#include "cvar_reach/simplex.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace cvar_reach;

namespace {

PiecewiseLinear random_concave_curve(std::mt19937_64& gen) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<Breakpoint> pts = {{0.0, 0.0}};
    for (double t : {0.05, 0.2, 0.35, 0.5, 0.65, 0.8, 1.0})
        pts.push_back({t, t * (1.0 + 4.0 * u(gen))});
    return PiecewiseLinear(concave_envelope_repair(pts));
}

InnerProblem random_problem(std::mt19937_64& gen, std::size_t w, double y) {
    std::uniform_real_distribution<double> u(0.1, 1.0);
    InnerProblem p;
    p.envelope.y = y;
    double total = 0.0;
    for (std::size_t j = 0; j < w; ++j) {
        p.envelope.probs.push_back(u(gen));
        total += p.envelope.probs.back();
    }
    for (double& q : p.envelope.probs)
        q /= total;
    for (std::size_t j = 0; j < w; ++j)
        p.curves.push_back(random_concave_curve(gen));
    return p;
}

} // namespace

TEST(Simplex, TextbookProblem) {
    lp::Problem p;
    p.objective = {3.0, 5.0};
    p.constraints = {{{1.0, 0.0}, lp::Relation::less_equal, 4.0},
                     {{0.0, 2.0}, lp::Relation::less_equal, 12.0},
                     {{3.0, 2.0}, lp::Relation::less_equal, 18.0}};
    const auto r = lp::maximize(p);
    ASSERT_EQ(r.status, lp::Status::optimal);
    EXPECT_NEAR(r.objective, 36.0, 1e-9);
    EXPECT_NEAR(r.x[0], 2.0, 1e-9);
    EXPECT_NEAR(r.x[1], 6.0, 1e-9);
}

TEST(Simplex, DetectsInfeasibleAndUnbounded) {
    lp::Problem infeasible;
    infeasible.objective = {1.0};
    infeasible.constraints = {{{1.0}, lp::Relation::less_equal, 1.0}, {{1.0}, lp::Relation::greater_equal, 2.0}};
    EXPECT_EQ(lp::maximize(infeasible).status, lp::Status::infeasible);
    lp::Problem unbounded;
    unbounded.objective = {1.0, 0.0};
    unbounded.constraints = {{{0.0, 1.0}, lp::Relation::less_equal, 1.0}};
    EXPECT_EQ(lp::maximize(unbounded).status, lp::Status::unbounded);
}

TEST(EnvelopeSolver, GreedyMatchesLp) {
    std::mt19937_64 gen(11);
    std::uniform_real_distribution<double> y(0.01, 1.0);
    for (int trial = 0; trial < 100; ++trial) {
        const InnerProblem p = random_problem(gen, 2 + trial % 4, y(gen));
        const auto greedy = solve_inner(p);
        const auto lp = solve_inner_lp(p);
        EXPECT_NEAR(greedy.optimal_value, lp.optimal_value, 1e-8 * std::max(1.0, lp.optimal_value));
        EXPECT_NEAR(inner_objective(p, greedy.t_star), greedy.optimal_value, 1e-10);
        // the maximizer is a feasible reweighting
        double budget = 0.0;
        for (std::size_t j = 0; j < p.curves.size(); ++j) {
            budget += p.envelope.probs[j] * greedy.t_star[j];
            EXPECT_GE(greedy.t_star[j], -1e-12);
            EXPECT_LE(greedy.t_star[j], 1.0 + 1e-12);
            EXPECT_NEAR(greedy.r_star[j], greedy.t_star[j] / p.envelope.y, 1e-12);
        }
        EXPECT_NEAR(budget, p.envelope.y, 1e-12);
    }
}

TEST(EnvelopeSolver, FullConfidenceIsTheExpectation) {
    std::mt19937_64 gen(5);
    const InnerProblem p = random_problem(gen, 3, 1.0);
    const auto s = solve_inner(p);
    double mean = 0.0;
    for (std::size_t j = 0; j < 3; ++j) {
        EXPECT_NEAR(s.r_star[j], 1.0, 1e-12);
        mean += p.envelope.probs[j] * p.curves[j](1.0);
    }
    EXPECT_NEAR(s.optimal_value, mean, 1e-12);
}

TEST(EnvelopeSolver, SmallConfidenceLoadsTheWorstSuccessor) {
    // linear curves t -> t v_j; the optimum puts all of y on the largest v_j
    InnerProblem p;
    p.envelope.y = 0.1;
    p.envelope.probs = {0.5, 0.3, 0.2};
    for (double v : {1.0, 3.0, 2.0})
        p.curves.emplace_back(std::vector<Breakpoint>{{0.0, 0.0}, {1.0, v}});
    const auto s = solve_inner(p);
    EXPECT_NEAR(s.optimal_value, 3.0, 1e-12);
    EXPECT_NEAR(s.r_star[1], 1.0 / 0.3, 1e-12);
    EXPECT_NEAR(s.r_star[0], 0.0, 1e-12);
}

TEST(PiecewiseLinear, EvaluatesAndClamps) {
    const PiecewiseLinear f({{0.0, 0.0}, {0.5, 1.0}, {1.0, 1.5}});
    EXPECT_DOUBLE_EQ(f(0.25), 0.5);
    EXPECT_DOUBLE_EQ(f(0.75), 1.25);
    EXPECT_EQ(f(2.0), 1.5);
    EXPECT_TRUE(f.is_concave());
    EXPECT_FALSE(PiecewiseLinear({{0.0, 0.0}, {0.5, 0.1}, {1.0, 1.0}}).is_concave());
}

namespace {

InnerProblem constant_value_problem(double y) {
    static const auto grid = std::make_shared<const AugmentedGrid>(std::vector<double>{0.0, 1.0},
                                                                   std::vector<double>{0.001, 0.5, 0.999});
    static const ValueTable next = [] {
        ValueTable t(grid, 1);
        for (std::size_t l = 0; l < 3; ++l) {
            t.at(0, l) = 4.0;
            t.at(1, l) = 2.0;
        }
        return t;
    }();
    const Successor succ[] = {{0.0, 0.5}, {1.0, 0.5}};
    return build_inner_problem(succ, y, next);
}

} // namespace

TEST(EnvelopeSolver, ConstantValuesAtFullConfidence) {
    const auto s = solve_inner(constant_value_problem(1.0));
    EXPECT_NEAR(s.optimal_value, 3.0, 1e-12);
    EXPECT_NEAR(s.r_star[0], 1.0, 1e-12);
    EXPECT_NEAR(s.r_star[1], 1.0, 1e-12);
}

TEST(EnvelopeSolver, ConstantValuesAtHalfConfidence) {
    const InnerProblem p = constant_value_problem(0.5);
    const auto s = solve_inner(p);
    EXPECT_NEAR(s.optimal_value, 4.0, 1e-9);
    // brute force over R_1 in steps of 1e-3, R_2 fixed by E[R] = 1
    double best = -1.0;
    for (int i = 0; i <= 2000; ++i) {
        const double r1 = i * 1e-3;
        const double t[] = {0.5 * r1, 0.5 * (2.0 - r1)};
        if (t[0] > 1.0 || t[1] > 1.0)
            continue;
        best = std::max(best, inner_objective(p, t));
    }
    EXPECT_NEAR(s.optimal_value, best, 5e-3);
}

TEST(EnvelopeSolver, BeatsRiskNeutralPointAndMonotoneInConfidence) {
    for (int trial = 0; trial < 50; ++trial) {
        double prev = std::numeric_limits<double>::infinity();
        for (double y : {0.01, 0.1, 0.3, 0.6, 0.9, 1.0}) {
            std::mt19937_64 same(static_cast<std::uint64_t>(trial));
            const InnerProblem p = random_problem(same, 3, y);
            const auto s = solve_inner(p);
            const std::vector<double> neutral(3, y);
            EXPECT_GE(s.optimal_value, inner_objective(p, neutral) - 1e-12);
            EXPECT_LE(s.optimal_value, prev + 1e-12);
            prev = s.optimal_value;
            double mean_r = 0.0;
            for (std::size_t j = 0; j < 3; ++j) {
                mean_r += p.envelope.probs[j] * s.r_star[j];
                EXPECT_LE(s.r_star[j], 1.0 / y + 1e-12);
            }
            EXPECT_NEAR(mean_r, 1.0, 1e-8);
        }
    }
}
