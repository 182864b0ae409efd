#include "cvar_reach/model.hpp"

#include <gtest/gtest.h>

#include <stdexcept>

using namespace cvar_reach;

TEST(Pond, OutflowFollowsOrifice) {
    const PondParams p;
    EXPECT_NEAR(pond_outflow(p, 5.0, 1.0), 3.4175126, 1e-6);
    EXPECT_EQ(pond_outflow(p, 5.0, 0.0), 0.0);
    EXPECT_EQ(pond_outflow(p, 0.5, 1.0), 0.0); // below the outlet
    EXPECT_EQ(pond_outflow(p, 1.0, 1.0), 0.0);
}

TEST(Pond, StepValues) {
    const PondParams p;
    EXPECT_NEAR(pond_step(p, 0.0, 0.0, 12.16), 0.128941, 1e-6);
    EXPECT_NEAR(pond_step(p, 1.0, 1.0, 8.57), 1.090874, 1e-6);
    EXPECT_EQ(pond_step(p, 6.45, 0.0, 1000.0), 6.5);
}

TEST(Pond, RejectsBadInputs) {
    const PondParams p;
    EXPECT_THROW(pond_outflow(p, -0.1, 1.0), std::domain_error);
    EXPECT_THROW(pond_outflow(p, 2.0, 0.5), std::domain_error);
    PondParams bad;
    bad.surface_area = 0.0;
    EXPECT_THROW(bad.validate(), std::invalid_argument);
}

TEST(Pond, ControlsListValveOpenFirst) {
    const SystemModel m = load_pond_benchmark();
    ASSERT_EQ(m.controls().size(), 2u);
    EXPECT_EQ(m.controls()[0], 1.0);
    EXPECT_EQ(m.controls()[1], 0.0);
    EXPECT_EQ(m.bounds().lo, 0.0);
    EXPECT_EQ(m.bounds().hi, 6.5);
}

TEST(Disturbance, PresetMoments) {
    const auto d = pond_v1_disturbance();
    EXPECT_EQ(d.size(), 10u);
    double total = 0.0;
    for (double p : d.probs())
        total += p;
    EXPECT_NEAR(total, 1.0, 1e-12);
    EXPECT_NEAR(d.mean(), 12.158728, 1e-6);
    EXPECT_NEAR(d.variance(), 3.226589, 1e-5);
}

TEST(Disturbance, Validation) {
    EXPECT_THROW(DisturbanceDistribution({1, 2}, {0.5, 0.4}), std::invalid_argument);
    EXPECT_THROW(DisturbanceDistribution({1, 2}, {1.2, -0.2}), std::invalid_argument);
    EXPECT_THROW(DisturbanceDistribution({2, 1}, {0.5, 0.5}), std::invalid_argument);
    EXPECT_THROW(DisturbanceDistribution({1}, {0.5, 0.5}), std::invalid_argument);
}

TEST(Disturbance, SampleIndexSkipsEmptyAtoms) {
    const DisturbanceDistribution d({1, 2, 3}, {0.0, 0.5, 0.5});
    EXPECT_EQ(d.sample_index(0.0), 1u);
    EXPECT_EQ(d.sample_index(0.49), 1u);
    EXPECT_EQ(d.sample_index(0.5), 2u);
    EXPECT_EQ(d.sample_index(0.999999), 2u);
}

TEST(Surface, Kinds) {
    const auto lin = SurfaceFunction::linear_offset(5.0);
    EXPECT_EQ(lin(6.5), 1.5);
    EXPECT_TRUE(lin.in_constraint_set(4.9));
    EXPECT_FALSE(lin.in_constraint_set(5.0));
    const auto ind = SurfaceFunction::indicator(5.0);
    EXPECT_EQ(ind(4.0), -0.5);
    EXPECT_EQ(ind(5.0), 0.5);
    const auto tab = SurfaceFunction::tabulated({0, 1, 2}, {-1, 0, 3});
    EXPECT_DOUBLE_EQ(tab(1.5), 1.5);
    EXPECT_EQ(tab(-4), -1.0);
    EXPECT_EQ(tab(9), 3.0);
}

TEST(SystemModel, StepClampsToBounds) {
    const SystemModel m("line", {0.0}, DisturbanceDistribution({-5, 5}, {0.5, 0.5}),
                        [](double x, double, double w) { return x + w; }, {0.0, 3.0});
    EXPECT_EQ(m.step(1.0, 0.0, 5.0), 3.0);
    EXPECT_EQ(m.step(1.0, 0.0, -5.0), 0.0);
}

TEST(Pond, ClampAtTheTop) {
    const PondParams p;
    EXPECT_EQ(pond_step(p, 6.5, 0.0, 16.65), 6.5);
}

TEST(Pond, StepInvariantsOverTheBenchmarkProduct) {
    const PondParams p;
    const auto d = pond_v1_disturbance();
    for (int i = 0; i <= 65; ++i) {
        const double x = 0.1 * i;
        for (double w : d.values()) {
            const double open = pond_step(p, x, 1.0, w);
            const double shut = pond_step(p, x, 0.0, w);
            EXPECT_GE(open, x); // water only rises
            EXPECT_LE(shut, p.state_max);
            EXPECT_LE(open, shut);
        }
    }
}

TEST(Disturbance, MomentsNearTargets) {
    const auto d = pond_v1_disturbance();
    EXPECT_NEAR(d.mean(), 12.16, 0.005);
    EXPECT_NEAR(d.variance(), 3.22, 0.02 * 3.22);
}

TEST(Surface, SignMatchesConstraintSet) {
    const auto lin = SurfaceFunction::linear_offset(5.0);
    const auto ind = SurfaceFunction::indicator(5.0);
    EXPECT_EQ(lin(3.0), -2.0);
    EXPECT_EQ(lin(5.0), 0.0);
    EXPECT_EQ(ind(6.0), 0.5);
    for (int i = 0; i < 1000; ++i) {
        const double x = 6.5 * i / 999.0;
        const bool in_k = x < 5.0;
        EXPECT_EQ(lin(x) < 0.0, in_k);
        EXPECT_EQ(ind(x) < 0.0, in_k);
    }
}
