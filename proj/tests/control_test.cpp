#include <gtest/gtest.h>

#include <random>

#include "fixtures.hpp"
#include "gbmopt/control.hpp"

using namespace gbm;
using gbm::testing::small_config;

namespace {

ControlSet uniform_controls(const RunConfig& cfg, double xi1, double xi2, ControlMode mode = ControlMode::full) {
    ControlSet x = ControlSet::zero(cfg, mode);
    for (auto& f : x.xi1) f = ScalarField(cfg.grid, xi1);
    for (auto& f : x.xi2) f = ScalarField(cfg.grid, xi2);
    return x;
}

}  // namespace

TEST(Control, ZeroControlReproducesBaseModelBitwise) {
    std::mt19937_64 rng(1);
    RunConfig cfg = small_config(10, 0.1, 30, 0.05);
    cfg.u1_init_field = gbm::testing::bump(cfg.grid, 0.1, 0.4, 0.3, 0.6, 0.05);
    const ParamSet th = gbm::testing::random_params(cfg.grid, 31, rng);
    const StateTrajectory a = solve_forward(th, cfg);
    const StateTrajectory b = solve_forward_controlled(th, ControlSet::zero(cfg), cfg);
    EXPECT_EQ(a.u1, b.u1);
    EXPECT_EQ(a.u2, b.u2);
}

TEST(Control, TumourDecayRecurrence) {
    RunConfig cfg = small_config(6, 0.1, 20, 0.1);
    const ParamSet th = ParamSet::uniform(cfg.grid, 21, {0.01, 0, 0, 0, 0, 0}, {});
    const StateTrajectory t = solve_forward_controlled(th, uniform_controls(cfg, 1.0, 0.0), cfg);
    for (double v : t.u1[1].values()) EXPECT_NEAR(v, 0.9 * 0.2, 1e-15);
    for (std::size_t n = 0; n <= 20; ++n)
        for (double v : t.u1[n].values()) EXPECT_NEAR(v, 0.2 * std::pow(0.9, static_cast<double>(n)), 1e-12);
}

TEST(Control, StrongKillLowersMass) {
    std::mt19937_64 rng(2);
    RunConfig cfg = small_config(10, 0.1, 40, 0.05);
    const ParamSet th = gbm::testing::random_params(cfg.grid, 41, rng);
    const double free_mass = integral(solve_forward(th, cfg).final_u1());
    const double kill_mass = integral(solve_forward_controlled(th, uniform_controls(cfg, 10.0, 0.0), cfg).final_u1());
    EXPECT_LT(kill_mass, free_mass);
}

TEST(Control, ProjectionRespectsModeAndBoxes) {
    RunConfig cfg = small_config(4, 0.1, 3, 0.1);
    ControlSet x = uniform_controls(cfg, -2.0, 40.0);
    const ControlSet full = project_controls(x);
    EXPECT_EQ(full.xi1[0][0], 0.0);
    EXPECT_EQ(full.xi2[0][0], 10.0);
    x = uniform_controls(cfg, 3.0, -40.0, ControlMode::ph_only);
    const ControlSet ph = project_controls(x);
    EXPECT_EQ(ph.xi1[1][2], 0.0);
    EXPECT_EQ(ph.xi2[1][2], -10.0);
}

TEST(Control, GradientMatchesFiniteDifferences) {
    std::mt19937_64 rng(3);
    RunConfig cfg = small_config(8, 0.1, 20, 0.05);
    cfg.u1_init_field = gbm::testing::bump(cfg.grid, 0.2, 0.3, 0.4, 0.4, 0.05);
    const ParamSet th = gbm::testing::random_params(cfg.grid, 21, rng);
    const ScalarField target(cfg.grid, 0.2);
    NeutralizationProblem p(th, target, cfg);
    const ControlSet xi = uniform_controls(cfg, 0.5, 0.3);
    const ControlSet g = p.gradient(xi, p.evaluate(xi));
    ControlSet eta = xi;
    for (std::size_t n = 0; n < eta.xi1.size(); ++n) {
        eta.xi1[n] = gbm::testing::smooth_field(cfg.grid, rng);
        eta.xi2[n] = gbm::testing::smooth_field(cfg.grid, rng);
    }
    auto shifted = [&](double e) {
        ControlSet out = xi;
        for (std::size_t n = 0; n < out.xi1.size(); ++n) {
            out.xi1[n].axpy(e, eta.xi1[n]);
            out.xi2[n].axpy(e, eta.xi2[n]);
        }
        return p.cost(p.evaluate(out));
    };
    const double eps = 1e-5;
    const double fd = (shifted(eps) - shifted(-eps)) / (2 * eps);
    const double ad = series_inner(g.xi1, eta.xi1, cfg.time) + series_inner(g.xi2, eta.xi2, cfg.time);
    EXPECT_LE(std::abs(ad - fd), 1e-4 * std::abs(ad));
}

TEST(Neutralize, PhOnlyKeepsTumourControlZero) {
    RunConfig cfg = small_config(8, 0.1, 20, 0.1);
    cfg.max_iters = 5;
    const ParamSet th = initial_params(cfg);
    const NeutralizeResult r = neutralize(th, ScalarField(cfg.grid, 0.15), cfg, ControlMode::ph_only);
    for (const auto& f : r.xi.xi1)
        for (double v : f.values()) EXPECT_EQ(v, 0.0);
    for (std::size_t k = 1; k < r.history.size(); ++k) EXPECT_LT(r.history[k].cost, r.history[k - 1].cost);
}

TEST(Neutralize, MatchedTargetKeepsZeroControl) {
    RunConfig cfg = small_config(8, 0.1, 20, 0.1);
    const ParamSet th = initial_params(cfg);
    const ScalarField target = solve_forward(th, cfg).final_u1();
    cfg.epsilon = 1e-12;
    const NeutralizeResult r = neutralize(th, target, cfg, ControlMode::full);
    EXPECT_EQ(r.accepted, 0u);
    EXPECT_EQ(r.xi, project_controls(ControlSet::zero(cfg)));
}

TEST(Neutralize, ReducesMisfitAndDescends) {
    RunConfig cfg = small_config(8, 0.1, 20, 0.1);
    cfg.max_iters = 20;
    std::mt19937_64 rng(9);
    const ParamSet th = gbm::testing::random_params(cfg.grid, 21, rng);
    const NeutralizeResult r = neutralize(th, default_neutral_target(cfg), cfg, ControlMode::full);
    ASSERT_GE(r.history.size(), 2u);
    for (std::size_t k = 1; k < r.history.size(); ++k) EXPECT_LT(r.history[k].cost, r.history[k - 1].cost);
    EXPECT_LT(r.metrics.e2, r.baseline.e2);
    for (const auto& f : r.xi.xi1) EXPECT_GE(f.min(), 0.0);
}

TEST(Combine, ArithmeticMeanBeforeProjection) {
    const Grid2D g{3, 3, 0.1, 0.1};
    const ParamSet a = ParamSet::uniform(g, 2, {2, 2, 2, 2, 2, 2});
    const ParamSet b = ParamSet::uniform(g, 2, {4, 4, 4, 4, 4, 4});
    const ParamSet m = combine_params(a, b);
    EXPECT_EQ(m[Param::mu][0][0], 3.0);
    EXPECT_EQ(m[Param::alpha][1][4], 3.0);
    EXPECT_EQ(m[Param::sigma][0][0], 0.01);  // clamped
    EXPECT_EQ(combine_params(a, a), project_box(a));
    EXPECT_EQ(combine_params(a, b), combine_params(b, a));
}

TEST(Combine, ConvexCombinationOfInBoxStaysInBox) {
    std::mt19937_64 rng(4);
    const Grid2D g{6, 6, 0.1, 0.1};
    const ParamSet a = gbm::testing::random_params(g, 3, rng);
    const ParamSet b = gbm::testing::random_params(g, 3, rng);
    ParamSet raw = a;
    for (std::size_t c = 0; c < kParamCount; ++c)
        for (std::size_t n = 0; n < 3; ++n) {
            raw.fields[c][n] *= 0.3;
            raw.fields[c][n].axpy(0.7, b.fields[c][n]);
        }
    EXPECT_TRUE(raw.in_box());
    EXPECT_EQ(combine_params({&a, &b}, {0.3, 0.7}), raw);
}

TEST(Combine, ShapeMismatchThrows) {
    const ParamSet a = ParamSet::uniform(Grid2D{3, 3, 0.1, 0.1}, 2, {});
    const ParamSet b = ParamSet::uniform(Grid2D{4, 3, 0.1, 0.1}, 2, {});
    EXPECT_THROW(combine_params(a, b), Error);
    EXPECT_THROW(combine_params({&a}, {0.5, 0.5}), Error);
}

TEST(Combine, ControlsMean) {
    RunConfig cfg = small_config(4, 0.1, 3, 0.1);
    const ControlSet z = ControlSet::zero(cfg);
    EXPECT_EQ(combine_controls(z, z), z);
    const ControlSet a = uniform_controls(cfg, 1.0, -2.0);
    const ControlSet b = uniform_controls(cfg, 3.0, 4.0);
    const ControlSet m = combine_controls(a, b);
    EXPECT_EQ(m.xi1[2][5], 2.0);
    EXPECT_EQ(m.xi2[0][0], 1.0);
    for (const auto& f : m.xi1) EXPECT_GE(f.min(), 0.0);
}
