#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "fixtures.hpp"
#include "gbmopt/adjoint.hpp"
#include "gbmopt/optimizer.hpp"

using namespace gbm;
using gbm::testing::small_config;

namespace {

struct Fixture {
    RunConfig cfg;
    ParamSet theta;
    StateTrajectory traj;
};

Fixture make_fixture(unsigned seed) {
    std::mt19937_64 rng(seed);
    Fixture f{small_config(10, 0.1, 20, 0.05), {}, {}};
    f.cfg.u1_init_field = gbm::testing::bump(f.cfg.grid, 0.2, 0.3, 0.5, 0.4, 0.05);
    f.theta = gbm::testing::random_params(f.cfg.grid, 21, rng);
    f.traj = solve_forward(f.theta, f.cfg);
    return f;
}

}  // namespace

TEST(Adjoint, ZeroTerminalDataStaysZero) {
    const Fixture f = make_fixture(1);
    const AdjointTrajectory a = solve_adjoint(f.traj, f.theta, f.traj.final_u1(), f.cfg);
    for (std::size_t n = 0; n < a.p1.size(); ++n) {
        for (double v : a.p1[n].values()) EXPECT_EQ(v, 0.0);
        for (double v : a.p2[n].values()) EXPECT_EQ(v, 0.0);
    }
}

TEST(Adjoint, TerminalData) {
    const Fixture f = make_fixture(2);
    const ScalarField target(f.cfg.grid, 0.3);
    const AdjointTrajectory a = solve_adjoint(f.traj, f.theta, target, f.cfg);
    EXPECT_EQ(a.p1.back(), f.traj.final_u1() - target);
    for (double v : a.p2.back().values()) EXPECT_EQ(v, 0.0);
}

TEST(Adjoint, ZeroStepsHoldsOnlyTerminalData) {
    RunConfig cfg = small_config(5, 0.1, 0, 0.1);
    const ParamSet th = project_box(ParamSet::uniform(cfg.grid, 1, cfg.theta_init));
    const StateTrajectory t = solve_forward(th, cfg);
    const AdjointTrajectory a = solve_adjoint(t, th, ScalarField(cfg.grid, 0.5), cfg);
    ASSERT_EQ(a.p1.size(), 1u);
    for (double v : a.p1[0].values()) EXPECT_NEAR(v, -0.3, 1e-15);
}

TEST(Adjoint, AcidMultiplierDecayRecurrence) {
    RunConfig cfg = small_config(6, 0.1, 10, 0.1);
    const ParamSet th = ParamSet::uniform(cfg.grid, 11, {0.01, 0, 0, 1, 0, 0}, {});
    const ScalarField u(cfg.grid, 0.2), w(cfg.grid, 0.5);
    const ParamSlice s = ParamSlice::at(th, 0);
    const AdjointPair p = step_adjoint(ScalarField(cfg.grid), ScalarField(cfg.grid, 2.0), u, w, s, cfg);
    for (double v : p.p2.values()) EXPECT_NEAR(v, 2.0 * 0.9, 1e-15);
    for (double v : p.p1.values()) EXPECT_EQ(v, 0.0);
    const StateTrajectory t = solve_forward(th, cfg);
    const AdjointTrajectory a = solve_adjoint(t, th, ScalarField(cfg.grid, 0.2), cfg);
    for (const auto& f : a.p2)
        for (double v : f.values()) EXPECT_EQ(v, 0.0);
}

TEST(Adjoint, LinearInTerminalResidual) {
    const Fixture f = make_fixture(3);
    const ScalarField o1 = gbm::testing::bump(f.cfg.grid, 0.1, 0.2, 0.3, 0.6, 0.1);
    const ScalarField r = f.traj.final_u1() - o1;
    const ScalarField o2 = f.traj.final_u1() - 2.0 * r;
    const AdjointTrajectory a = solve_adjoint(f.traj, f.theta, o1, f.cfg);
    const AdjointTrajectory b = solve_adjoint(f.traj, f.theta, o2, f.cfg);
    for (std::size_t n = 0; n < a.p1.size(); ++n)
        for (std::size_t k = 0; k < a.p1[n].size(); ++k) {
            EXPECT_NEAR(b.p1[n][k], 2.0 * a.p1[n][k], 1e-13 * (1.0 + std::abs(a.p1[n][k])));
            EXPECT_NEAR(b.p2[n][k], 2.0 * a.p2[n][k], 1e-13 * (1.0 + std::abs(a.p2[n][k])));
        }
}

TEST(Adjoint, DirectionalDerivativeMatchesFiniteDifferences) {
    const Fixture f = make_fixture(4);
    std::mt19937_64 rng(40);
    const ScalarField target = gbm::testing::bump(f.cfg.grid, 0.3, 0.1, 0.7, 0.2, 0.2);
    const AdjointTrajectory adj = solve_adjoint(f.traj, f.theta, target, f.cfg);
    const GradientSet g = assemble_gradient(f.traj, adj, f.theta, f.cfg.lambda, f.cfg.gamma);
    auto cost = [&](const ParamSet& th) {
        return eval_cost(solve_forward(th, f.cfg), th, target, f.cfg.lambda).total;
    };
    for (int d = 0; d < 5; ++d) {
        const ParamSet eta = gbm::testing::random_direction(f.theta, rng);
        const double eps = 1e-5;
        const double fd =
            (cost(gbm::testing::shifted(f.theta, eta, eps)) - cost(gbm::testing::shifted(f.theta, eta, -eps))) /
            (2 * eps);
        const double ad = directional_derivative(g, eta, f.cfg.time);
        EXPECT_LE(std::abs(ad - fd), 0.02 * std::abs(ad)) << "direction " << d;
    }
}

TEST(Adjoint, GridMismatchThrows) {
    const Fixture f = make_fixture(5);
    EXPECT_THROW(solve_adjoint(f.traj, f.theta, ScalarField(Grid2D{4, 4, 0.1, 0.1}), f.cfg), Error);
}
