#include <gtest/gtest.h>

#include <cmath>

#include "gbmopt/kinetics.hpp"

using namespace gbm::kinetics;

TEST(Kinetics, GrowthTermValues) {
    EXPECT_EQ(eval_f1(0.0, 0.5), 0.0);
    EXPECT_EQ(eval_f1(1.0, 0.3), 0.0);
    EXPECT_NEAR(eval_f1(0.5, 0.5), 0.125 / 2.25, 1e-15);
}

TEST(Kinetics, ProtonTermValues) {
    for (double u : {0.0, 0.3, 1.0, 7.0}) EXPECT_EQ(eval_f2(u, 0.0), 0.0);
    EXPECT_NEAR(eval_f2(1.0, 1.0), 1.0 / 9.0, 1e-15);
    EXPECT_NEAR(eval_f2(0.5, 0.5), 0.25 / 2.25, 1e-15);
}

TEST(Kinetics, PartialValues) {
    EXPECT_NEAR(partials_f1(0.0, 0.0).du1, 1.0, 1e-15);
    EXPECT_NEAR(partials_f2(1.0, 0.0).du2, 0.25, 1e-15);
}

TEST(Kinetics, PartialsMatchCentralDifferences) {
    const double h = 1e-6;
    for (int i = 0; i <= 20; ++i) {
        for (int j = 0; j <= 20; ++j) {
            const double a = 0.1 * i, b = 0.1 * j;
            const KineticsEval k = evaluate(a, b);
            const double fd[4] = {(eval_f1(a + h, b) - eval_f1(a - h, b)) / (2 * h),
                                  (eval_f1(a, b + h) - eval_f1(a, b - h)) / (2 * h),
                                  (eval_f2(a + h, b) - eval_f2(a - h, b)) / (2 * h),
                                  (eval_f2(a, b + h) - eval_f2(a, b - h)) / (2 * h)};
            const double an[4] = {k.d1f1, k.d2f1, k.d1f2, k.d2f2};
            for (int c = 0; c < 4; ++c) {
                // Relative error with an absolute floor where the partial vanishes.
                const double scale = std::max(std::abs(an[c]), 1e-3);
                EXPECT_LE(std::abs(an[c] - fd[c]) / scale, 1e-6) << "partial " << c << " at (" << a << "," << b << ")";
            }
        }
    }
}

TEST(Kinetics, ZeroSetsAndBounds) {
    for (int i = 0; i <= 20; ++i) {
        const double v = 0.1 * i;
        EXPECT_EQ(eval_f1(0.0, v), 0.0);
        EXPECT_EQ(eval_f1(1.0, v), 0.0);
        EXPECT_EQ(eval_f1(v, 1.0), 0.0);
        EXPECT_EQ(eval_f2(0.0, v), 0.0);
        EXPECT_EQ(eval_f2(v, 0.0), 0.0);
        for (int j = 0; j <= 20; ++j) {
            EXPECT_LE(std::abs(eval_f1(v, 0.1 * j)), 1.0);
            EXPECT_LE(std::abs(eval_f2(v, 0.1 * j)), 1.0);
        }
    }
}
