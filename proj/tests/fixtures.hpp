#ifndef GBMOPT_TEST_FIXTURES_HPP
#define GBMOPT_TEST_FIXTURES_HPP

// Shared fixtures for the unit and acceptance suites.

#include <cmath>
#include <numbers>
#include <random>

#include "gbmopt/config.hpp"
#include "gbmopt/core.hpp"
#include "gbmopt/imaging.hpp"
#include "gbmopt/params.hpp"

namespace gbm::testing {

inline RunConfig small_config(std::size_t n, double h, std::size_t nt, double tau) {
    RunConfig cfg;
    cfg.grid = {n, n, h, h};
    cfg.time = TimeGrid(nt, tau);
    return cfg;
}

/// Low-mode cosine field with values in [-1/2, 1/2]; satisfies the zero-flux condition.
inline ScalarField smooth_field(const Grid2D& g, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    const double a = u(rng), b = u(rng), c = u(rng), d = u(rng);
    const double lx = static_cast<double>(g.nx) * g.hx;
    const double ly = static_cast<double>(g.ny) * g.hy;
    constexpr double pi = std::numbers::pi;
    return ScalarField::from_function(g, [=](double x, double y) {
        return 0.125 * (a * std::cos(pi * x / lx) + b * std::cos(pi * y / ly) +
                        c * std::cos(2 * pi * x / lx) * std::cos(pi * y / ly) + d);
    });
}

/// Random in-box parameters: each slice is a smooth field mapped into its box.
inline ParamSet random_params(const Grid2D& g, std::size_t slices, std::mt19937_64& rng) {
    ParamSet th;
    for (std::size_t c = 0; c < kParamCount; ++c) {
        const Bounds b = th.bounds[c];
        for (std::size_t n = 0; n < slices; ++n) {
            ScalarField f = smooth_field(g, rng);
            for (double& v : f.values()) v = b.lower + (b.upper - b.lower) * (0.5 + v);
            th.fields[c].push_back(std::move(f));
        }
    }
    return th;
}

/// Smooth direction, each component scaled by its box width.
inline ParamSet random_direction(const ParamSet& like, std::mt19937_64& rng) {
    ParamSet eta = like;
    for (std::size_t c = 0; c < kParamCount; ++c)
        for (auto& f : eta.fields[c]) {
            f = smooth_field(f.grid(), rng);
            f *= like.bounds[c].upper - like.bounds[c].lower;
        }
    return eta;
}

inline ParamSet shifted(const ParamSet& theta, const ParamSet& eta, double eps) {
    ParamSet out = theta;
    for (std::size_t c = 0; c < kParamCount; ++c)
        for (std::size_t n = 0; n < out.slices(); ++n) out.fields[c][n].axpy(eps, eta.fields[c][n]);
    return out;
}

inline ScalarField bump(const Grid2D& g, double base, double amp, double cx, double cy, double w) {
    return ScalarField::from_function(g, [=](double x, double y) {
        return base + amp * std::exp(-((x - cx) * (x - cx) + (y - cy) * (y - cy)) / w);
    });
}

/// 64x64 RGB ring on a pale background with sparse dark and bright specks.
/// Uses raw generator output only, so the pixels are identical on every platform.
inline RasterImage ring_image() {
    RasterImage img{64, 64, 3, std::vector<std::uint8_t>(64 * 64 * 3)};
    std::mt19937_64 rng(2024);
    for (std::size_t y = 0; y < 64; ++y)
        for (std::size_t x = 0; x < 64; ++x) {
            const double dx = static_cast<double>(x) - 31.5;
            const double dy = static_cast<double>(y) - 31.5;
            const double r = std::sqrt(dx * dx + dy * dy);
            std::uint8_t rgb[3] = {232, 206, 216};
            if (r >= 11.0 && r <= 19.0) {
                rgb[0] = 72;
                rgb[1] = 38;
                rgb[2] = 104;
            } else if (r < 11.0) {
                rgb[0] = 196;
                rgb[1] = 150;
                rgb[2] = 180;
            }
            const std::uint64_t bits = rng();
            if ((bits & 0x3f) == 0) rgb[0] = rgb[1] = rgb[2] = static_cast<std::uint8_t>((bits >> 8) & 1 ? 255 : 0);
            for (int c = 0; c < 3; ++c) img.data[3 * (y * 64 + x) + c] = rgb[c];
        }
    return img;
}

}  // namespace gbm::testing

#endif
