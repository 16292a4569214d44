#ifndef GBMOPT_FORWARD_HPP
#define GBMOPT_FORWARD_HPP

// Explicit time stepping of the tumour density / acidity system
//   du1/dt = div(sigma grad u1 + g_k u1 grad kappa + g_d delta u1 grad u2) + mu f1 - xi1 u1
//   du2/dt = g_pH lap u2 - alpha u2 + beta f2 + xi2 u2
// with zero total normal flux on the boundary.
//
// Fluxes are assembled on cell faces with arithmetic face averages of the
// coefficients and of u1, so the u1 update is conservative: without reaction
// the discrete mass sum(u1) h^2 is preserved to rounding.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <vector>

#include "gbmopt/config.hpp"
#include "gbmopt/core.hpp"
#include "gbmopt/kinetics.hpp"
#include "gbmopt/params.hpp"

namespace gbm {

/// Parameter fields at one time level.
struct ParamSlice {
    std::array<const ScalarField*, kParamCount> fields{};

    const ScalarField& operator[](Param p) const noexcept { return *fields[static_cast<std::size_t>(p)]; }

    static ParamSlice at(const ParamSet& theta, std::size_t n) {
        ParamSlice s;
        for (std::size_t c = 0; c < kParamCount; ++c) s.fields[c] = &theta.fields[c].at(n);
        return s;
    }
};

/// Optional control fields at one time level; a null entry acts as zero.
struct ControlSlice {
    const ScalarField* xi1 = nullptr;
    const ScalarField* xi2 = nullptr;
};

struct StatePair {
    ScalarField u1;
    ScalarField u2;
};

struct StepDiagnostics {
    double u1_min;
    double u1_max;
    double u2_min;
    double u2_max;
};

struct StateTrajectory {
    FieldSeries u1;
    FieldSeries u2;
    TimeGrid time;
    std::vector<StepDiagnostics> diagnostics;  // one entry per stored slice

    const ScalarField& final_u1() const { return u1.back(); }
    const ScalarField& final_u2() const { return u2.back(); }
};

namespace detail {

/// Total u1 flux through the interior face between cells a and b (b on the
/// positive side), spacing h.
struct FaceFlux {
    double sigma_f, delta_f, u1_f, du1, dkappa, du2;

    double value(const ScalarFactors& g) const noexcept {
        return sigma_f * du1 + u1_f * (g.kappa * dkappa + g.delta * delta_f * du2);
    }
};

inline FaceFlux face_flux(const ScalarField& u1, const ScalarField& u2, const ParamSlice& th, std::size_t a,
                          std::size_t b, double h) noexcept {
    const ScalarField& sigma = th[Param::sigma];
    const ScalarField& kappa = th[Param::kappa];
    const ScalarField& delta = th[Param::delta];
    return {0.5 * (sigma[a] + sigma[b]), 0.5 * (delta[a] + delta[b]), 0.5 * (u1[a] + u1[b]),
            (u1[b] - u1[a]) / h,         (kappa[b] - kappa[a]) / h,   (u2[b] - u2[a]) / h};
}

template <class Visitor>
void for_each_interior_face(const Grid2D& g, Visitor&& visit) {
    for (std::size_t j = 0; j < g.ny; ++j)
        for (std::size_t i = 1; i < g.nx; ++i) visit(g.index(i - 1, j), g.index(i, j), g.hx);
    for (std::size_t j = 1; j < g.ny; ++j)
        for (std::size_t i = 0; i < g.nx; ++i) visit(g.index(i, j - 1), g.index(i, j), g.hy);
}

}  // namespace detail

/// Right-hand side of the semi-discrete system at one time level.
inline StatePair state_rhs(const ScalarField& u1, const ScalarField& u2, const ParamSlice& th,
                           const ScalarFactors& gamma, const ControlSlice& xi = {}) {
    const Grid2D& g = u1.grid();
    StatePair r{ScalarField(g), gamma.ph * laplace_neumann(u2)};
    detail::for_each_interior_face(g, [&](std::size_t a, std::size_t b, double h) {
        const double f = detail::face_flux(u1, u2, th, a, b, h).value(gamma) / h;
        r.u1[a] += f;
        r.u1[b] -= f;
    });
    const ScalarField& alpha = th[Param::alpha];
    const ScalarField& beta = th[Param::beta];
    const ScalarField& mu = th[Param::mu];
    for (std::size_t k = 0; k < g.size(); ++k) {
        r.u1[k] += mu[k] * kinetics::eval_f1(u1[k], u2[k]);
        r.u2[k] += -alpha[k] * u2[k] + beta[k] * kinetics::eval_f2(u1[k], u2[k]);
        if (xi.xi1) r.u1[k] -= (*xi.xi1)[k] * u1[k];
        if (xi.xi2) r.u2[k] += (*xi.xi2)[k] * u2[k];
    }
    return r;
}

/// One explicit Euler step u_{n+1} = u_n + tau * F(u_n; theta_n).
inline StatePair step_state(const ScalarField& u1, const ScalarField& u2, const ParamSlice& th,
                            const RunConfig& cfg, const ControlSlice& xi = {}, std::size_t step_index = 0) {
    const double tau = cfg.time.tau();
    StatePair next = state_rhs(u1, u2, th, cfg.gamma, xi);
    for (std::size_t k = 0; k < u1.size(); ++k) {
        next.u1[k] = u1[k] + tau * next.u1[k];
        next.u2[k] = u2[k] + tau * next.u2[k];
    }
    if (!next.u1.all_finite() || !next.u2.all_finite())
        throw InstabilityError(step_index, "non-finite state produced by explicit step");
    return next;
}

/// Full state trajectory; xi1/xi2 are optional control series (same length as theta).
inline StateTrajectory solve_forward(const ParamSet& theta, const RunConfig& cfg, const FieldSeries* xi1 = nullptr,
                                     const FieldSeries* xi2 = nullptr) {
    const std::size_t nt = cfg.time.steps();
    theta.check_shape(cfg.grid, nt + 1);
    StateTrajectory traj;
    traj.time = cfg.time;
    traj.u1.reserve(nt + 1);
    traj.u2.reserve(nt + 1);
    traj.u1.push_back(cfg.initial_u1());
    traj.u2.push_back(cfg.initial_u2());
    auto record = [&traj] {
        traj.diagnostics.push_back({traj.u1.back().min(), traj.u1.back().max(), traj.u2.back().min(),
                                    traj.u2.back().max()});
    };
    record();
    for (std::size_t n = 0; n < nt; ++n) {
        ControlSlice xi{xi1 ? &xi1->at(n) : nullptr, xi2 ? &xi2->at(n) : nullptr};
        StatePair next = step_state(traj.u1[n], traj.u2[n], ParamSlice::at(theta, n), cfg, xi, n);
        traj.u1.push_back(std::move(next.u1));
        traj.u2.push_back(std::move(next.u2));
        record();
    }
    return traj;
}

struct StabilityReport {
    double parabolic;  // diffusion limit
    double advective;  // transport limit, +inf without transport
    double max_step;   // safety * min(parabolic, advective)
    bool admissible;   // configured tau <= max_step
};

/// Step-size estimate for the explicit scheme. The advective speed uses the
/// kappa fields of all slices and the initial acidity gradient.
inline StabilityReport stability_check(const ParamSet& theta, const RunConfig& cfg, double safety = 0.9) {
    const Grid2D& g = cfg.grid;
    double diff = cfg.gamma.ph;
    for (const auto& f : theta[Param::sigma]) diff = std::max(diff, f.max());
    const double inv_h2 = 1.0 / (g.hx * g.hx) + 1.0 / (g.hy * g.hy);
    const double parabolic = 1.0 / (2.0 * diff * inv_h2);

    const ScalarField u2 = cfg.initial_u2();
    double speed = 0.0;
    for (std::size_t n = 0; n < theta.slices(); ++n) {
        const ScalarField& kappa = theta[Param::kappa][n];
        const ScalarField& delta = theta[Param::delta][n];
        detail::for_each_interior_face(g, [&](std::size_t a, std::size_t b, double h) {
            const double v = std::abs(cfg.gamma.kappa * (kappa[b] - kappa[a]) / h) +
                             std::abs(cfg.gamma.delta * 0.5 * (delta[a] + delta[b]) * (u2[b] - u2[a]) / h);
            speed = std::max(speed, v);
        });
    }
    const double h = std::min(g.hx, g.hy);
    const double advective = speed > 0.0 ? h / speed : std::numeric_limits<double>::infinity();
    const double max_step = safety * std::min(parabolic, advective);
    return {parabolic, advective, max_step, cfg.time.tau() <= max_step};
}

}  // namespace gbm

#endif
