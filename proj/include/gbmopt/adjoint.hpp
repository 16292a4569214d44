#ifndef GBMOPT_ADJOINT_HPP
#define GBMOPT_ADJOINT_HPP

// Backward solve for the multipliers (p1, p2) of the terminal misfit
// 1/2 ||u1(T) - O||^2. Each backward step is the transpose of the linearised
// forward step about (u_n, theta_n):
//
//   p_n = p_{n+1} + tau * DF(u_n; theta_n)^T p_{n+1}
//
// Written out, DF^T p is the face discretisation of
//   p1: div(sigma grad p1) - (g_k grad kappa + g_d delta grad u2) . grad p1
//       + mu d1f1 p1 + beta d1f2 p2 - xi1 p1
//   p2: g_pH lap p2 + div(g_d delta u1 grad p1) - alpha p2
//       + mu d2f1 p1 + beta d2f2 p2 + xi2 p2
// with zero normal derivative on the boundary.

#include <cstddef>

#include "gbmopt/config.hpp"
#include "gbmopt/core.hpp"
#include "gbmopt/forward.hpp"
#include "gbmopt/kinetics.hpp"

namespace gbm {

struct AdjointTrajectory {
    FieldSeries p1;
    FieldSeries p2;
    TimeGrid time;
};

struct AdjointPair {
    ScalarField p1;
    ScalarField p2;
};

/// Applies DF(u; theta)^T to (p1, p2).
inline AdjointPair adjoint_rhs(const ScalarField& p1, const ScalarField& p2, const ScalarField& u1,
                               const ScalarField& u2, const ParamSlice& th, const ScalarFactors& gamma,
                               const ControlSlice& xi = {}) {
    const Grid2D& g = u1.grid();
    AdjointPair r{ScalarField(g), gamma.ph * laplace_neumann(p2)};
    detail::for_each_interior_face(g, [&](std::size_t a, std::size_t b, double h) {
        const detail::FaceFlux f = detail::face_flux(u1, u2, th, a, b, h);
        const double dp = (p1[b] - p1[a]) / h;
        const double drift = gamma.kappa * f.dkappa + gamma.delta * f.delta_f * f.du2;
        const double taxis = f.u1_f * gamma.delta * f.delta_f / h;
        r.p1[a] -= dp * (-f.sigma_f / h + 0.5 * drift);
        r.p1[b] -= dp * (f.sigma_f / h + 0.5 * drift);
        r.p2[a] += dp * taxis;
        r.p2[b] -= dp * taxis;
    });
    const ScalarField& alpha = th[Param::alpha];
    const ScalarField& beta = th[Param::beta];
    const ScalarField& mu = th[Param::mu];
    for (std::size_t k = 0; k < g.size(); ++k) {
        const auto d1 = kinetics::partials_f1(u1[k], u2[k]);
        const auto d2 = kinetics::partials_f2(u1[k], u2[k]);
        r.p1[k] += mu[k] * d1.du1 * p1[k] + beta[k] * d2.du1 * p2[k];
        r.p2[k] += mu[k] * d1.du2 * p1[k] + (beta[k] * d2.du2 - alpha[k]) * p2[k];
        if (xi.xi1) r.p1[k] -= (*xi.xi1)[k] * p1[k];
        if (xi.xi2) r.p2[k] += (*xi.xi2)[k] * p2[k];
    }
    return r;
}

inline AdjointPair step_adjoint(const ScalarField& p1_next, const ScalarField& p2_next, const ScalarField& u1,
                                const ScalarField& u2, const ParamSlice& th, const RunConfig& cfg,
                                const ControlSlice& xi = {}, std::size_t step_index = 0) {
    const double tau = cfg.time.tau();
    AdjointPair p = adjoint_rhs(p1_next, p2_next, u1, u2, th, cfg.gamma, xi);
    for (std::size_t k = 0; k < p.p1.size(); ++k) {
        p.p1[k] = p1_next[k] + tau * p.p1[k];
        p.p2[k] = p2_next[k] + tau * p.p2[k];
    }
    if (!p.p1.all_finite() || !p.p2.all_finite())
        throw InstabilityError(step_index, "non-finite adjoint produced by backward step");
    return p;
}

/// Terminal data p1(T) = u1(T) - O, p2(T) = 0, then nt backward steps.
inline AdjointTrajectory solve_adjoint(const StateTrajectory& traj, const ParamSet& theta, const ScalarField& target,
                                       const RunConfig& cfg, const FieldSeries* xi1 = nullptr,
                                       const FieldSeries* xi2 = nullptr) {
    const std::size_t nt = traj.time.steps();
    if (traj.u1.size() != nt + 1) throw Error(ErrorKind::shape, "state trajectory is incomplete");
    require_same_grid(target.grid(), traj.final_u1().grid(), "adjoint terminal data");
    theta.check_shape(target.grid(), nt + 1);

    AdjointTrajectory adj;
    adj.time = traj.time;
    adj.p1.resize(nt + 1);
    adj.p2.resize(nt + 1);
    adj.p1[nt] = traj.final_u1() - target;
    adj.p2[nt] = ScalarField(target.grid());
    for (std::size_t n = nt; n-- > 0;) {
        ControlSlice xi{xi1 ? &xi1->at(n) : nullptr, xi2 ? &xi2->at(n) : nullptr};
        AdjointPair p = step_adjoint(adj.p1[n + 1], adj.p2[n + 1], traj.u1[n], traj.u2[n], ParamSlice::at(theta, n),
                                     cfg, xi, n);
        adj.p1[n] = std::move(p.p1);
        adj.p2[n] = std::move(p.p2);
    }
    return adj;
}

}  // namespace gbm

#endif
