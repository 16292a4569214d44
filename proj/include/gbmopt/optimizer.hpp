#ifndef GBMOPT_OPTIMIZER_HPP
#define GBMOPT_OPTIMIZER_HPP

#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "gbmopt/adjoint.hpp"
#include "gbmopt/config.hpp"
#include "gbmopt/core.hpp"
#include "gbmopt/forward.hpp"
#include "gbmopt/params.hpp"

namespace gbm {

struct CostReport {
    double terminal_misfit = 0.0;
    double regularization = 0.0;
    double total = 0.0;
};

struct MetricsReport {
    double e2 = 0.0;
    double e_inf = 0.0;
    double e_rel = 0.0;  // NaN when the target has zero norm
    double e_domain = 0.0;
    bool rel_defined = true;
};

/// Fields of the same shape as a ParamSet holding d J / d theta as densities
/// with respect to the time-space inner product sum_{n < nt} tau (., .)_h.
struct GradientSet {
    std::array<FieldSeries, kParamCount> fields;

    FieldSeries& operator[](Param p) noexcept { return fields[static_cast<std::size_t>(p)]; }
    const FieldSeries& operator[](Param p) const noexcept { return fields[static_cast<std::size_t>(p)]; }
};

/// Time quadrature weight of slice n: tau for n < nt, zero for the terminal slice.
inline double slice_weight(const TimeGrid& time, std::size_t n) noexcept {
    return n < time.steps() ? time.tau() : 0.0;
}

/// Squared norm sum_{n < nt} tau ||f_n||^2.
inline double series_norm_sq(const FieldSeries& s, const TimeGrid& time) {
    double acc = 0.0;
    for (std::size_t n = 0; n < s.size(); ++n) acc += slice_weight(time, n) * inner(s[n], s[n]);
    return acc;
}

inline double series_inner(const FieldSeries& a, const FieldSeries& b, const TimeGrid& time) {
    double acc = 0.0;
    for (std::size_t n = 0; n < a.size(); ++n) acc += slice_weight(time, n) * inner(a[n], b[n]);
    return acc;
}

inline double terminal_misfit(const ScalarField& u1_final, const ScalarField& target) {
    const ScalarField r = u1_final - target;
    return 0.5 * inner(r, r);
}

inline CostReport eval_cost(const StateTrajectory& traj, const ParamSet& theta, const ScalarField& target,
                            const std::array<double, kParamCount>& lambda) {
    theta.check_shape(target.grid(), traj.u1.size());
    CostReport c;
    c.terminal_misfit = terminal_misfit(traj.final_u1(), target);
    for (std::size_t k = 0; k < kParamCount; ++k)
        c.regularization += 0.5 * lambda[k] * series_norm_sq(theta.fields[k], traj.time);
    c.total = c.terminal_misfit + c.regularization;
    return c;
}

/// Adds the sensitivities of one step n (about u_n, theta_n, paired with the
/// multiplier p_{n+1}) to the gradient densities of slice n.
inline void accumulate_step_gradient(GradientSet& grad, std::size_t n, const ScalarField& u1, const ScalarField& u2,
                                     const ScalarField& p1, const ScalarField& p2, const ParamSlice& th,
                                     const ScalarFactors& gamma) {
    ScalarField& gs = grad[Param::sigma][n];
    ScalarField& gk = grad[Param::kappa][n];
    ScalarField& gd = grad[Param::delta][n];
    detail::for_each_interior_face(u1.grid(), [&](std::size_t a, std::size_t b, double h) {
        const detail::FaceFlux f = detail::face_flux(u1, u2, th, a, b, h);
        const double dp = (p1[b] - p1[a]) / h;
        const double s = -0.5 * dp * f.du1;
        gs[a] += s;
        gs[b] += s;
        const double k = dp * f.u1_f * gamma.kappa / h;
        gk[a] += k;
        gk[b] -= k;
        const double d = -0.5 * dp * f.u1_f * gamma.delta * f.du2;
        gd[a] += d;
        gd[b] += d;
    });
    ScalarField& ga = grad[Param::alpha][n];
    ScalarField& gb = grad[Param::beta][n];
    ScalarField& gm = grad[Param::mu][n];
    for (std::size_t k = 0; k < u1.size(); ++k) {
        ga[k] += -u2[k] * p2[k];
        gb[k] += kinetics::eval_f2(u1[k], u2[k]) * p2[k];
        gm[k] += kinetics::eval_f1(u1[k], u2[k]) * p1[k];
    }
}

/// Gradient of the reduced cost: per slice n < nt, the pointwise sensitivity
/// expressions (-grad u1.grad p1, g_k div(u1 grad p1), -g_d u1 grad u2.grad p1,
/// -u2 p2, f2 p2, f1 p1) evaluated with the multiplier of step n, plus
/// lambda * theta. The terminal slice has zero weight and zero gradient.
inline GradientSet assemble_gradient(const StateTrajectory& traj, const AdjointTrajectory& adj, const ParamSet& theta,
                                     const std::array<double, kParamCount>& lambda, const ScalarFactors& gamma) {
    const std::size_t nt = traj.time.steps();
    if (!(adj.time == traj.time) || adj.p1.size() != nt + 1 || traj.u1.size() != nt + 1)
        throw Error(ErrorKind::shape, "state and adjoint trajectories are not aligned");
    const Grid2D& g = traj.u1.front().grid();
    theta.check_shape(g, nt + 1);
    GradientSet grad;
    for (auto& s : grad.fields) s = constant_series(g, nt + 1, 0.0);
    for (std::size_t n = 0; n < nt; ++n) {
        accumulate_step_gradient(grad, n, traj.u1[n], traj.u2[n], adj.p1[n + 1], adj.p2[n + 1],
                                 ParamSlice::at(theta, n), gamma);
        for (std::size_t c = 0; c < kParamCount; ++c)
            if (lambda[c] != 0.0) grad.fields[c][n].axpy(lambda[c], theta.fields[c][n]);
    }
    return grad;
}

/// Directional derivative <g, eta> in the time-space inner product.
inline double directional_derivative(const GradientSet& g, const ParamSet& direction, const TimeGrid& time) {
    double acc = 0.0;
    for (std::size_t c = 0; c < kParamCount; ++c) acc += series_inner(g.fields[c], direction.fields[c], time);
    return acc;
}

inline MetricsReport eval_metrics(const ScalarField& u1_final, const ScalarField& target, double eps) {
    require_same_grid(u1_final.grid(), target.grid(), "metrics");
    const ScalarField err = u1_final - target;
    MetricsReport m;
    m.e2 = norm_l2(err);
    m.e_inf = norm_linf(err);
    const double on = norm_l2(target);
    if (on > 0.0) {
        m.e_rel = m.e2 / on;
    } else {
        m.e_rel = std::numeric_limits<double>::quiet_NaN();
        m.rel_defined = false;
    }
    std::size_t above = 0;
    for (double v : err.values())
        if (std::abs(v) > eps) ++above;
    m.e_domain = static_cast<double>(above) / static_cast<double>(err.size());
    return m;
}

struct IterationRecord {
    std::size_t iteration = 0;
    double cost = 0.0;
    double step = 0.0;  // accepted gamma; 0 for the initial evaluation
    std::size_t trials = 0;
    MetricsReport metrics;
};

enum class StopReason { tolerance, iteration_cap, stalled };

inline const char* stop_reason_name(StopReason r) noexcept {
    switch (r) {
        case StopReason::tolerance: return "tolerance";
        case StopReason::iteration_cap: return "iteration_cap";
        case StopReason::stalled: return "stalled";
    }
    return "unknown";
}

template <class Vars, class Eval>
struct DescentOutcome {
    Vars x;
    Eval eval;
    std::vector<IterationRecord> history;
    std::size_t accepted = 0;
    StopReason reason = StopReason::iteration_cap;
};

struct DescentSettings {
    double epsilon = 0.0;
    std::size_t max_iters = 200;
    double min_step = std::ldexp(1.0, -30);
};

/// Projected gradient descent with step sizes 1, 1/2, 1/4, ... down to
/// min_step; the first trial with strictly smaller cost is accepted. A trial
/// whose forward solve is unstable counts as a rejected step.
///
/// Problem must provide
///   Eval evaluate(const Vars&)                   (may throw InstabilityError)
///   double cost(const Eval&)
///   Vars gradient(const Vars&, const Eval&)
///   Vars trial(const Vars& x, const Vars& g, double gamma)   (projected step)
///   MetricsReport metrics(const Eval&)
template <class Vars, class Problem>
auto projected_descent(Problem& problem, Vars x0, const DescentSettings& settings)
    -> DescentOutcome<Vars, decltype(problem.evaluate(x0))> {
    using Eval = decltype(problem.evaluate(x0));
    DescentOutcome<Vars, Eval> out{std::move(x0), Eval{}, {}, 0, StopReason::iteration_cap};
    out.eval = problem.evaluate(out.x);
    out.history.push_back({0, problem.cost(out.eval), 0.0, 0, problem.metrics(out.eval)});

    for (std::size_t k = 1; k <= settings.max_iters; ++k) {
        const double current = problem.cost(out.eval);
        if (current < settings.epsilon) {
            out.reason = StopReason::tolerance;
            return out;
        }
        const Vars g = problem.gradient(out.x, out.eval);
        bool accepted = false;
        std::size_t trials = 0;
        for (double gamma = 1.0; gamma >= settings.min_step; gamma *= 0.5) {
            ++trials;
            Vars candidate = problem.trial(out.x, g, gamma);
            std::optional<Eval> e;
            try {
                e = problem.evaluate(candidate);
            } catch (const InstabilityError&) {
                continue;
            }
            if (problem.cost(*e) < current) {
                out.x = std::move(candidate);
                out.eval = std::move(*e);
                out.history.push_back({k, problem.cost(out.eval), gamma, trials, problem.metrics(out.eval)});
                ++out.accepted;
                accepted = true;
                break;
            }
        }
        if (!accepted) {
            out.reason = StopReason::stalled;
            return out;
        }
    }
    out.reason = problem.cost(out.eval) < settings.epsilon ? StopReason::tolerance : StopReason::iteration_cap;
    return out;
}

/// theta - gamma * g, projected onto the boxes.
inline ParamSet descent_step(const ParamSet& theta, const GradientSet& g, double gamma) {
    ParamSet out = theta;
    for (std::size_t c = 0; c < kParamCount; ++c)
        for (std::size_t n = 0; n < out.slices(); ++n) out.fields[c][n].axpy(-gamma, g.fields[c][n]);
    return project_box(std::move(out));
}

/// Forward solve plus cost, the unit of work evaluated by the line search.
struct ParamEvaluation {
    StateTrajectory traj;
    CostReport cost;
};

/// Parameter estimation for a fixed target and configuration.
class EstimationProblem {
public:
    EstimationProblem(const ScalarField& target, const RunConfig& cfg, double metric_eps = 0.05)
        : target_(target), cfg_(cfg), metric_eps_(metric_eps) {
        require_same_grid(target.grid(), cfg.grid, "estimation target");
    }

    ParamEvaluation evaluate(const ParamSet& theta) const {
        ParamEvaluation e{solve_forward(theta, cfg_), {}};
        e.cost = eval_cost(e.traj, theta, target_, cfg_.lambda);
        return e;
    }
    double cost(const ParamEvaluation& e) const noexcept { return e.cost.total; }
    ParamSet gradient(const ParamSet& theta, const ParamEvaluation& e) const {
        return as_param_set(gradient_set(theta, e), theta.bounds);
    }
    GradientSet gradient_set(const ParamSet& theta, const ParamEvaluation& e) const {
        const AdjointTrajectory adj = solve_adjoint(e.traj, theta, target_, cfg_);
        return assemble_gradient(e.traj, adj, theta, cfg_.lambda, cfg_.gamma);
    }
    ParamSet trial(const ParamSet& theta, const ParamSet& g, double gamma) const {
        GradientSet gs;
        gs.fields = g.fields;
        return descent_step(theta, gs, gamma);
    }
    MetricsReport metrics(const ParamEvaluation& e) const {
        return eval_metrics(e.traj.final_u1(), target_, metric_eps_);
    }

    static ParamSet as_param_set(GradientSet g, const ParamBounds& bounds) {
        ParamSet p;
        p.fields = std::move(g.fields);
        p.bounds = bounds;
        return p;
    }

private:
    const ScalarField& target_;
    const RunConfig& cfg_;
    double metric_eps_;
};

struct PgdResult {
    ParamSet theta;
    StateTrajectory traj;
    CostReport cost;
    MetricsReport metrics;
    std::vector<IterationRecord> history;
    std::size_t accepted = 0;
    StopReason reason = StopReason::iteration_cap;
    double epsilon = 0.0;

    bool stalled() const noexcept { return reason == StopReason::stalled; }
};

/// Stopping tolerance: configured value or 1e-4 * ||O||^2.
inline double default_epsilon(const ScalarField& target, const RunConfig& cfg) {
    if (cfg.epsilon) return *cfg.epsilon;
    const double n = norm_l2(target);
    return 1e-4 * n * n;
}

/// Initial iterate: theta_init per component, projected onto the boxes.
inline ParamSet initial_params(const RunConfig& cfg) {
    return project_box(ParamSet::uniform(cfg.grid, cfg.time.steps() + 1, cfg.theta_init, cfg.bounds));
}

inline PgdResult pgd_run(const ScalarField& target, const RunConfig& cfg, std::optional<ParamSet> start = std::nullopt,
                         double metric_eps = 0.05) {
    cfg.validate();
    if (!target.all_finite()) throw Error(ErrorKind::invalid_argument, "target contains non-finite values");
    EstimationProblem problem(target, cfg, metric_eps);
    DescentSettings settings;
    settings.epsilon = default_epsilon(target, cfg);
    settings.max_iters = cfg.max_iters;
    ParamSet theta0 = start ? project_box(std::move(*start)) : initial_params(cfg);
    auto outcome = projected_descent(problem, std::move(theta0), settings);
    PgdResult r;
    r.metrics = problem.metrics(outcome.eval);
    r.cost = outcome.eval.cost;
    r.theta = std::move(outcome.x);
    r.traj = std::move(outcome.eval.traj);
    r.history = std::move(outcome.history);
    r.accepted = outcome.accepted;
    r.reason = outcome.reason;
    r.epsilon = settings.epsilon;
    return r;
}

/// ||theta - P(theta - gamma grad J)|| / ||theta||, the projected fixed-point residual.
inline double projection_residual(const ParamSet& theta, const GradientSet& g, const TimeGrid& time,
                                  double gamma = 1.0) {
    const ParamSet moved = descent_step(theta, g, gamma);
    double num = 0.0;
    double den = 0.0;
    for (std::size_t c = 0; c < kParamCount; ++c) {
        FieldSeries diff = theta.fields[c];
        for (std::size_t n = 0; n < diff.size(); ++n) diff[n] -= moved.fields[c][n];
        num += series_norm_sq(diff, time);
        den += series_norm_sq(theta.fields[c], time);
    }
    return den > 0.0 ? std::sqrt(num / den) : std::sqrt(num);
}

}  // namespace gbm

#endif
