#ifndef GBMOPT_CONTROL_HPP
#define GBMOPT_CONTROL_HPP

// Pattern-neutralising controls xi = (xi1, xi2), entering the state system as
// -xi1 u1 and +xi2 u2, and pattern synthesis by averaging estimated fields.

#include <cstddef>
#include <optional>
#include <vector>

#include "gbmopt/adjoint.hpp"
#include "gbmopt/config.hpp"
#include "gbmopt/forward.hpp"
#include "gbmopt/optimizer.hpp"
#include "gbmopt/params.hpp"

namespace gbm {

enum class ControlMode { full, ph_only };

struct ControlSet {
    FieldSeries xi1;
    FieldSeries xi2;
    ControlMode mode = ControlMode::full;
    double lambda_xi = 1e-4;
    Bounds xi1_bounds{0.0, 10.0};
    Bounds xi2_bounds{-10.0, 10.0};

    static ControlSet zero(const RunConfig& cfg, ControlMode mode = ControlMode::full) {
        ControlSet x;
        x.xi1 = constant_series(cfg.grid, cfg.time.steps() + 1, 0.0);
        x.xi2 = x.xi1;
        x.mode = mode;
        x.lambda_xi = cfg.control.lambda_xi;
        x.xi1_bounds = cfg.control.xi1;
        x.xi2_bounds = cfg.control.xi2;
        return x;
    }

    friend bool operator==(const ControlSet&, const ControlSet&) = default;
};

/// Clamps onto the control boxes; in pH-only mode xi1 is held at zero.
inline ControlSet project_controls(ControlSet xi) {
    for (auto& f : xi.xi1)
        for (double& v : f.values()) v = xi.mode == ControlMode::ph_only ? 0.0 : xi.xi1_bounds.clamp(v);
    for (auto& f : xi.xi2)
        for (double& v : f.values()) v = xi.xi2_bounds.clamp(v);
    return xi;
}

inline StateTrajectory solve_forward_controlled(const ParamSet& theta, const ControlSet& xi, const RunConfig& cfg) {
    if (xi.xi1.size() != cfg.time.steps() + 1 || xi.xi2.size() != cfg.time.steps() + 1)
        throw Error(ErrorKind::shape, "control series length does not match the time grid");
    return solve_forward(theta, cfg, &xi.xi1, &xi.xi2);
}

inline CostReport eval_control_cost(const StateTrajectory& traj, const ControlSet& xi, const ScalarField& target) {
    CostReport c;
    c.terminal_misfit = terminal_misfit(traj.final_u1(), target);
    c.regularization = 0.5 * xi.lambda_xi * (series_norm_sq(xi.xi1, traj.time) + series_norm_sq(xi.xi2, traj.time));
    c.total = c.terminal_misfit + c.regularization;
    return c;
}

/// dJ/dxi1 = -u1 p1 + lambda xi1, dJ/dxi2 = u2 p2 + lambda xi2, step n paired
/// with the multiplier p_{n+1}. xi1's gradient is zero in pH-only mode.
inline ControlSet assemble_control_gradient(const StateTrajectory& traj, const AdjointTrajectory& adj,
                                            const ControlSet& xi) {
    const std::size_t nt = traj.time.steps();
    ControlSet g = xi;
    for (std::size_t n = 0; n <= nt; ++n) {
        g.xi1[n] *= 0.0;
        g.xi2[n] *= 0.0;
        if (n == nt) continue;
        for (std::size_t k = 0; k < g.xi1[n].size(); ++k) {
            if (xi.mode == ControlMode::full)
                g.xi1[n][k] = -traj.u1[n][k] * adj.p1[n + 1][k] + xi.lambda_xi * xi.xi1[n][k];
            g.xi2[n][k] = traj.u2[n][k] * adj.p2[n + 1][k] + xi.lambda_xi * xi.xi2[n][k];
        }
    }
    return g;
}

struct ControlEvaluation {
    StateTrajectory traj;
    CostReport cost;
};

/// Optimisation over xi with theta frozen.
class NeutralizationProblem {
public:
    NeutralizationProblem(const ParamSet& theta, const ScalarField& target, const RunConfig& cfg,
                          double metric_eps = 0.05)
        : theta_(theta), target_(target), cfg_(cfg), metric_eps_(metric_eps) {
        require_same_grid(target.grid(), cfg.grid, "neutral target");
    }

    ControlEvaluation evaluate(const ControlSet& xi) const {
        ControlEvaluation e{solve_forward_controlled(theta_, xi, cfg_), {}};
        e.cost = eval_control_cost(e.traj, xi, target_);
        return e;
    }
    double cost(const ControlEvaluation& e) const noexcept { return e.cost.total; }
    ControlSet gradient(const ControlSet& xi, const ControlEvaluation& e) const {
        const AdjointTrajectory adj = solve_adjoint(e.traj, theta_, target_, cfg_, &xi.xi1, &xi.xi2);
        return assemble_control_gradient(e.traj, adj, xi);
    }
    ControlSet trial(const ControlSet& xi, const ControlSet& g, double gamma) const {
        ControlSet out = xi;
        for (std::size_t n = 0; n < out.xi1.size(); ++n) {
            out.xi1[n].axpy(-gamma, g.xi1[n]);
            out.xi2[n].axpy(-gamma, g.xi2[n]);
        }
        return project_controls(std::move(out));
    }
    MetricsReport metrics(const ControlEvaluation& e) const {
        return eval_metrics(e.traj.final_u1(), target_, metric_eps_);
    }

private:
    const ParamSet& theta_;
    const ScalarField& target_;
    const RunConfig& cfg_;
    double metric_eps_;
};

struct NeutralizeResult {
    ControlSet xi;
    StateTrajectory traj;
    CostReport cost;
    MetricsReport metrics;
    MetricsReport baseline;  // xi = 0
    std::vector<IterationRecord> history;
    std::size_t accepted = 0;
    StopReason reason = StopReason::iteration_cap;
};

/// Neutral target used when none is supplied: the uniform initial density.
inline ScalarField default_neutral_target(const RunConfig& cfg) { return ScalarField(cfg.grid, cfg.u1_init); }

inline NeutralizeResult neutralize(const ParamSet& theta_hat, const ScalarField& neutral_target, const RunConfig& cfg,
                                   ControlMode mode, double metric_eps = 0.05) {
    cfg.validate();
    NeutralizationProblem problem(theta_hat, neutral_target, cfg, metric_eps);
    DescentSettings settings;
    settings.epsilon = default_epsilon(neutral_target, cfg);
    settings.max_iters = cfg.max_iters;
    auto outcome = projected_descent(problem, project_controls(ControlSet::zero(cfg, mode)), settings);
    NeutralizeResult r;
    r.baseline = outcome.history.front().metrics;
    r.metrics = problem.metrics(outcome.eval);
    r.cost = outcome.eval.cost;
    r.xi = std::move(outcome.x);
    r.traj = std::move(outcome.eval.traj);
    r.history = std::move(outcome.history);
    r.accepted = outcome.accepted;
    r.reason = outcome.reason;
    return r;
}

/// Pointwise weighted combination of controls, projected onto the first input's boxes.
inline ControlSet combine_controls(const std::vector<const ControlSet*>& inputs, const std::vector<double>& weights) {
    if (inputs.empty() || inputs.size() != weights.size())
        throw Error(ErrorKind::invalid_argument, "combine_controls needs one weight per input");
    ControlSet out = *inputs.front();
    for (std::size_t n = 0; n < out.xi1.size(); ++n) {
        out.xi1[n] *= 0.0;
        out.xi2[n] *= 0.0;
    }
    for (std::size_t k = 0; k < inputs.size(); ++k) {
        const ControlSet& in = *inputs[k];
        if (in.xi1.size() != out.xi1.size() || in.xi2.size() != out.xi2.size())
            throw Error(ErrorKind::shape, "control series lengths differ");
        for (std::size_t n = 0; n < out.xi1.size(); ++n) {
            out.xi1[n].axpy(weights[k], in.xi1[n]);
            out.xi2[n].axpy(weights[k], in.xi2[n]);
        }
    }
    bool any_full = false;
    for (const auto* in : inputs) any_full = any_full || in->mode == ControlMode::full;
    out.mode = any_full ? ControlMode::full : ControlMode::ph_only;
    return project_controls(std::move(out));
}

inline ControlSet combine_controls(const ControlSet& a, const ControlSet& b) {
    return combine_controls({&a, &b}, {0.5, 0.5});
}

}  // namespace gbm

#endif
