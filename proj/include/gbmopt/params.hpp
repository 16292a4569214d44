#ifndef GBMOPT_PARAMS_HPP
#define GBMOPT_PARAMS_HPP

#include <algorithm>
#include <array>
#include <cstddef>
#include <string_view>
#include <vector>

#include "gbmopt/core.hpp"

namespace gbm {

/// Coefficient fields of the model, in the order sigma, kappa, delta, alpha, beta, mu.
enum class Param : std::size_t { sigma = 0, kappa, delta, alpha, beta, mu };

inline constexpr std::size_t kParamCount = 6;
inline constexpr std::array<Param, kParamCount> kAllParams{Param::sigma, Param::kappa, Param::delta,
                                                           Param::alpha, Param::beta,  Param::mu};

inline constexpr std::string_view param_name(Param p) noexcept {
    constexpr std::array<std::string_view, kParamCount> names{"sigma", "kappa", "delta", "alpha", "beta", "mu"};
    return names[static_cast<std::size_t>(p)];
}

struct Bounds {
    double lower;
    double upper;

    double clamp(double v) const noexcept { return std::clamp(v, lower, upper); }
    bool contains(double v) const noexcept { return v >= lower && v <= upper; }
    friend bool operator==(const Bounds&, const Bounds&) = default;
};

using ParamBounds = std::array<Bounds, kParamCount>;

/// Admissible boxes for (sigma, kappa, delta, alpha, beta, mu).
inline constexpr ParamBounds default_param_bounds() noexcept {
    return {{{1e-4, 1e-2}, {-1e-2, 1e-2}, {1e-4, 1e-2}, {1e-4, 10.0}, {1e-4, 10.0}, {1e-4, 10.0}}};
}

/// Six space-time coefficient fields, each with nt + 1 slices, plus their boxes.
/// Slice n drives the step from t_n to t_{n+1}; the terminal slice is carried
/// for alignment with the state trajectory but does not enter the dynamics.
struct ParamSet {
    std::array<FieldSeries, kParamCount> fields;
    ParamBounds bounds = default_param_bounds();

    static ParamSet uniform(const Grid2D& grid, std::size_t slices, const std::array<double, kParamCount>& values,
                            const ParamBounds& bounds = default_param_bounds()) {
        ParamSet out;
        out.bounds = bounds;
        for (std::size_t c = 0; c < kParamCount; ++c) out.fields[c] = constant_series(grid, slices, values[c]);
        return out;
    }

    FieldSeries& operator[](Param p) noexcept { return fields[static_cast<std::size_t>(p)]; }
    const FieldSeries& operator[](Param p) const noexcept { return fields[static_cast<std::size_t>(p)]; }

    std::size_t slices() const noexcept { return fields[0].size(); }
    const Grid2D& grid() const { return fields[0].at(0).grid(); }

    void check_shape(const Grid2D& grid, std::size_t slices_expected) const {
        for (const auto& series : fields) {
            if (series.size() != slices_expected)
                throw Error(ErrorKind::shape, "parameter series length does not match the time grid");
            for (const auto& f : series) require_same_grid(f.grid(), grid, "parameter slice");
        }
    }

    bool in_box() const noexcept {
        for (std::size_t c = 0; c < kParamCount; ++c)
            for (const auto& f : fields[c])
                for (double v : f.values())
                    if (!bounds[c].contains(v)) return false;
        return true;
    }

    friend bool operator==(const ParamSet&, const ParamSet&) = default;
};

/// Componentwise clamp onto the boxes; idempotent.
inline ParamSet project_box(ParamSet theta) {
    for (std::size_t c = 0; c < kParamCount; ++c)
        for (auto& f : theta.fields[c])
            for (double& v : f.values()) v = theta.bounds[c].clamp(v);
    return theta;
}

/// Pointwise weighted combination sum_k w_k theta_k, projected onto the boxes
/// of the first input. Weights are used as given.
inline ParamSet combine_params(const std::vector<const ParamSet*>& inputs, const std::vector<double>& weights) {
    if (inputs.empty() || inputs.size() != weights.size())
        throw Error(ErrorKind::invalid_argument, "combine_params needs one weight per input");
    const ParamSet& first = *inputs.front();
    ParamSet out = first;
    for (std::size_t c = 0; c < kParamCount; ++c)
        for (auto& f : out.fields[c]) f *= 0.0;
    for (std::size_t k = 0; k < inputs.size(); ++k) {
        const ParamSet& in = *inputs[k];
        in.check_shape(first.grid(), first.slices());
        for (std::size_t c = 0; c < kParamCount; ++c)
            for (std::size_t n = 0; n < out.slices(); ++n) out.fields[c][n].axpy(weights[k], in.fields[c][n]);
    }
    return project_box(std::move(out));
}

inline ParamSet combine_params(const ParamSet& a, const ParamSet& b, double weight_a = 0.5) {
    return combine_params({&a, &b}, {weight_a, 1.0 - weight_a});
}

}  // namespace gbm

#endif
