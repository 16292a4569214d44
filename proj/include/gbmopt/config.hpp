#ifndef GBMOPT_CONFIG_HPP
#define GBMOPT_CONFIG_HPP

// Run configuration and its flat "[section] key = value" text format. All
// defaults reproduce the reference setup, so an empty file is a valid config.

#include <array>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>

#include "gbmopt/core.hpp"
#include "gbmopt/params.hpp"

namespace gbm {

/// Scalar factors on the kappa advection flux, the delta pH-taxis flux and proton diffusion.
struct ScalarFactors {
    double kappa = 0.01;
    double delta = 0.001;
    double ph = 0.01;
};

struct ControlSettings {
    Bounds xi1{0.0, 10.0};
    Bounds xi2{-10.0, 10.0};
    double lambda_xi = 1e-4;
};

struct ImagingParams {
    std::optional<int> threshold;  // Otsu when unset
    int gaussian_k = 5;
    double gaussian_s = 1.0;
    int median_k = 3;
    int open_radius = 1;
    std::size_t out_nx = 0;  // 0 keeps the input width
    std::size_t out_ny = 0;
};

struct RunConfig {
    Grid2D grid{64, 64, 0.1, 0.1};
    TimeGrid time{100, 0.1};
    double u1_init = 0.2;
    double u2_init = 0.5;
    std::optional<ScalarField> u1_init_field;
    std::optional<ScalarField> u2_init_field;
    std::array<double, kParamCount> lambda{1e-4, 1e-4, 1e-4, 1e-4, 1e-4, 1e-4};
    std::optional<double> epsilon;  // default: 1e-4 * ||O||^2
    ScalarFactors gamma;
    std::array<double, kParamCount> theta_init{0, 0, 0, 0, 0, 0};
    ParamBounds bounds = default_param_bounds();
    std::size_t max_iters = 200;
    std::uint64_t seed = 0;
    ControlSettings control;
    ImagingParams imaging;

    ScalarField initial_u1() const { return u1_init_field ? *u1_init_field : ScalarField(grid, u1_init); }
    ScalarField initial_u2() const { return u2_init_field ? *u2_init_field : ScalarField(grid, u2_init); }

    void validate() const {
        grid.validate();
        for (double l : lambda)
            if (!(l >= 0.0)) throw Error(ErrorKind::config, "regularization weights must be non-negative");
        if (epsilon && !(*epsilon > 0.0)) throw Error(ErrorKind::config, "stopping tolerance must be positive");
        if (!(gamma.ph > 0.0)) throw Error(ErrorKind::config, "proton diffusion factor must be positive");
        for (const auto& b : bounds)
            if (!(b.lower <= b.upper)) throw Error(ErrorKind::config, "box lower bound exceeds upper bound");
        if (control.xi1.lower < 0.0) throw Error(ErrorKind::config, "xi1 lower bound must be non-negative");
        if (!(control.lambda_xi >= 0.0)) throw Error(ErrorKind::config, "lambda_xi must be non-negative");
        if (u1_init_field) require_same_grid(u1_init_field->grid(), grid, "u1 initial field");
        if (u2_init_field) require_same_grid(u2_init_field->grid(), grid, "u2 initial field");
    }
};

namespace config_detail {

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

inline double to_double(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        const double d = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        throw Error(ErrorKind::config, "expected a number for '" + key + "', got '" + v + "'");
    }
}

inline std::uint64_t to_uint(const std::string& key, const std::string& v) {
    const double d = to_double(key, v);
    if (d < 0 || d != static_cast<double>(static_cast<std::uint64_t>(d)))
        throw Error(ErrorKind::config, "expected a non-negative integer for '" + key + "'");
    return static_cast<std::uint64_t>(d);
}

inline Bounds to_bounds(const std::string& key, const std::string& v) {
    const auto comma = v.find(',');
    if (comma == std::string::npos) throw Error(ErrorKind::config, "expected 'lower, upper' for '" + key + "'");
    return {to_double(key, trim(v.substr(0, comma))), to_double(key, trim(v.substr(comma + 1)))};
}

}  // namespace config_detail

/// Parses "[section]" headers and "key = value" lines; '#' and ';' start comments.
/// Returns "section.key" -> value in file order.
inline std::map<std::string, std::string> parse_key_values(std::istream& in) {
    using config_detail::trim;
    std::map<std::string, std::string> out;
    std::string line;
    std::string section;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find_first_of("#;");
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') throw Error(ErrorKind::config, "bad section header on line " + std::to_string(lineno));
            section = trim(line.substr(1, line.size() - 2));
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw Error(ErrorKind::config, "expected key = value on line " + std::to_string(lineno));
        const std::string key = trim(line.substr(0, eq));
        out[section.empty() ? key : section + "." + key] = trim(line.substr(eq + 1));
    }
    return out;
}

/// Applies parsed keys to a config. Unknown keys are rejected. Keys naming
/// files (state.u1_init_file, ...) are returned untouched in `deferred` for the caller.
inline void apply_key_values(RunConfig& cfg, const std::map<std::string, std::string>& kv,
                             std::map<std::string, std::string>* deferred = nullptr) {
    using namespace config_detail;
    std::optional<double> final_time;
    std::optional<std::size_t> steps;
    std::optional<double> tau;
    for (const auto& [key, v] : kv) {
        if (key == "grid.nx") cfg.grid.nx = to_uint(key, v);
        else if (key == "grid.ny") cfg.grid.ny = to_uint(key, v);
        else if (key == "grid.hx") cfg.grid.hx = to_double(key, v);
        else if (key == "grid.hy") cfg.grid.hy = to_double(key, v);
        else if (key == "grid.h") cfg.grid.hx = cfg.grid.hy = to_double(key, v);
        else if (key == "time.T") final_time = to_double(key, v);
        else if (key == "time.nt") steps = to_uint(key, v);
        else if (key == "time.tau") tau = to_double(key, v);
        else if (key == "state.u1_init") cfg.u1_init = to_double(key, v);
        else if (key == "state.u2_init") cfg.u2_init = to_double(key, v);
        else if (key == "model.gamma_kappa") cfg.gamma.kappa = to_double(key, v);
        else if (key == "model.gamma_delta") cfg.gamma.delta = to_double(key, v);
        else if (key == "model.gamma_ph") cfg.gamma.ph = to_double(key, v);
        else if (key == "optimizer.lambda") cfg.lambda.fill(to_double(key, v));
        else if (key == "optimizer.epsilon") cfg.epsilon = to_double(key, v);
        else if (key == "optimizer.max_iters") cfg.max_iters = to_uint(key, v);
        else if (key == "optimizer.seed") cfg.seed = to_uint(key, v);
        else if (key == "optimizer.theta_init") cfg.theta_init.fill(to_double(key, v));
        else if (key == "control.lambda_xi") cfg.control.lambda_xi = to_double(key, v);
        else if (key == "control.xi1_bounds") cfg.control.xi1 = to_bounds(key, v);
        else if (key == "control.xi2_bounds") cfg.control.xi2 = to_bounds(key, v);
        else if (key == "imaging.threshold") {
            if (v == "otsu") cfg.imaging.threshold.reset();
            else cfg.imaging.threshold = static_cast<int>(to_uint(key, v));
        } else if (key == "imaging.gaussian_k") cfg.imaging.gaussian_k = static_cast<int>(to_uint(key, v));
        else if (key == "imaging.gaussian_s") cfg.imaging.gaussian_s = to_double(key, v);
        else if (key == "imaging.median_k") cfg.imaging.median_k = static_cast<int>(to_uint(key, v));
        else if (key == "imaging.open_radius") cfg.imaging.open_radius = static_cast<int>(to_uint(key, v));
        else if (key == "imaging.out_nx") cfg.imaging.out_nx = to_uint(key, v);
        else if (key == "imaging.out_ny") cfg.imaging.out_ny = to_uint(key, v);
        else if (key == "state.u1_init_file" || key == "state.u2_init_file" || key == "control.neutral_target_file") {
            if (deferred) (*deferred)[key] = v;
        } else {
            bool matched = false;
            for (Param p : kAllParams) {
                const auto c = static_cast<std::size_t>(p);
                const std::string name(param_name(p));
                if (key == "optimizer.lambda_" + name) cfg.lambda[c] = to_double(key, v), matched = true;
                else if (key == "optimizer.theta_init_" + name) cfg.theta_init[c] = to_double(key, v), matched = true;
                else if (key == "bounds." + name) cfg.bounds[c] = to_bounds(key, v), matched = true;
            }
            if (!matched) throw Error(ErrorKind::config, "unknown config key '" + key + "'");
        }
    }
    if (steps && tau) cfg.time = TimeGrid(*steps, *tau);
    else if (steps && final_time) cfg.time = TimeGrid::from_final_time(*final_time, *steps);
    else if (tau && final_time) cfg.time = TimeGrid(static_cast<std::size_t>(std::llround(*final_time / *tau)), *tau);
    else if (steps) cfg.time = TimeGrid(*steps, cfg.time.tau());
    else if (tau) cfg.time = TimeGrid(cfg.time.steps(), *tau);
    else if (final_time) cfg.time = TimeGrid::from_final_time(*final_time, cfg.time.steps());
}

inline RunConfig load_config(const std::string& path, std::map<std::string, std::string>* deferred = nullptr) {
    RunConfig cfg;
    if (path.empty()) return cfg;
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::io, "cannot open config file '" + path + "'");
    apply_key_values(cfg, parse_key_values(in), deferred);
    return cfg;
}

}  // namespace gbm

#endif
