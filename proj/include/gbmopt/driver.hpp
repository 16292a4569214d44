#ifndef GBMOPT_DRIVER_HPP
#define GBMOPT_DRIVER_HPP

// Command implementations behind the gbmopt executable: configuration
// loading, run manifests and the on-disk layout of one run directory.
//
//   theta_<name>.pfld     parameter series, one per coefficient
//   xi1.pfld, xi2.pfld    control series
//   u1.pfld, u2.pfld      state trajectory
//   p1.pfld, p2.pfld      adjoint trajectory (estimate only)
//   tumor-final.pgm, acid-final.pgm, error-map.pgm
//   manifest.json

#include <chrono>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "gbmopt/archive.hpp"
#include "gbmopt/config.hpp"
#include "gbmopt/control.hpp"
#include "gbmopt/digest.hpp"
#include "gbmopt/forward.hpp"
#include "gbmopt/imaging.hpp"
#include "gbmopt/optimizer.hpp"

#ifndef GBMOPT_VERSION
#define GBMOPT_VERSION "0.1.0"
#endif

namespace gbm {

enum ExitCode : int {
    exit_ok = 0,
    exit_failure = 1,  // usage, shape or argument errors
    exit_config = 2,
    exit_io = 3,
    exit_instability = 4,
    exit_stall = 5,
};

inline int exit_code_for(ErrorKind k) noexcept {
    switch (k) {
        case ErrorKind::config: return exit_config;
        case ErrorKind::io: return exit_io;
        case ErrorKind::instability: return exit_instability;
        case ErrorKind::stall: return exit_stall;
        default: return exit_failure;
    }
}

using json = nlohmann::ordered_json;

inline json to_json(const MetricsReport& m) {
    json j{{"e2", m.e2}, {"e_inf", m.e_inf}, {"e_rel", nullptr}, {"e_domain", m.e_domain}};
    if (m.rel_defined) j["e_rel"] = m.e_rel;
    return j;
}

inline json to_json(const RunConfig& c) {
    json j;
    j["grid"] = {{"nx", c.grid.nx}, {"ny", c.grid.ny}, {"hx", c.grid.hx}, {"hy", c.grid.hy}};
    j["time"] = {{"nt", c.time.steps()}, {"tau", c.time.tau()}, {"T", c.time.final_time()}};
    j["state"] = {{"u1_init", c.u1_init}, {"u2_init", c.u2_init},
                  {"u1_init_field", c.u1_init_field.has_value()}, {"u2_init_field", c.u2_init_field.has_value()}};
    j["model"] = {{"gamma_kappa", c.gamma.kappa}, {"gamma_delta", c.gamma.delta}, {"gamma_ph", c.gamma.ph}};
    json lambda, init, bounds;
    for (Param p : kAllParams) {
        const auto k = static_cast<std::size_t>(p);
        const std::string name(param_name(p));
        lambda[name] = c.lambda[k];
        init[name] = c.theta_init[k];
        bounds[name] = {c.bounds[k].lower, c.bounds[k].upper};
    }
    j["optimizer"] = {{"lambda", lambda},
                      {"theta_init", init},
                      {"epsilon", c.epsilon ? json(*c.epsilon) : json(nullptr)},
                      {"max_iters", c.max_iters},
                      {"seed", c.seed}};
    j["bounds"] = bounds;
    j["control"] = {{"lambda_xi", c.control.lambda_xi},
                    {"xi1_bounds", {c.control.xi1.lower, c.control.xi1.upper}},
                    {"xi2_bounds", {c.control.xi2.lower, c.control.xi2.upper}}};
    j["imaging"] = {{"threshold", c.imaging.threshold ? json(*c.imaging.threshold) : json("otsu")},
                    {"gaussian_k", c.imaging.gaussian_k},
                    {"gaussian_s", c.imaging.gaussian_s},
                    {"median_k", c.imaging.median_k},
                    {"open_radius", c.imaging.open_radius},
                    {"out_nx", c.imaging.out_nx},
                    {"out_ny", c.imaging.out_ny}};
    return j;
}

/// Record of one command invocation. Entries are only ever appended.
class RunManifest {
public:
    RunManifest(std::string command, const RunConfig& cfg)
        : start_(std::chrono::steady_clock::now()) {
        doc_["command"] = std::move(command);
        doc_["version"] = GBMOPT_VERSION;
        doc_["config"] = to_json(cfg);
        doc_["inputs"] = json::object();
        doc_["outputs"] = json::object();
    }

    void add_input(const std::string& path) { doc_["inputs"][path] = file_sha256(path); }
    void add_output(const std::filesystem::path& path) {
        doc_["outputs"][path.filename().string()] = file_sha256(path.string());
    }
    void add_iterations(const std::vector<IterationRecord>& history) {
        json& it = doc_["iterations"];
        if (it.is_null()) it = json::array();
        for (const auto& r : history)
            it.push_back({{"iteration", r.iteration},
                          {"cost", r.cost},
                          {"step", r.step},
                          {"trials", r.trials},
                          {"metrics", to_json(r.metrics)}});
    }
    json& operator[](const std::string& key) { return doc_[key]; }
    const json& document() const noexcept { return doc_; }

    /// Stamps the wall time and writes manifest.json into dir.
    void write(const std::filesystem::path& dir) {
        doc_["wall_time_s"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
        const std::string text = doc_.dump(2) + "\n";
        write_bytes((dir / "manifest.json").string(), std::vector<unsigned char>(text.begin(), text.end()));
    }

private:
    json doc_;
    std::chrono::steady_clock::time_point start_;
};

/// Loads a config file and resolves its file-valued keys relative to the file.
inline RunConfig load_run_config(const std::string& path, std::optional<std::uint64_t> seed = std::nullopt,
                                 std::string* neutral_target_file = nullptr) {
    std::map<std::string, std::string> deferred;
    RunConfig cfg = load_config(path, &deferred);
    const std::filesystem::path base = path.empty() ? std::filesystem::path{} : std::filesystem::path(path).parent_path();
    auto resolve = [&](const std::string& p) { return (base / p).string(); };
    auto single = [&](const std::string& key) {
        FieldArchive a = read_archive(resolve(deferred.at(key)));
        if (a.slices.size() != 1) throw Error(ErrorKind::config, key + " must hold a single field");
        return a.slices.front();
    };
    if (deferred.count("state.u1_init_file")) cfg.u1_init_field = single("state.u1_init_file");
    if (deferred.count("state.u2_init_file")) cfg.u2_init_field = single("state.u2_init_file");
    if (neutral_target_file && deferred.count("control.neutral_target_file"))
        *neutral_target_file = resolve(deferred.at("control.neutral_target_file"));
    if (seed) cfg.seed = *seed;
    return cfg;
}

/// Target archives define the spatial grid of a run.
inline ScalarField load_target(const std::string& path, RunConfig& cfg) {
    FieldArchive a = read_archive(path);
    if (a.slices.size() != 1) throw Error(ErrorKind::io, "'" + path + "' must hold a single field");
    cfg.grid = a.grid;
    return a.slices.front();
}

inline std::filesystem::path prepare_out_dir(const std::string& out) {
    if (out.empty()) throw Error(ErrorKind::config, "--out is required");
    std::error_code ec;
    std::filesystem::create_directories(out, ec);
    if (ec) throw Error(ErrorKind::io, "cannot create output directory '" + out + "': " + ec.message());
    return out;
}

inline std::filesystem::path theta_file(const std::filesystem::path& dir, Param p) {
    return dir / ("theta_" + std::string(param_name(p)) + ".pfld");
}

inline void write_params(const std::filesystem::path& dir, const ParamSet& theta, double tau, RunManifest& m) {
    for (Param p : kAllParams) {
        write_archive(theta_file(dir, p).string(), theta[p], tau);
        m.add_output(theta_file(dir, p));
    }
}

/// Reads theta_<name>.pfld from dir; the series must match the configured grids.
inline ParamSet read_params(const std::filesystem::path& dir, const RunConfig& cfg, RunManifest& m) {
    ParamSet theta;
    theta.bounds = cfg.bounds;
    for (Param p : kAllParams) {
        const std::string path = theta_file(dir, p).string();
        FieldArchive a = read_archive(path);
        m.add_input(path);
        theta[p] = std::move(a.slices);
    }
    theta.check_shape(cfg.grid, cfg.time.steps() + 1);
    return theta;
}

inline void write_controls(const std::filesystem::path& dir, const ControlSet& xi, double tau, RunManifest& m) {
    write_archive((dir / "xi1.pfld").string(), xi.xi1, tau);
    write_archive((dir / "xi2.pfld").string(), xi.xi2, tau);
    m.add_output(dir / "xi1.pfld");
    m.add_output(dir / "xi2.pfld");
}

inline ControlSet read_controls(const std::filesystem::path& dir, const RunConfig& cfg, RunManifest& m) {
    ControlSet xi = ControlSet::zero(cfg);
    for (auto [name, series] : {std::pair{"xi1.pfld", &xi.xi1}, std::pair{"xi2.pfld", &xi.xi2}}) {
        const std::string path = (dir / name).string();
        FieldArchive a = read_archive(path);
        m.add_input(path);
        if (a.slices.size() != cfg.time.steps() + 1) throw Error(ErrorKind::shape, "control series length mismatch");
        for (const auto& f : a.slices) require_same_grid(f.grid(), cfg.grid, "control slice");
        *series = std::move(a.slices);
    }
    bool any_xi1 = false;
    for (const auto& f : xi.xi1) any_xi1 = any_xi1 || norm_linf(f) > 0.0;
    xi.mode = any_xi1 ? ControlMode::full : ControlMode::ph_only;
    return xi;
}

/// Final tumour and acid panels plus, given a target, the squared-error map
/// scaled by its maximum (recorded in the manifest).
inline void write_panels(const std::filesystem::path& dir, const StateTrajectory& traj, const ScalarField* target,
                         RunManifest& m) {
    const std::filesystem::path tumor = dir / "tumor-final.pgm";
    const std::filesystem::path acid = dir / "acid-final.pgm";
    export_pgm(traj.final_u1(), tumor.string());
    export_pgm(traj.final_u2(), acid.string());
    m.add_output(tumor);
    m.add_output(acid);
    if (!target) return;
    ScalarField err = traj.final_u1() - *target;
    for (double& v : err.values()) v *= v;
    const double peak = err.max();
    m["error_map_scale"] = peak;
    if (peak > 0.0) err *= 1.0 / peak;
    const std::filesystem::path map = dir / "error-map.pgm";
    export_pgm(err, map.string());
    m.add_output(map);
}

inline void write_trajectory(const std::filesystem::path& dir, const StateTrajectory& traj, RunManifest& m) {
    write_archive((dir / "u1.pfld").string(), traj.u1, traj.time.tau());
    write_archive((dir / "u2.pfld").string(), traj.u2, traj.time.tau());
    m.add_output(dir / "u1.pfld");
    m.add_output(dir / "u2.pfld");
}

inline json stability_json(const ParamSet& theta, const RunConfig& cfg) {
    const StabilityReport s = stability_check(theta, cfg);
    return {{"parabolic", s.parabolic},
            {"advective", std::isinf(s.advective) ? json(nullptr) : json(s.advective)},
            {"max_step", s.max_step},
            {"admissible", s.admissible}};
}

struct CommonOptions {
    std::string config;
    std::string out;
    std::optional<std::uint64_t> seed;
};

inline int cmd_preprocess(const CommonOptions& o, const std::string& image) {
    RunConfig cfg = load_run_config(o.config, o.seed);
    const auto dir = prepare_out_dir(o.out);
    RunManifest m("preprocess", cfg);
    m.add_input(image);
    const ScalarField f = preprocess(import_raster(image), cfg.imaging, cfg.grid.hx, cfg.grid.hy);
    write_archive((dir / "target.pfld").string(), f);
    export_pgm(f, (dir / "target.pgm").string());
    m.add_output(dir / "target.pfld");
    m.add_output(dir / "target.pgm");
    m["field"] = {{"nx", f.grid().nx}, {"ny", f.grid().ny}, {"sha256", field_digest(f)}};
    m.write(dir);
    return exit_ok;
}

inline int cmd_estimate(const CommonOptions& o, const std::string& target_path) {
    RunConfig cfg = load_run_config(o.config, o.seed);
    const ScalarField target = load_target(target_path, cfg);
    cfg.validate();
    const auto dir = prepare_out_dir(o.out);
    RunManifest m("estimate", cfg);
    m.add_input(target_path);
    m["stability"] = stability_json(initial_params(cfg), cfg);
    const PgdResult r = pgd_run(target, cfg);
    m.add_iterations(r.history);
    m["stop_reason"] = stop_reason_name(r.reason);
    m["epsilon"] = r.epsilon;
    m["accepted_steps"] = r.accepted;
    m["final"] = {{"cost", r.cost.total},
                  {"terminal_misfit", r.cost.terminal_misfit},
                  {"regularization", r.cost.regularization},
                  {"metrics", to_json(r.metrics)}};
    write_params(dir, r.theta, cfg.time.tau(), m);
    write_trajectory(dir, r.traj, m);
    const AdjointTrajectory adj = solve_adjoint(r.traj, r.theta, target, cfg);
    write_archive((dir / "p1.pfld").string(), adj.p1, cfg.time.tau());
    write_archive((dir / "p2.pfld").string(), adj.p2, cfg.time.tau());
    m.add_output(dir / "p1.pfld");
    m.add_output(dir / "p2.pfld");
    write_panels(dir, r.traj, &target, m);
    m.write(dir);
    return r.stalled() ? exit_stall : exit_ok;
}

inline int cmd_neutralize(const CommonOptions& o, const std::string& theta_dir, const std::string& target_path,
                          const std::string& mode_name) {
    std::string target_file = target_path;
    std::string configured_target;
    RunConfig cfg = load_run_config(o.config, o.seed, &configured_target);
    if (target_file.empty()) target_file = configured_target;
    ControlMode mode;
    if (mode_name == "full") mode = ControlMode::full;
    else if (mode_name == "ph-only") mode = ControlMode::ph_only;
    else throw Error(ErrorKind::config, "--mode must be 'full' or 'ph-only'");

    const auto dir = prepare_out_dir(o.out);
    RunManifest m("neutralize", cfg);
    ScalarField target;
    if (!target_file.empty()) {
        target = load_target(target_file, cfg);
        m.add_input(target_file);
    } else {
        cfg.grid = read_archive(theta_file(theta_dir, Param::sigma).string()).grid;
        target = default_neutral_target(cfg);
    }
    m["config"] = to_json(cfg);
    m["mode"] = mode_name;
    cfg.validate();
    const ParamSet theta = read_params(theta_dir, cfg, m);
    const NeutralizeResult r = neutralize(theta, target, cfg, mode);
    m.add_iterations(r.history);
    m["stop_reason"] = stop_reason_name(r.reason);
    m["accepted_steps"] = r.accepted;
    m["baseline_metrics"] = to_json(r.baseline);
    m["final"] = {{"cost", r.cost.total}, {"metrics", to_json(r.metrics)}};
    m["misfit_reduction"] = r.baseline.e2 > 0.0 ? json(1.0 - r.metrics.e2 / r.baseline.e2) : json(nullptr);
    write_controls(dir, r.xi, cfg.time.tau(), m);
    write_trajectory(dir, r.traj, m);
    write_panels(dir, r.traj, &target, m);
    m.write(dir);
    return r.reason == StopReason::stalled ? exit_stall : exit_ok;
}

inline int cmd_synthesize(const CommonOptions& o, const std::vector<std::string>& theta_dirs,
                          std::vector<double> weights, const std::vector<std::string>& xi_dirs) {
    if (theta_dirs.empty()) throw Error(ErrorKind::config, "synthesize needs at least one --theta directory");
    if (weights.empty()) weights.assign(theta_dirs.size(), 1.0 / static_cast<double>(theta_dirs.size()));
    if (weights.size() != theta_dirs.size()) throw Error(ErrorKind::config, "one weight per --theta directory");
    RunConfig cfg = load_run_config(o.config, o.seed);
    cfg.grid = read_archive(theta_file(theta_dirs.front(), Param::sigma).string()).grid;
    cfg.validate();
    const auto dir = prepare_out_dir(o.out);
    RunManifest m("synthesize", cfg);
    m["weights"] = weights;
    m["sources"] = theta_dirs;

    std::vector<ParamSet> thetas;
    for (const auto& d : theta_dirs) thetas.push_back(read_params(d, cfg, m));
    std::vector<const ParamSet*> ptrs;
    for (const auto& t : thetas) ptrs.push_back(&t);
    const ParamSet theta = combine_params(ptrs, weights);
    write_params(dir, theta, cfg.time.tau(), m);

    StateTrajectory traj;
    if (!xi_dirs.empty()) {
        std::vector<ControlSet> xis;
        for (const auto& d : xi_dirs) xis.push_back(read_controls(d, cfg, m));
        std::vector<const ControlSet*> xp;
        for (const auto& x : xis) xp.push_back(&x);
        const ControlSet xi =
            combine_controls(xp, std::vector<double>(xis.size(), 1.0 / static_cast<double>(xis.size())));
        m["control_sources"] = xi_dirs;
        write_controls(dir, xi, cfg.time.tau(), m);
        traj = solve_forward_controlled(theta, xi, cfg);
    } else {
        traj = solve_forward(theta, cfg);
    }
    write_trajectory(dir, traj, m);
    write_panels(dir, traj, nullptr, m);
    m.write(dir);
    return exit_ok;
}

inline int cmd_perturb(const CommonOptions& o, const std::string& target_path, int k, double s, std::size_t n) {
    RunConfig cfg = load_run_config(o.config, o.seed);
    const ScalarField target = load_target(target_path, cfg);
    const auto dir = prepare_out_dir(o.out);
    RunManifest m("perturb", cfg);
    m.add_input(target_path);
    m["perturbation"] = {{"k", k}, {"s", s}, {"n", n}};
    const ScalarField p = perturb(target, k, s, n);
    write_archive((dir / "perturbed.pfld").string(), p);
    export_pgm(p, (dir / "perturbed.pgm").string());
    m.add_output(dir / "perturbed.pfld");
    m.add_output(dir / "perturbed.pgm");
    m["total_variation"] = {{"before", total_variation(target)}, {"after", total_variation(p)}};
    m.write(dir);
    return exit_ok;
}

inline int cmd_forward(const CommonOptions& o, const std::string& theta_dir) {
    RunConfig cfg = load_run_config(o.config, o.seed);
    if (!theta_dir.empty()) cfg.grid = read_archive(theta_file(theta_dir, Param::sigma).string()).grid;
    cfg.validate();
    const auto dir = prepare_out_dir(o.out);
    RunManifest m("forward", cfg);
    const ParamSet theta = theta_dir.empty() ? initial_params(cfg) : read_params(theta_dir, cfg, m);
    m["stability"] = stability_json(theta, cfg);
    const StateTrajectory traj = solve_forward(theta, cfg);
    if (theta_dir.empty()) write_params(dir, theta, cfg.time.tau(), m);
    write_trajectory(dir, traj, m);
    write_panels(dir, traj, nullptr, m);
    m["final_mass"] = integral(traj.final_u1());
    m.write(dir);
    return exit_ok;
}

/// Parses argv and runs one subcommand; errors are reported on stderr and
/// mapped to exit codes.
inline int run_cli(int argc, const char* const* argv) {
    CLI::App app{"Parameter estimation, neutralisation and synthesis for tumour density patterns"};
    app.require_subcommand(1);
    app.set_version_flag("--version", GBMOPT_VERSION);

    CommonOptions common;
    std::optional<std::uint64_t> seed_value;
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", common.config, "Configuration file (key = value with [sections])");
        sub->add_option("--out", common.out, "Output directory")->required();
        sub->add_option("--seed", seed_value, "Seed recorded in the run configuration");
    };

    std::string image, target, theta_dir, mode = "full", target_opt;
    std::vector<std::string> theta_dirs, xi_dirs;
    std::vector<double> weights;
    int k = 1;
    double s = 1.0;
    std::size_t n = 1;

    auto* pre = app.add_subcommand("preprocess", "Image to density field");
    add_common(pre);
    pre->add_option("--image", image, "Binary PGM/PPM input")->required();

    auto* est = app.add_subcommand("estimate", "Recover parameter fields for a target");
    add_common(est);
    est->add_option("--target", target, "Target field archive")->required();

    auto* neu = app.add_subcommand("neutralize", "Optimise neutralising controls for frozen parameters");
    add_common(neu);
    neu->add_option("--theta", theta_dir, "Directory with theta_<name>.pfld")->required();
    neu->add_option("--target", target_opt, "Neutral target archive (default: uniform initial density)");
    neu->add_option("--mode", mode, "full or ph-only")->check(CLI::IsMember({"full", "ph-only"}));

    auto* syn = app.add_subcommand("synthesize", "Combine parameter sets and run the model");
    add_common(syn);
    syn->add_option("--theta", theta_dirs, "Parameter directories")->required();
    syn->add_option("--weights", weights, "One weight per parameter directory (default: equal)");
    syn->add_option("--xi", xi_dirs, "Control directories to average and apply");

    auto* per = app.add_subcommand("perturb", "Downsample then blur a target field");
    add_common(per);
    per->add_option("--target", target, "Field archive")->required();
    per->add_option("--k", k, "Gaussian kernel size (odd)");
    per->add_option("--s", s, "Gaussian standard deviation");
    per->add_option("--n", n, "Downsampling factor");

    auto* fwd = app.add_subcommand("forward", "Run the state model");
    add_common(fwd);
    fwd->add_option("--theta", theta_dir, "Parameter directory (default: projected initial values)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? exit_ok : exit_failure;
    }
    common.seed = seed_value;

    try {
        if (*pre) return cmd_preprocess(common, image);
        if (*est) return cmd_estimate(common, target);
        if (*neu) return cmd_neutralize(common, theta_dir, target_opt, mode);
        if (*syn) return cmd_synthesize(common, theta_dirs, weights, xi_dirs);
        if (*per) return cmd_perturb(common, target, k, s, n);
        if (*fwd) return cmd_forward(common, theta_dir);
    } catch (const Error& e) {
        std::cerr << "gbmopt: " << e.what() << "\n";
        return exit_code_for(e.kind());
    } catch (const std::exception& e) {
        std::cerr << "gbmopt: " << e.what() << "\n";
        return exit_failure;
    }
    return exit_failure;
}

}  // namespace gbm

#endif
