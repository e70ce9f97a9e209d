#pragma once

// Command-line front end. Subcommands: coverage, sweep, simulate, validate.
// Exit codes: 0 success, 1 computation failure, 2 usage or configuration error.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dronecov/analytic_coverage.hpp"
#include "dronecov/config.hpp"
#include "dronecov/errors.hpp"
#include "dronecov/experiments.hpp"
#include "dronecov/monte_carlo.hpp"

namespace dronecov::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

inline ConfigFile load_config(const std::string& path) {
    if (path.empty() || path == "defaults") return ConfigFile{};
    std::ifstream in(path);
    if (!in) throw ConfigError("config", 0, "cannot open '" + path + "'");
    std::ostringstream text;
    text << in.rdbuf();
    return parse_config(text.str());
}

/// path with "_label" inserted before the extension.
inline std::string variant_path(const std::string& path, const std::string& label) {
    const std::filesystem::path p(path);
    return (p.parent_path() / (p.stem().string() + "_" + label + p.extension().string())).string();
}

namespace detail {

struct Common {
    std::string config;
    std::optional<unsigned> workers;
    std::optional<std::uint64_t> seed;
    std::string output;
    std::optional<std::size_t> drops;
};

inline void add_common(CLI::App* cmd, Common& c) {
    cmd->add_option("--config", c.config, "config file, or 'defaults'");
    cmd->add_option("--workers", c.workers, "worker threads (0 = all cores)");
    cmd->add_option("--seed", c.seed, "simulation seed");
    cmd->add_option("--output", c.output, "output file");
    cmd->add_option("--drops", c.drops, "Monte Carlo drops")->check(CLI::PositiveNumber);
}

inline ConfigFile resolve(const Common& c) {
    ConfigFile cfg = load_config(c.config);
    if (c.workers) cfg.simulation.workers = *c.workers;
    if (c.seed) cfg.simulation.seed = *c.seed;
    if (c.drops) cfg.simulation.num_drops = *c.drops;
    return cfg;
}

// Writes through a file when a path is given, else to the fallback stream.
template <class Body>
void emit(const std::string& path, std::ostream& fallback, Body&& body) {
    if (path.empty()) {
        body(fallback);
        return;
    }
    std::ofstream file(path, std::ios::binary);
    if (!file) throw ConfigError("output", 0, "cannot write '" + path + "'");
    body(file);
}

inline std::string fmt(double v) { return dronecov::detail::format_real(v); }

}  // namespace detail

inline int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Downlink coverage of aerial and ground users in a Poisson cellular network", "dronecov"};
    app.require_subcommand(1);

    detail::Common cov_opts, sweep_opts, sim_opts, val_opts;
    std::string cov_method = "analytic";
    auto* coverage = app.add_subcommand("coverage", "coverage probability of one scenario");
    detail::add_common(coverage, cov_opts);
    coverage->add_option("--method", cov_method, "analytic | rayleigh | monte-carlo");

    std::string preset;
    std::vector<std::string> sweep_params, sweep_grids, sweep_methods;
    bool omit_timing = false;
    auto* sweep_cmd = app.add_subcommand("sweep", "parameter sweep written as CSV");
    detail::add_common(sweep_cmd, sweep_opts);
    sweep_cmd->add_option("--preset", preset, "figure2 | figure3-ground | figure3-aerial | figure4");
    sweep_cmd->add_option("--sweep-param", sweep_params, "scenario key to sweep (up to two)");
    sweep_cmd->add_option("--sweep-grid", sweep_grids, "start:stop:step or v1,v2,... (one per --sweep-param)");
    sweep_cmd->add_option("--method", sweep_methods, "analytic, rayleigh, monte-carlo")->delimiter(',');
    sweep_cmd->add_flag("--omit-timing", omit_timing, "write wall_time_s = 0 for reproducible bytes");

    std::optional<double> serving_distance;
    std::string serving_state;
    auto* simulate = app.add_subcommand("simulate", "Monte Carlo coverage estimate");
    detail::add_common(simulate, sim_opts);
    simulate->add_option("--serving-distance", serving_distance, "condition on serving ground distance [m]");
    simulate->add_option("--serving-state", serving_state, "los | nlos (needs --serving-distance)");

    auto* validate_cmd = app.add_subcommand("validate", "analytic vs simulation cross-checks");
    detail::add_common(validate_cmd, val_opts);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n" << app.help();
        return kExitUsage;
    }

    try {
        if (*coverage) {
            const ConfigFile cfg = detail::resolve(cov_opts);
            const NetworkScenario scn = cfg.scenario();
            const Method method = parse_method(cov_method);
            std::ostringstream text;
            if (method == Method::kMonteCarlo) {
                const CoverageEstimate e = estimate_coverage(scn, cfg.simulation);
                text << "method=monte-carlo\nprobability=" << detail::fmt(e.probability)
                     << "\nerror_estimate=" << detail::fmt(e.std_error) << "\n";
            } else {
                const CoverageResult r = method == Method::kAnalytic ? coverage_probability(scn, cfg.quadrature)
                                                                     : rayleigh_coverage(scn, cfg.quadrature);
                text << "method=" << to_string(method) << "\nprobability=" << detail::fmt(r.probability)
                     << "\nerror_estimate=" << detail::fmt(r.error_estimate)
                     << "\ntruncation_radius_m=" << detail::fmt(r.diagnostics.truncation_radius)
                     << "\nouter_evaluations=" << r.diagnostics.outer_evaluations
                     << "\ninner_integrals=" << r.diagnostics.inner_integrals << "\n";
            }
            detail::emit(cov_opts.output, out, [&](std::ostream& o) { o << text.str(); });
            return kExitOk;
        }

        if (*sweep_cmd) {
            SweepSpec spec = preset.empty() ? SweepSpec{} : preset_by_name(preset);
            const ConfigFile cfg = detail::resolve(sweep_opts);
            if (!sweep_opts.config.empty() || preset.empty()) {
                // A user config replaces the preset's base but keeps its user height.
                const double ue = spec.base.scenario_config.ue_height_m;
                const bool keep_ue = !preset.empty() && preset.rfind("figure3", 0) == 0;
                spec.base = cfg;
                if (keep_ue) spec.base.scenario_config.ue_height_m = ue;
            } else {
                spec.base.simulation = cfg.simulation;
            }
            if (sweep_params.size() != sweep_grids.size())
                throw ConfigError("sweep-grid", 0, "give one --sweep-grid per --sweep-param");
            if (!sweep_params.empty()) {
                spec.axes.clear();
                for (std::size_t i = 0; i < sweep_params.size(); ++i)
                    spec.axes.push_back({sweep_params[i], parse_grid(sweep_grids[i], sweep_params[i])});
            }
            if (spec.axes.empty()) throw ConfigError("sweep-param", 0, "no sweep axis (use --preset or --sweep-param)");
            if (!sweep_methods.empty()) {
                spec.methods.clear();
                for (const auto& m : sweep_methods) spec.methods.push_back(parse_method(m));
            }
            if (spec.variants.size() > 1 && sweep_opts.output.empty())
                throw ConfigError("output", 0, "this sweep has several variants; --output is required");

            const SweepResult result = sweep(spec, {spec.base.simulation.workers});
            const auto labels = variant_labels(result);
            if (labels.size() == 1) {
                detail::emit(sweep_opts.output, out, [&](std::ostream& o) { write_csv(o, result, "", omit_timing); });
            } else {
                for (const auto& label : labels)
                    detail::emit(variant_path(sweep_opts.output, label), out,
                                 [&](std::ostream& o) { write_csv(o, result, label, omit_timing); });
            }

            bool failed = false;
            for (const SweepRow& r : result.rows)
                if (!r.failure.empty()) {
                    failed = true;
                    err << "row " << detail::fmt(r.param_1) << " (" << r.variant << ", " << to_string(r.method)
                        << ") failed: " << r.failure << "\n";
                }
            if (!sweep_opts.output.empty()) {
                for (const CurveSummary& s : result.summaries) {
                    out << "best " << result.param_1_name << " for " << s.variant << "/" << to_string(s.method);
                    if (s.param_2) out << " at " << result.param_2_name << "=" << detail::fmt(*s.param_2);
                    out << ": " << detail::fmt(s.argmax_param_1) << " (P = " << detail::fmt(s.max_probability) << ")\n";
                }
                std::vector<ClaimReport> claims;
                const double hbs = spec.base.scenario_config.bs_height_m;
                if (preset == "figure2") claims = figure2_claims(result, hbs);
                if (preset == "figure4") claims = figure4_claims(result, hbs);
                for (const ClaimReport& c : claims)
                    out << "claim " << to_string(c.status) << ": " << c.name << " (" << c.detail << ")\n";
            }
            return failed ? kExitFailure : kExitOk;
        }

        if (*simulate) {
            ConfigFile cfg = detail::resolve(sim_opts);
            if (serving_distance) cfg.simulation.conditioning.serving_distance = *serving_distance;
            if (!serving_state.empty()) {
                if (serving_state == "los") cfg.simulation.conditioning.serving_state = LinkState::kLos;
                else if (serving_state == "nlos") cfg.simulation.conditioning.serving_state = LinkState::kNlos;
                else throw ConfigError("serving-state", 0, "expected 'los' or 'nlos'");
            }
            if (cfg.simulation.conditioning.serving_state && !cfg.simulation.conditioning.serving_distance)
                throw ConfigError("serving-state", 0, "requires --serving-distance");
            const CoverageEstimate e = estimate_coverage(cfg.scenario(), cfg.simulation);
            detail::emit(sim_opts.output, out, [&](std::ostream& o) {
                o << "probability=" << detail::fmt(e.probability) << "\nstd_error=" << detail::fmt(e.std_error)
                  << "\nnum_drops=" << e.num_drops << "\nresampled_drops=" << e.resampled_drops
                  << "\ninterference_free_drops=" << e.interference_free_drops
                  << "\ndisk_radius_m=" << detail::fmt(e.disk_radius)
                  << "\noutside_interference_fraction=" << detail::fmt(e.outside_interference_fraction) << "\n";
            });
            return kExitOk;
        }

        if (*validate_cmd) {
            const ConfigFile cfg = detail::resolve(val_opts);
            ValidationSpec vs;
            vs.seed = cfg.simulation.seed;
            vs.workers = cfg.simulation.workers;
            vs.quadrature = cfg.quadrature;
            if (val_opts.drops) {
                vs.drops = *val_opts.drops;
                vs.conditional_drops = vs.laplace_drops = std::max<std::size_t>(1, *val_opts.drops / 2);
            }
            const ValidationReport report = validate(cfg.scenario(), vs);
            detail::emit(val_opts.output, out, [&](std::ostream& o) { write_report(o, report); });
            return report.all_passed() ? kExitOk : kExitFailure;
        }
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const NumericError& e) {
        const auto& d = e.diagnostics();
        err << "numeric failure: " << e.what() << " (evaluations " << d.evaluations << ", error estimate "
            << d.error_estimate << ", radius " << d.radius << ")\n";
        return kExitFailure;
    } catch (const std::exception& e) {
        err << "failure: " << e.what() << "\n";
        return kExitFailure;
    }
    return kExitUsage;
}

}  // namespace dronecov::cli
