#pragma once

// Parameter sweeps over config keys, the figure presets, qualitative curve
// checks and the analytic-vs-simulation validation matrix.

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "dronecov/analytic_coverage.hpp"
#include "dronecov/config.hpp"
#include "dronecov/errors.hpp"
#include "dronecov/monte_carlo.hpp"

namespace dronecov {

enum class Method { kAnalytic, kRayleigh, kMonteCarlo };

inline const char* to_string(Method m) noexcept {
    switch (m) {
        case Method::kAnalytic: return "analytic";
        case Method::kRayleigh: return "rayleigh";
        case Method::kMonteCarlo: return "monte-carlo";
    }
    return "unknown";
}

inline Method parse_method(std::string_view name) {
    if (name == "analytic") return Method::kAnalytic;
    if (name == "rayleigh") return Method::kRayleigh;
    if (name == "monte-carlo" || name == "mc") return Method::kMonteCarlo;
    throw ConfigError("method", 0, "unknown method '" + std::string(name) + "'");
}

struct Axis {
    std::string parameter;       ///< [scenario] key, e.g. ue_height_m
    std::vector<double> values;
};

/// A labelled set of overrides applied on top of the base config.
struct Variant {
    std::string label;
    std::vector<std::pair<std::string, double>> overrides;
    std::optional<std::string> environment;
};

struct SweepSpec {
    std::string name = "sweep";
    ConfigFile base;
    std::vector<Axis> axes;            ///< one or two
    std::vector<Variant> variants{Variant{"base", {}, std::nullopt}};
    std::vector<Method> methods{Method::kAnalytic};

    void validate() const {
        if (axes.empty() || axes.size() > 2) throw ConfigError("sweep", 0, "need one or two axes");
        if (variants.empty()) throw ConfigError("sweep", 0, "need at least one variant");
        if (methods.empty()) throw ConfigError("method", 0, "need at least one method");
        for (const Axis& axis : axes) {
            if (!is_scenario_parameter(axis.parameter))
                throw ConfigError(axis.parameter, 0, "not a numeric scenario parameter");
            if (axis.values.empty()) throw ConfigError(axis.parameter, 0, "empty grid");
            for (std::size_t i = 1; i < axis.values.size(); ++i)
                if (!(axis.values[i] > axis.values[i - 1]))
                    throw ConfigError(axis.parameter, 0, "grid must be strictly increasing");
        }
        if (axes.size() == 2 && axes[0].parameter == axes[1].parameter)
            throw ConfigError(axes[1].parameter, 0, "both axes sweep the same parameter");
        for (const Variant& v : variants) {
            for (const auto& [key, value] : v.overrides)
                if (!is_scenario_parameter(key)) throw ConfigError(key, 0, "not a numeric scenario parameter");
            if (v.environment && !base.environments.contains(*v.environment))
                throw ConfigError("environment", 0, "unknown environment '" + *v.environment + "'");
        }
    }
};

struct SweepRow {
    std::string variant;
    double param_1 = 0.0;
    std::optional<double> param_2;
    Method method = Method::kAnalytic;
    double probability = std::numeric_limits<double>::quiet_NaN();
    double error_estimate = std::numeric_limits<double>::quiet_NaN();
    double wall_time_s = 0.0;
    std::string failure;   ///< empty on success
};

/// Best point of one curve (fixed variant, method and param_2).
struct CurveSummary {
    std::string variant;
    Method method = Method::kAnalytic;
    std::optional<double> param_2;
    double argmax_param_1 = std::numeric_limits<double>::quiet_NaN();
    double max_probability = std::numeric_limits<double>::quiet_NaN();
};

struct SweepResult {
    std::string name;
    std::string param_1_name;
    std::string param_2_name;
    std::vector<SweepRow> rows;
    std::vector<CurveSummary> summaries;

    /// Rows of one curve in grid order.
    std::vector<const SweepRow*> curve(const std::string& variant, Method method,
                                       std::optional<double> param_2 = std::nullopt) const {
        std::vector<const SweepRow*> out;
        for (const SweepRow& r : rows)
            if (r.variant == variant && r.method == method && r.param_2 == param_2) out.push_back(&r);
        return out;
    }
};

struct SweepOptions {
    unsigned workers = 1;
};

/// Grid text: "start:stop:step" (stop included when hit) or "v1,v2,...".
inline std::vector<double> parse_grid(std::string_view text, const std::string& key = "sweep-grid") {
    std::vector<double> values;
    auto number = [&](std::string_view s) { return detail::parse_real(detail::trim(s), key, 0); };
    if (text.find(':') != std::string_view::npos) {
        const auto a = text.find(':');
        const auto b = text.find(':', a + 1);
        if (b == std::string_view::npos || text.find(':', b + 1) != std::string_view::npos)
            throw ConfigError(key, 0, "range must be start:stop:step");
        const double start = number(text.substr(0, a));
        const double stop = number(text.substr(a + 1, b - a - 1));
        const double step = number(text.substr(b + 1));
        if (!(step > 0.0) || stop < start) throw ConfigError(key, 0, "range needs step > 0 and stop >= start");
        const double count = std::floor((stop - start) / step + 1e-9);
        if (count > 1e6) throw ConfigError(key, 0, "grid too large");
        for (long i = 0; i <= static_cast<long>(count); ++i) values.push_back(start + static_cast<double>(i) * step);
    } else {
        std::size_t pos = 0;
        while (pos <= text.size()) {
            const auto comma = text.find(',', pos);
            values.push_back(number(text.substr(pos, comma == std::string_view::npos ? std::string_view::npos
                                                                                     : comma - pos)));
            if (comma == std::string_view::npos) break;
            pos = comma + 1;
        }
    }
    for (std::size_t i = 1; i < values.size(); ++i)
        if (!(values[i] > values[i - 1])) throw ConfigError(key, 0, "grid must be strictly increasing");
    return values;
}

namespace detail {

struct PointTask {
    std::size_t row = 0;
    ConfigFile cfg;
};

inline void evaluate_row(const ConfigFile& cfg, SweepRow& row, unsigned mc_workers) {
    const auto start = std::chrono::steady_clock::now();
    try {
        const NetworkScenario scn = cfg.scenario();
        switch (row.method) {
            case Method::kAnalytic: {
                const CoverageResult r = coverage_probability(scn, cfg.quadrature);
                row.probability = r.probability;
                row.error_estimate = r.error_estimate;
                break;
            }
            case Method::kRayleigh: {
                const CoverageResult r = rayleigh_coverage(scn, cfg.quadrature);
                row.probability = r.probability;
                row.error_estimate = r.error_estimate;
                break;
            }
            case Method::kMonteCarlo: {
                SimulationSpec sim = cfg.simulation;
                sim.workers = mc_workers;
                const CoverageEstimate e = estimate_coverage(scn, sim);
                row.probability = e.probability;
                row.error_estimate = e.std_error;
                break;
            }
        }
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& ex) {
        row.failure = ex.what();
        row.probability = std::numeric_limits<double>::quiet_NaN();
        row.error_estimate = std::numeric_limits<double>::quiet_NaN();
    }
    row.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

inline std::vector<CurveSummary> summarize(const std::vector<SweepRow>& rows) {
    std::vector<CurveSummary> out;
    for (const SweepRow& r : rows) {
        auto it = std::find_if(out.begin(), out.end(), [&](const CurveSummary& c) {
            return c.variant == r.variant && c.method == r.method && c.param_2 == r.param_2;
        });
        if (it == out.end()) {
            out.push_back({r.variant, r.method, r.param_2, std::numeric_limits<double>::quiet_NaN(),
                           std::numeric_limits<double>::quiet_NaN()});
            it = out.end() - 1;
        }
        if (std::isnan(r.probability)) continue;
        if (std::isnan(it->max_probability) || r.probability > it->max_probability) {
            it->max_probability = r.probability;
            it->argmax_param_1 = r.param_1;
        }
    }
    return out;
}

}  // namespace detail

/// Evaluates every (variant, param_2, param_1, method) point. Rows come back in
/// that grid order whatever the completion order. Analytic points run in
/// parallel; Monte Carlo points run one at a time with the workers inside.
inline SweepResult sweep(const SweepSpec& spec, const SweepOptions& opts = {}) {
    spec.validate();
    SweepResult result;
    result.name = spec.name;
    result.param_1_name = spec.axes[0].parameter;
    result.param_2_name = spec.axes.size() > 1 ? spec.axes[1].parameter : "";

    std::vector<std::optional<double>> outer{std::nullopt};
    if (spec.axes.size() > 1) {
        outer.clear();
        for (double v : spec.axes[1].values) outer.emplace_back(v);
    }

    // Build every point's config first so bad parameters fail before any evaluation.
    std::vector<detail::PointTask> analytic, simulated;
    for (const Variant& variant : spec.variants) {
        ConfigFile vcfg = spec.base;
        if (variant.environment) vcfg.scenario_config.environment = *variant.environment;
        for (const auto& [key, value] : variant.overrides) set_scenario_parameter(vcfg, key, value);
        for (const auto& p2 : outer) {
            ConfigFile ocfg = vcfg;
            if (p2) set_scenario_parameter(ocfg, spec.axes[1].parameter, *p2);
            for (double p1 : spec.axes[0].values) {
                ConfigFile pcfg = ocfg;
                set_scenario_parameter(pcfg, spec.axes[0].parameter, p1);
                (void)pcfg.scenario();
                for (Method m : spec.methods) {
                    SweepRow row;
                    row.variant = variant.label;
                    row.param_1 = p1;
                    row.param_2 = p2;
                    row.method = m;
                    auto& bucket = m == Method::kMonteCarlo ? simulated : analytic;
                    bucket.push_back({result.rows.size(), pcfg});
                    result.rows.push_back(std::move(row));
                }
            }
        }
    }

    detail::for_each_block(analytic.size(), 1, opts.workers, [&](std::size_t blk, std::size_t, std::size_t) {
        detail::evaluate_row(analytic[blk].cfg, result.rows[analytic[blk].row], 1);
    });
    for (const auto& task : simulated) detail::evaluate_row(task.cfg, result.rows[task.row], opts.workers);

    result.summaries = detail::summarize(result.rows);
    return result;
}

inline constexpr std::string_view kCsvHeader = "param_1,param_2,method,probability,error_estimate,wall_time_s";

/// CSV for one variant (all rows when variant is empty). omit_timing writes
/// wall_time_s = 0 so that repeated runs produce identical bytes.
inline void write_csv(std::ostream& out, const SweepResult& result, const std::string& variant = "",
                      bool omit_timing = false) {
    using detail::format_real;
    auto num = [](double v) { return std::isnan(v) ? std::string("nan") : format_real(v); };
    out << kCsvHeader << "\n";
    for (const SweepRow& r : result.rows) {
        if (!variant.empty() && r.variant != variant) continue;
        out << num(r.param_1) << "," << (r.param_2 ? num(*r.param_2) : "") << "," << to_string(r.method) << ","
            << num(r.probability) << "," << num(r.error_estimate) << "," << (omit_timing ? "0" : num(r.wall_time_s))
            << "\n";
    }
}

/// Distinct variant labels in row order.
inline std::vector<std::string> variant_labels(const SweepResult& result) {
    std::vector<std::string> out;
    for (const SweepRow& r : result.rows)
        if (std::find(out.begin(), out.end(), r.variant) == out.end()) out.push_back(r.variant);
    return out;
}

// ---------------------------------------------------------------- presets

inline SweepSpec figure2_preset() {
    SweepSpec spec;
    spec.name = "figure2";
    spec.axes = {{"ue_height_m", parse_grid("0:300:5")}};
    spec.variants = {
        {"rayleigh", {{"m_los", 1}, {"m_nlos", 1}}, std::nullopt},
        {"mixed", {{"m_los", 3}, {"m_nlos", 1}}, std::nullopt},
        {"nofading", {{"m_los", 100}, {"m_nlos", 100}}, std::nullopt},
    };
    return spec;
}

enum class UserType { kGround, kAerial };

inline SweepSpec figure3_preset(UserType user) {
    SweepSpec spec;
    spec.name = user == UserType::kGround ? "figure3-ground" : "figure3-aerial";
    spec.base.scenario_config.ue_height_m = user == UserType::kGround ? 1.5 : 60.0;
    spec.axes = {{"bs_height_m", parse_grid("10:80:5")}, {"downtilt_deg", {15.0, 30.0}}};
    spec.variants.clear();
    for (const char* env : {"Suburban", "Urban", "DenseUrban", "HighriseUrban"})
        spec.variants.push_back({env, {}, std::string(env)});
    return spec;
}

inline SweepSpec figure4_preset() {
    SweepSpec spec;
    spec.name = "figure4";
    spec.axes = {{"ue_height_m", parse_grid("0:300:5")}, {"downtilt_deg", {10.0, 20.0, 30.0}}};
    return spec;
}

inline SweepSpec preset_by_name(std::string_view name) {
    if (name == "figure2") return figure2_preset();
    if (name == "figure3-ground") return figure3_preset(UserType::kGround);
    if (name == "figure3-aerial") return figure3_preset(UserType::kAerial);
    if (name == "figure4") return figure4_preset();
    throw ConfigError("preset", 0, "unknown preset '" + std::string(name) + "'");
}

// ---------------------------------------------------------- curve checks

enum class ClaimStatus { kPass, kFail, kInconclusive };

inline const char* to_string(ClaimStatus s) noexcept {
    switch (s) {
        case ClaimStatus::kPass: return "PASS";
        case ClaimStatus::kFail: return "FAIL";
        case ClaimStatus::kInconclusive: return "INCONCLUSIVE";
    }
    return "?";
}

struct ClaimReport {
    std::string name;
    ClaimStatus status = ClaimStatus::kInconclusive;
    std::string detail;
};

struct Curve {
    std::vector<double> x;
    std::vector<double> y;
    std::vector<double> err;
};

inline Curve extract_curve(const SweepResult& result, const std::string& variant, Method method,
                           std::optional<double> param_2 = std::nullopt) {
    Curve c;
    for (const SweepRow* r : result.curve(variant, method, param_2)) {
        c.x.push_back(r->param_1);
        c.y.push_back(r->probability);
        c.err.push_back(r->error_estimate);
    }
    return c;
}

/// Sign changes of (a - b) over the part of the grid inside [lo, hi]. Points
/// where |a - b| is within the combined error are treated as undecided.
inline ClaimReport check_single_crossing(const Curve& a, const Curve& b, double lo, double hi, double target,
                                         double band, const std::string& name) {
    ClaimReport rep{name, ClaimStatus::kInconclusive, ""};
    if (a.x != b.x) {
        rep.status = ClaimStatus::kFail;
        rep.detail = "curves use different grids";
        return rep;
    }
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < a.x.size(); ++i)
        if (a.x[i] >= lo && a.x[i] <= hi) idx.push_back(i);
    std::vector<double> crossings;
    bool undecided = false;
    int last_sign = 0;
    double last_x = 0.0, last_d = 0.0;
    for (std::size_t i : idx) {
        const double d = a.y[i] - b.y[i];
        if (std::isnan(d)) {
            undecided = true;
            continue;
        }
        if (std::abs(d) <= a.err[i] + b.err[i]) {
            undecided = true;
            continue;
        }
        const int sign = d > 0 ? 1 : -1;
        if (last_sign != 0 && sign != last_sign)
            crossings.push_back(last_x + (a.x[i] - last_x) * last_d / (last_d - d));
        last_sign = sign;
        last_x = a.x[i];
        last_d = d;
    }
    std::ostringstream os;
    os << "crossings in [" << lo << ", " << hi << "]:";
    for (double x : crossings) os << " " << x;
    if (crossings.empty()) os << " none";
    if (undecided) os << "; some points within error estimates";
    if (crossings.size() == 1 && std::abs(crossings[0] - target) <= band) {
        rep.status = ClaimStatus::kPass;
    } else if (!undecided) {
        rep.status = ClaimStatus::kFail;
    }
    os << "; expected one crossing at " << target << " +/- " << band;
    rep.detail = os.str();
    return rep;
}

/// Curve rises from its first point to an interior maximum no higher than
/// peak_limit, then never increases by more than the error estimates.
inline ClaimReport check_rise_then_fall(const Curve& c, double peak_limit, const std::string& name) {
    ClaimReport rep{name, ClaimStatus::kInconclusive, ""};
    if (c.x.size() < 3) {
        rep.detail = "curve too short";
        return rep;
    }
    const auto peak = static_cast<std::size_t>(std::max_element(c.y.begin(), c.y.end(), [](double p, double q) {
                                                   return std::isnan(p) || (!std::isnan(q) && p < q);
                                               }) -
                                               c.y.begin());
    std::size_t rises_after = 0;
    for (std::size_t i = peak + 1; i < c.y.size(); ++i)
        if (c.y[i] > c.y[i - 1] + c.err[i] + c.err[i - 1]) ++rises_after;
    const bool rises = c.y[peak] > c.y[0] + c.err[peak] + c.err[0];
    std::ostringstream os;
    os << "peak " << c.y[peak] << " at " << c.x[peak] << " (start " << c.y[0] << " at " << c.x[0]
       << "), increases after peak: " << rises_after;
    rep.detail = os.str();
    rep.status = (rises && peak > 0 && c.x[peak] <= peak_limit && rises_after == 0) ? ClaimStatus::kPass
                                                                                     : ClaimStatus::kFail;
    return rep;
}

/// Argmax of the curve inside [lo, hi]. Outside the band the claim is reported
/// inconclusive together with the location, never silently passed.
inline ClaimReport check_argmax_band(const Curve& c, double lo, double hi, const std::string& name) {
    ClaimReport rep{name, ClaimStatus::kInconclusive, ""};
    std::size_t best = c.y.size();
    for (std::size_t i = 0; i < c.y.size(); ++i)
        if (!std::isnan(c.y[i]) && (best == c.y.size() || c.y[i] > c.y[best])) best = i;
    if (best == c.y.size()) {
        rep.detail = "no finite points";
        return rep;
    }
    // Points statistically tied with the maximum widen the admissible argmax set.
    double tie_lo = c.x[best], tie_hi = c.x[best];
    for (std::size_t i = 0; i < c.y.size(); ++i)
        if (!std::isnan(c.y[i]) && c.y[best] - c.y[i] <= c.err[best] + c.err[i]) {
            tie_lo = std::min(tie_lo, c.x[i]);
            tie_hi = std::max(tie_hi, c.x[i]);
        }
    std::ostringstream os;
    os << "argmax " << c.x[best] << " (P = " << c.y[best] << ", tied range [" << tie_lo << ", " << tie_hi
       << "]), band [" << lo << ", " << hi << "]";
    rep.detail = os.str();
    rep.status = (tie_lo >= lo && tie_hi <= hi) ? ClaimStatus::kPass : ClaimStatus::kInconclusive;
    return rep;
}

/// Figure-2 claims: single (1,1)/(3,1) crossing near 80 m, and rise-then-fall shapes.
inline std::vector<ClaimReport> figure2_claims(const SweepResult& result, double bs_height) {
    const Curve rayleigh = extract_curve(result, "rayleigh", Method::kAnalytic);
    const Curve mixed = extract_curve(result, "mixed", Method::kAnalytic);
    return {
        check_single_crossing(rayleigh, mixed, 30.0, 150.0, 80.0, 30.0, "fading curves cross once near 80 m"),
        check_rise_then_fall(rayleigh, bs_height, "rayleigh curve rises slightly then falls"),
        check_rise_then_fall(mixed, bs_height, "mixed curve rises slightly then falls"),
    };
}

/// Figure-4 claim: per tilt, the best altitude lies in [0, 3 h_BS].
inline std::vector<ClaimReport> figure4_claims(const SweepResult& result, double bs_height) {
    std::vector<ClaimReport> out;
    for (const CurveSummary& s : result.summaries) {
        if (s.method != Method::kAnalytic) continue;
        const Curve c = extract_curve(result, s.variant, s.method, s.param_2);
        std::ostringstream name;
        name << "best altitude within [0, 3 h_BS] at tilt " << s.param_2.value_or(0.0);
        out.push_back(check_argmax_band(c, 0.0, 3.0 * bs_height, name.str()));
    }
    return out;
}

// ------------------------------------------------------------ validation

struct ValidationSpec {
    double identity_rel_tol = 1e-9;
    double derivative_rel_tol = 1e-4;
    double z_limit = 3.0;
    std::size_t drops = 20000;
    std::size_t conditional_drops = 10000;
    std::size_t laplace_drops = 10000;
    std::uint64_t seed = 1;
    unsigned workers = 1;
    QuadratureSpec quadrature;
};

struct ValidationCheck {
    std::string name;
    bool passed = false;
    double measured = 0.0;
    double tolerance = 0.0;
    std::string detail;
};

struct ValidationReport {
    std::vector<ValidationCheck> checks;

    bool all_passed() const {
        return std::all_of(checks.begin(), checks.end(), [](const ValidationCheck& c) { return c.passed; });
    }
};

namespace detail {

inline double rel_diff(double a, double b) {
    const double scale = std::max(std::abs(a), std::abs(b));
    return scale == 0.0 ? 0.0 : std::abs(a - b) / scale;
}

// Five-point central differences of L(s) at s with step h.
inline std::pair<double, double> laplace_fd(const InterferenceField& field, double s, double r0, double h) {
    const double fm2 = field.laplace(s - 2 * h, r0), fm1 = field.laplace(s - h, r0);
    const double f0 = field.laplace(s, r0);
    const double fp1 = field.laplace(s + h, r0), fp2 = field.laplace(s + 2 * h, r0);
    const double d1 = (fm2 - 8 * fm1 + 8 * fp1 - fp2) / (12 * h);
    const double d2 = (-fm2 + 16 * fm1 - 30 * f0 + 16 * fp1 - fp2) / (12 * h * h);
    return {d1, d2};
}

inline std::string format_g(double v) {
    std::ostringstream os;
    os.precision(6);
    os << v;
    return os.str();
}

}  // namespace detail

/// Cross-checks the analytic machinery against itself and against simulation.
/// These are consistency checks: they hold for any valid physical parameters.
inline ValidationReport validate(const NetworkScenario& scn, const ValidationSpec& vs = {}) {
    scn.validate();
    ValidationReport report;
    const QuadratureSpec& quad = vs.quadrature;
    const double r_typ = 0.5 / std::sqrt(scn.bs_density);

    {   // Closed Rayleigh form against the general formula with m = 1.
        NetworkScenario ray = scn;
        ray.channel.m_los = ray.channel.m_nlos = 1;
        const double general = coverage_probability(ray, quad).probability;
        const double closed = rayleigh_coverage(ray, quad).probability;
        const double d = detail::rel_diff(general, closed);
        report.checks.push_back({"rayleigh closed form vs general formula", d <= vs.identity_rel_tol, d,
                                 vs.identity_rel_tol,
                                 "general " + detail::format_g(general) + ", closed " + detail::format_g(closed)});
    }

    {   // Derivatives against finite differences.
        QuadratureSpec tight = quad;
        tight.rel_tol = 1e-12;
        tight.abs_tol = 1e-15;
        const InterferenceField field(scn, tight, 2);
        double worst = 0.0;
        std::string where;
        for (double r0 : {0.5 * r_typ, r_typ, 2.0 * r_typ}) {
            const double s = detail::serving_threshold_arg(r0, scn, LinkState::kLos);
            const auto series = field.laplace_series(s, r0, 2);
            const double d1 = -series.terms[1] / s, d2 = 2.0 * series.terms[2] / (s * s);
            const auto [f1, f2] = detail::laplace_fd(field, s, r0, 1e-3 * s);
            for (auto [a, b] : {std::pair{d1, f1}, std::pair{d2, f2}}) {
                const double e = detail::rel_diff(a, b);
                if (e >= worst) {
                    worst = e;
                    where = "r0 = " + detail::format_g(r0) + " m";
                }
            }
        }
        report.checks.push_back({"laplace derivatives vs finite differences", worst <= vs.derivative_rel_tol, worst,
                                 vs.derivative_rel_tol, "worst at " + where});
    }

    {   // Signs (-1)^k L^(k) >= 0.
        const int order = 6;
        const InterferenceField field(scn, quad, order);
        double worst = 0.0;
        for (double r0 : {0.5 * r_typ, r_typ, 2.0 * r_typ})
            for (double s : {1e-2, 1.0, 1e2}) {
                const double ss = s * detail::serving_threshold_arg(r0, scn, LinkState::kNlos);
                const auto series = field.laplace_series(ss, r0, order);
                for (double a : series.terms) worst = std::min(worst, a);
            }
        report.checks.push_back({"complete monotonicity of the Laplace transform", worst >= 0.0, worst, 0.0,
                                 "minimum of (-s)^k L^(k)(s) / k! over orders 0-6"});
    }

    {   // Unconditional coverage against simulation.
        const double analytic = coverage_probability(scn, quad).probability;
        SimulationSpec sim;
        sim.num_drops = vs.drops;
        sim.seed = vs.seed;
        sim.workers = vs.workers;
        const CoverageEstimate mc = estimate_coverage(scn, sim);
        const double z = std::abs(analytic - mc.probability) / std::max(mc.std_error, 1e-300);
        report.checks.push_back({"coverage: analytic vs monte carlo", z <= vs.z_limit, z, vs.z_limit,
                                 "analytic " + detail::format_g(analytic) + ", mc " + detail::format_g(mc.probability) +
                                     " +/- " + detail::format_g(mc.std_error)});
    }

    {   // Conditional coverage at fixed r0 and forced serving state.
        double worst = 0.0;
        std::string where;
        for (double r0 : {50.0, 150.0, 400.0})
            for (LinkState st : {LinkState::kLos, LinkState::kNlos}) {
                const double analytic = conditional_coverage(r0, scn, quad, st);
                SimulationSpec sim;
                sim.num_drops = vs.conditional_drops;
                sim.seed = vs.seed;
                sim.workers = vs.workers;
                sim.conditioning = {r0, st};
                const CoverageEstimate mc = estimate_coverage(scn, sim);
                const double se = std::max(mc.std_error, 0.5 / static_cast<double>(mc.num_drops));
                const double z = std::abs(analytic - mc.probability) / se;
                if (z >= worst) {
                    worst = z;
                    where = "r0 = " + detail::format_g(r0) + " m " + to_string(st) + ": analytic " +
                            detail::format_g(analytic) + ", mc " + detail::format_g(mc.probability);
                }
            }
        report.checks.push_back({"conditional coverage vs conditional monte carlo", worst <= vs.z_limit, worst,
                                 vs.z_limit, "worst " + where});
    }

    {   // Laplace transform against the empirical E[exp(-s I)].
        const double r0 = 150.0;
        const InterferenceField field(scn, quad, 0);
        const double mean_interference =
            2.0 * std::numbers::pi * scn.bs_density * field.mean_power_beyond(r0);
        std::vector<double> s_values;
        for (double c : {0.1, 0.3, 1.0, 3.0, 10.0}) s_values.push_back(c / mean_interference);
        SimulationSpec sim;
        sim.num_drops = vs.laplace_drops;
        sim.seed = vs.seed;
        sim.workers = vs.workers;
        sim.conditioning.serving_distance = r0;
        const auto empirical = estimate_laplace_transform(scn, sim, s_values);
        double worst = 0.0;
        std::string where;
        for (const LaplaceEstimate& e : empirical) {
            const double analytic = field.laplace(e.s, r0);
            const double z = std::abs(analytic - e.value) / std::max(e.std_error, 1e-300);
            if (z >= worst) {
                worst = z;
                where = "s = " + detail::format_g(e.s) + ": analytic " + detail::format_g(analytic) + ", mc " +
                        detail::format_g(e.value);
            }
        }
        report.checks.push_back({"laplace transform vs empirical E[exp(-sI)]", worst <= vs.z_limit, worst, vs.z_limit,
                                 "worst " + where});
    }

    {   // Transmit-power invariance.
        const double base = coverage_probability(scn, quad).probability;
        double worst = 0.0;
        bool identical_sir = true;
        SimulationSpec sim;
        sim.seed = vs.seed;
        const double radius = default_disk_radius(scn).radius;
        const NetworkSampler base_sampler(scn, radius);
        for (double factor : {0.1, 10.0}) {
            NetworkScenario scaled = scn;
            scaled.tx_power *= factor;
            worst = std::max(worst, detail::rel_diff(base, coverage_probability(scaled, quad).probability));
            const NetworkSampler sampler(scaled, radius);
            for (std::uint64_t d = 0; d < 20; ++d) {
                const double a = base_sampler.sir(base_sampler.sample(vs.seed, d, {}));
                const double b = sampler.sir(sampler.sample(vs.seed, d, {}));
                identical_sir = identical_sir && std::bit_cast<std::uint64_t>(a) == std::bit_cast<std::uint64_t>(b);
            }
        }
        report.checks.push_back({"transmit power invariance", worst <= vs.identity_rel_tol && identical_sir, worst,
                                 vs.identity_rel_tol,
                                 std::string("simulated SIR bit-identical: ") + (identical_sir ? "yes" : "no")});
    }
    return report;
}

inline void write_report(std::ostream& out, const ValidationReport& report) {
    out << "check,status,measured,tolerance,detail\n";
    for (const ValidationCheck& c : report.checks)
        out << "\"" << c.name << "\"," << (c.passed ? "PASS" : "FAIL") << "," << detail::format_real(c.measured)
            << "," << detail::format_real(c.tolerance) << ",\"" << c.detail << "\"\n";
}

}  // namespace dronecov
