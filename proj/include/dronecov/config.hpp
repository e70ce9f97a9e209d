#pragma once

// Sectioned key = value configuration in human units (dB, degrees, per km^2,
// meters). Conversion to the internal SI/linear representation happens once,
// in ConfigFile::scenario().
//
//     # comment
//     [scenario]
//     ue_height_m = 60
//     environment = Urban
//     [environment.Coastal]
//     a = 0.2
//     b = 400
//     c = 10
//
// Sections: [scenario], [quadrature], [simulation], [environment.<Name>].

#include <charconv>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>

#include "dronecov/analytic_coverage.hpp"
#include "dronecov/channel_model.hpp"
#include "dronecov/errors.hpp"
#include "dronecov/monte_carlo.hpp"

namespace dronecov {

struct ScenarioConfig {
    double bs_density_per_km2 = 50.0;
    double bs_height_m = 30.0;
    double ue_height_m = 60.0;
    double tx_power_db = -6.0;
    double sir_threshold = 0.3;
    double alpha_los = 2.09;
    double alpha_nlos = 3.75;
    double intercept_los_db = -41.1;
    double intercept_nlos_db = -32.9;
    int m_los = 1;
    int m_nlos = 3;
    double beamwidth_deg = 40.0;
    double downtilt_deg = 30.0;
    double gain_main = 10.0;
    double gain_side = 0.5;
    std::string environment = "Urban";

    bool operator==(const ScenarioConfig&) const = default;
};

/// Built-in environment table. Urban is the default deployment; the other
/// three are common building-grid values for the named area types.
inline std::map<std::string, EnvironmentParams> default_environments() {
    return {
        {"Suburban", {0.1, 750.0, 8.0}},
        {"Urban", {0.3, 500.0, 15.0}},
        {"DenseUrban", {0.5, 300.0, 20.0}},
        {"HighriseUrban", {0.5, 300.0, 50.0}},
    };
}

struct ConfigFile {
    ScenarioConfig scenario_config;
    QuadratureSpec quadrature;
    SimulationSpec simulation;
    std::map<std::string, EnvironmentParams> environments = default_environments();

    /// Internal-unit scenario.
    NetworkScenario scenario() const {
        const ScenarioConfig& c = scenario_config;
        NetworkScenario s;
        s.bs_density = c.bs_density_per_km2 * 1e-6;
        s.bs_height = c.bs_height_m;
        s.ue_height = c.ue_height_m;
        s.tx_power = db_to_linear(c.tx_power_db);
        s.sir_threshold = c.sir_threshold;
        s.channel = {c.alpha_los, c.alpha_nlos, db_to_linear(c.intercept_los_db),
                     db_to_linear(c.intercept_nlos_db), c.m_los, c.m_nlos};
        const auto env = environments.find(c.environment);
        if (env == environments.end()) throw ConfigError("environment", 0, "unknown environment '" + c.environment + "'");
        s.env = env->second;
        s.pattern = AntennaPattern::from_degrees(c.beamwidth_deg, c.downtilt_deg, c.gain_main, c.gain_side);
        return s;
    }

    bool operator==(const ConfigFile&) const = default;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

inline double parse_real(std::string_view text, const std::string& key, std::size_t line) {
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || ptr != text.data() + text.size() || !std::isfinite(value))
        throw ConfigError(key, line, "expected a finite number, got '" + std::string(text) + "'");
    return value;
}

template <class Int>
Int parse_integer(std::string_view text, const std::string& key, std::size_t line) {
    Int value{};
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || ptr != text.data() + text.size())
        throw ConfigError(key, line, "expected an integer, got '" + std::string(text) + "'");
    return value;
}

inline std::string format_real(double value) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
    return std::string(buf, ptr);
}

struct Range {
    double lo = -std::numeric_limits<double>::infinity();
    double hi = std::numeric_limits<double>::infinity();
    bool lo_open = false;
    bool hi_open = false;

    bool contains(double v) const {
        const bool above = lo_open ? v > lo : v >= lo;
        const bool below = hi_open ? v < hi : v <= hi;
        return above && below;
    }

    std::string describe() const {
        return std::string(lo_open ? "(" : "[") + format_real(lo) + ", " + format_real(hi) + (hi_open ? ")" : "]");
    }
};

inline constexpr double kInf = std::numeric_limits<double>::infinity();

inline void check_range(double v, Range r, const std::string& key, std::size_t line) {
    if (!r.contains(v)) throw ConfigError(key, line, "value " + format_real(v) + " outside " + r.describe());
}

// Assigns one [scenario] key; false when the key is unknown.
inline bool set_scenario_key(ScenarioConfig& c, const std::string& key, std::string_view text, std::size_t line) {
    auto real = [&](double& field, Range r) {
        const double v = parse_real(text, key, line);
        check_range(v, r, key, line);
        field = v;
        return true;
    };
    auto order = [&](int& field) {
        const int v = parse_integer<int>(text, key, line);
        if (v < 1 || v > kMaxFadingOrder)
            throw ConfigError(key, line, "fading order must lie in [1, " + std::to_string(kMaxFadingOrder) + "]");
        field = v;
        return true;
    };
    if (key == "bs_density_per_km2") return real(c.bs_density_per_km2, {0.0, kInf, true, true});
    if (key == "bs_height_m") return real(c.bs_height_m, {0.0, kInf, true, true});
    if (key == "ue_height_m") return real(c.ue_height_m, {0.0, kInf, false, true});
    if (key == "tx_power_db") return real(c.tx_power_db, {-200.0, 200.0});
    if (key == "sir_threshold") return real(c.sir_threshold, {0.0, kInf, true, true});
    if (key == "alpha_los") return real(c.alpha_los, {0.0, 10.0, true, false});
    if (key == "alpha_nlos") return real(c.alpha_nlos, {0.0, 10.0, true, false});
    if (key == "intercept_los_db") return real(c.intercept_los_db, {-300.0, 300.0});
    if (key == "intercept_nlos_db") return real(c.intercept_nlos_db, {-300.0, 300.0});
    if (key == "m_los") return order(c.m_los);
    if (key == "m_nlos") return order(c.m_nlos);
    if (key == "beamwidth_deg") return real(c.beamwidth_deg, {0.0, 180.0, true, true});
    if (key == "downtilt_deg") return real(c.downtilt_deg, {-90.0, 90.0});
    if (key == "gain_main") return real(c.gain_main, {0.0, kInf, true, true});
    if (key == "gain_side") return real(c.gain_side, {0.0, kInf, true, true});
    if (key == "environment") {
        if (text.empty()) throw ConfigError(key, line, "environment name must not be empty");
        c.environment = std::string(text);
        return true;
    }
    return false;
}

inline bool set_quadrature_key(QuadratureSpec& q, const std::string& key, std::string_view text, std::size_t line) {
    auto real = [&](double& field, Range r) {
        const double v = parse_real(text, key, line);
        check_range(v, r, key, line);
        field = v;
        return true;
    };
    if (key == "rel_tol") return real(q.rel_tol, {0.0, 0.1, true, false});
    if (key == "abs_tol") return real(q.abs_tol, {0.0, 0.1, true, false});
    if (key == "outer_trunc_prob") return real(q.outer_trunc_prob, {0.0, 0.01, true, false});
    if (key == "far_field_threshold") return real(q.far_field_threshold, {0.0, 0.2, true, false});
    if (key == "max_intervals") {
        q.max_intervals = parse_integer<std::size_t>(text, key, line);
        if (q.max_intervals < 16) throw ConfigError(key, line, "must be at least 16");
        return true;
    }
    return false;
}

inline bool set_simulation_key(SimulationSpec& s, const std::string& key, std::string_view text, std::size_t line) {
    if (key == "num_drops") {
        s.num_drops = parse_integer<std::size_t>(text, key, line);
        if (s.num_drops == 0) throw ConfigError(key, line, "must be positive");
        return true;
    }
    if (key == "disk_radius_m") {
        const double v = parse_real(text, key, line);
        check_range(v, {0.0, 1e8}, key, line);
        s.disk_radius = v;
        return true;
    }
    if (key == "seed") {
        s.seed = parse_integer<std::uint64_t>(text, key, line);
        return true;
    }
    if (key == "workers") {
        s.workers = parse_integer<unsigned>(text, key, line);
        return true;
    }
    if (key == "serving_distance_m") {
        const double v = parse_real(text, key, line);
        check_range(v, {0.0, kInf, false, true}, key, line);
        s.conditioning.serving_distance = v;
        return true;
    }
    if (key == "serving_state") {
        if (text == "los") s.conditioning.serving_state = LinkState::kLos;
        else if (text == "nlos") s.conditioning.serving_state = LinkState::kNlos;
        else throw ConfigError(key, line, "expected 'los' or 'nlos'");
        return true;
    }
    return false;
}

inline bool set_environment_key(EnvironmentParams& e, const std::string& key, std::string_view text,
                                std::size_t line) {
    const double v = parse_real(text, key, line);
    if (key == "a") {
        check_range(v, {0.0, 1.0, true, true}, key, line);
        e.a = v;
    } else if (key == "b") {
        check_range(v, {0.0, kInf, true, true}, key, line);
        e.b = v;
    } else if (key == "c") {
        check_range(v, {0.0, kInf, true, true}, key, line);
        e.c = v;
    } else {
        return false;
    }
    return true;
}

}  // namespace detail

/// Parses configuration text. Missing keys keep their defaults; unknown
/// sections or keys, duplicates and out-of-range values raise ConfigError.
inline ConfigFile parse_config(std::string_view text) {
    ConfigFile cfg;
    std::string section;
    std::map<std::string, std::size_t> seen;  // "section.key" -> line
    std::map<std::string, std::size_t> env_keys;  // environments declared in this text -> key count
    std::size_t line_no = 0;
    std::size_t environment_line = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const auto end = text.find('\n', pos);
        std::string_view line = text.substr(pos, end == std::string_view::npos ? std::string_view::npos : end - pos);
        pos = end == std::string_view::npos ? text.size() + 1 : end + 1;
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        line = detail::trim(line);
        if (line.empty()) continue;

        if (line.front() == '[') {
            if (line.back() != ']') throw ConfigError("", line_no, "malformed section header");
            section = std::string(detail::trim(line.substr(1, line.size() - 2)));
            const bool known = section == "scenario" || section == "quadrature" || section == "simulation" ||
                               (section.rfind("environment.", 0) == 0 && section.size() > 12);
            if (!known) throw ConfigError(section, line_no, "unknown section");
            if (section.rfind("environment.", 0) == 0) {
                const std::string name = section.substr(12);
                if (env_keys.contains(name)) throw ConfigError(section, line_no, "duplicate section");
                env_keys[name] = 0;
            }
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) throw ConfigError("", line_no, "expected 'key = value'");
        const std::string key(detail::trim(line.substr(0, eq)));
        const std::string_view value = detail::trim(line.substr(eq + 1));
        if (key.empty()) throw ConfigError("", line_no, "missing key");
        if (section.empty()) throw ConfigError(key, line_no, "key outside any section");
        const std::string full = section + "." + key;
        if (const auto it = seen.find(full); it != seen.end())
            throw ConfigError(key, line_no, "duplicate key (first set on line " + std::to_string(it->second) + ")");
        seen[full] = line_no;

        bool known = false;
        if (section == "scenario") {
            known = detail::set_scenario_key(cfg.scenario_config, key, value, line_no);
            if (key == "environment") environment_line = line_no;
        } else if (section == "quadrature") {
            known = detail::set_quadrature_key(cfg.quadrature, key, value, line_no);
        } else if (section == "simulation") {
            known = detail::set_simulation_key(cfg.simulation, key, value, line_no);
        } else {
            const std::string name = section.substr(12);
            known = detail::set_environment_key(cfg.environments[name], key, value, line_no);
            if (known) ++env_keys[name];
        }
        if (!known) throw ConfigError(key, line_no, "unknown key in [" + section + "]");
    }

    // New environments must be fully specified; built-in ones may be partially overridden.
    const auto builtin = default_environments();
    for (const auto& [name, count] : env_keys)
        if (!builtin.contains(name) && count != 3)
            throw ConfigError("environment." + name, 0, "new environment needs all of a, b, c");

    const ScenarioConfig& sc = cfg.scenario_config;
    auto line_of = [&](const char* key) {
        const auto it = seen.find(std::string("scenario.") + key);
        return it == seen.end() ? std::size_t{0} : it->second;
    };
    if (!cfg.environments.contains(sc.environment))
        throw ConfigError("environment", environment_line, "unknown environment '" + sc.environment + "'");
    if (sc.alpha_nlos < sc.alpha_los)
        throw ConfigError("alpha_nlos", line_of("alpha_nlos"), "must be >= alpha_los");
    if (!(sc.gain_main > sc.gain_side))
        throw ConfigError("gain_main", line_of("gain_main"), "must exceed gain_side");
    if (cfg.simulation.conditioning.serving_state && !cfg.simulation.conditioning.serving_distance)
        throw ConfigError("serving_state", 0, "requires serving_distance_m");
    return cfg;
}

/// Writes every field; parse_config(serialize_config(c)) == c.
inline std::string serialize_config(const ConfigFile& cfg) {
    using detail::format_real;
    std::ostringstream out;
    const ScenarioConfig& c = cfg.scenario_config;
    out << "[scenario]\n"
        << "bs_density_per_km2 = " << format_real(c.bs_density_per_km2) << "\n"
        << "bs_height_m = " << format_real(c.bs_height_m) << "\n"
        << "ue_height_m = " << format_real(c.ue_height_m) << "\n"
        << "tx_power_db = " << format_real(c.tx_power_db) << "\n"
        << "sir_threshold = " << format_real(c.sir_threshold) << "\n"
        << "alpha_los = " << format_real(c.alpha_los) << "\n"
        << "alpha_nlos = " << format_real(c.alpha_nlos) << "\n"
        << "intercept_los_db = " << format_real(c.intercept_los_db) << "\n"
        << "intercept_nlos_db = " << format_real(c.intercept_nlos_db) << "\n"
        << "m_los = " << c.m_los << "\n"
        << "m_nlos = " << c.m_nlos << "\n"
        << "beamwidth_deg = " << format_real(c.beamwidth_deg) << "\n"
        << "downtilt_deg = " << format_real(c.downtilt_deg) << "\n"
        << "gain_main = " << format_real(c.gain_main) << "\n"
        << "gain_side = " << format_real(c.gain_side) << "\n"
        << "environment = " << c.environment << "\n\n";
    const QuadratureSpec& q = cfg.quadrature;
    out << "[quadrature]\n"
        << "rel_tol = " << format_real(q.rel_tol) << "\n"
        << "abs_tol = " << format_real(q.abs_tol) << "\n"
        << "outer_trunc_prob = " << format_real(q.outer_trunc_prob) << "\n"
        << "far_field_threshold = " << format_real(q.far_field_threshold) << "\n"
        << "max_intervals = " << q.max_intervals << "\n\n";
    const SimulationSpec& s = cfg.simulation;
    out << "[simulation]\n"
        << "num_drops = " << s.num_drops << "\n"
        << "disk_radius_m = " << format_real(s.disk_radius) << "\n"
        << "seed = " << s.seed << "\n"
        << "workers = " << s.workers << "\n";
    if (s.conditioning.serving_distance)
        out << "serving_distance_m = " << format_real(*s.conditioning.serving_distance) << "\n";
    if (s.conditioning.serving_state) out << "serving_state = " << to_string(*s.conditioning.serving_state) << "\n";
    for (const auto& [name, e] : cfg.environments)
        out << "\n[environment." << name << "]\n"
            << "a = " << format_real(e.a) << "\n"
            << "b = " << format_real(e.b) << "\n"
            << "c = " << format_real(e.c) << "\n";
    return out.str();
}

/// Sets a [scenario] key from its numeric value, as sweeps do. Throws
/// ConfigError for unknown or non-numeric keys and out-of-range values.
inline void set_scenario_parameter(ConfigFile& cfg, const std::string& key, double value) {
    if (key == "environment") throw ConfigError(key, 0, "not a numeric parameter");
    if (key == "m_los" || key == "m_nlos") {
        if (value != std::floor(value)) throw ConfigError(key, 0, "fading order must be an integer");
    }
    const std::string text = (key == "m_los" || key == "m_nlos") ? std::to_string(static_cast<long long>(value))
                                                                   : detail::format_real(value);
    if (!detail::set_scenario_key(cfg.scenario_config, key, text, 0))
        throw ConfigError(key, 0, "unknown scenario parameter");
}

/// True when key names a numeric [scenario] field.
inline bool is_scenario_parameter(const std::string& key) {
    ScenarioConfig scratch;
    if (key == "environment") return false;
    try {
        return detail::set_scenario_key(scratch, key, "1", 0);
    } catch (const ConfigError&) {
        return true;  // known key, value merely out of range
    }
}

}  // namespace dronecov
