#pragma once

// Physical layer shared by the analytic and Monte Carlo paths: link geometry,
// LoS/NLoS path loss, the ITU building-grid LoS probability, the two-level
// vertical antenna pattern and Nakagami-m power fading.
//
// Units are meters, radians and linear power ratios throughout.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "dronecov/errors.hpp"
#include "dronecov/rng.hpp"

namespace dronecov {

enum class LinkState { kLos, kNlos };

inline const char* to_string(LinkState state) noexcept {
    return state == LinkState::kLos ? "los" : "nlos";
}

inline double db_to_linear(double db) noexcept { return std::pow(10.0, db / 10.0); }
inline double linear_to_db(double linear) noexcept { return 10.0 * std::log10(linear); }
inline double deg_to_rad(double deg) noexcept { return deg * std::numbers::pi / 180.0; }
inline double rad_to_deg(double rad) noexcept { return rad * 180.0 / std::numbers::pi; }

/// Building-grid statistics of an urban area.
struct EnvironmentParams {
    double a = 0.3;   ///< fraction of land covered by buildings
    double b = 500.0; ///< buildings per km^2
    double c = 15.0;  ///< Rayleigh scale of building height [m]

    void validate() const {
        if (!(a > 0.0 && a < 1.0)) throw DomainError("environment: a must lie in (0, 1)");
        if (!(b > 0.0)) throw DomainError("environment: b must be positive");
        if (!(c > 0.0)) throw DomainError("environment: c must be positive");
    }

    /// Buildings crossed per meter of ground distance, sqrt(ab)/1000.
    double crossing_rate() const noexcept { return std::sqrt(a * b) / 1000.0; }

    bool operator==(const EnvironmentParams&) const = default;
};

struct ChannelParams {
    double alpha_los = 2.09;
    double alpha_nlos = 3.75;
    double intercept_los = db_to_linear(-41.1);
    double intercept_nlos = db_to_linear(-32.9);
    int m_los = 1;
    int m_nlos = 3;

    void validate() const {
        if (!(alpha_los > 0.0)) throw DomainError("channel: alpha_los must be positive");
        if (!(alpha_nlos >= alpha_los)) throw DomainError("channel: alpha_nlos must be >= alpha_los");
        if (!(intercept_los > 0.0) || !(intercept_nlos > 0.0))
            throw DomainError("channel: path-loss intercepts must be positive");
        if (m_los < 1 || m_nlos < 1) throw DomainError("channel: fading orders must be >= 1");
    }

    double alpha(LinkState s) const noexcept { return s == LinkState::kLos ? alpha_los : alpha_nlos; }
    double intercept(LinkState s) const noexcept {
        return s == LinkState::kLos ? intercept_los : intercept_nlos;
    }
    int fading_order(LinkState s) const noexcept { return s == LinkState::kLos ? m_los : m_nlos; }

    bool operator==(const ChannelParams&) const = default;
};

/// Two-level vertical pattern: main-lobe gain inside the tilted beam, side-lobe gain elsewhere.
struct AntennaPattern {
    double beamwidth = deg_to_rad(40.0);  ///< vertical beamwidth [rad]
    double downtilt = deg_to_rad(30.0);   ///< beam centre below horizontal [rad]
    double gain_main = 10.0;
    double gain_side = 0.5;

    static AntennaPattern from_degrees(double beamwidth_deg, double downtilt_deg, double gain_main,
                                       double gain_side) {
        return {deg_to_rad(beamwidth_deg), deg_to_rad(downtilt_deg), gain_main, gain_side};
    }

    void validate() const {
        if (!(beamwidth > 0.0 && beamwidth < std::numbers::pi))
            throw DomainError("antenna: beamwidth must lie in (0, 180) degrees");
        if (!(gain_main > gain_side && gain_side > 0.0))
            throw DomainError("antenna: require gain_main > gain_side > 0");
    }

    double lower_edge() const noexcept { return downtilt - 0.5 * beamwidth; }
    double upper_edge() const noexcept { return downtilt + 0.5 * beamwidth; }

    bool operator==(const AntennaPattern&) const = default;
};

struct LinkGeometry {
    double ground_distance = 0.0;
    double bs_height = 30.0;
    double ue_height = 60.0;

    double height_offset() const noexcept { return ue_height - bs_height; }
    double distance_squared() const noexcept {
        const double dh = height_offset();
        return ground_distance * ground_distance + dh * dh;
    }
    double distance() const noexcept { return std::hypot(ground_distance, height_offset()); }
    /// Angle below horizontal from the BS antenna to the UE.
    double depression_angle() const noexcept { return std::atan2(bs_height - ue_height, ground_distance); }
};

/// A_v d^{-alpha_v}.
inline double path_loss(const LinkGeometry& geom, const ChannelParams& params, LinkState los) {
    const double d2 = geom.distance_squared();
    if (!(d2 > 0.0)) throw DomainError("path_loss: zero link length");
    return params.intercept(los) * std::pow(d2, -0.5 * params.alpha(los));
}

/// Number of buildings m used by the LoS product at ground distance r (m = -1 means none).
inline double los_breakpoint(long k, const EnvironmentParams& env) noexcept;

/// Number of buildings crossed minus one. Agrees exactly with los_breakpoint:
/// index k holds on [los_breakpoint(k), los_breakpoint(k + 1)).
inline long los_building_index(double ground_distance, const EnvironmentParams& env) noexcept {
    long m = static_cast<long>(std::floor(ground_distance * env.crossing_rate() - 1.0));
    if (los_breakpoint(m + 1, env) <= ground_distance) ++m;
    else if (m >= 0 && los_breakpoint(m, env) > ground_distance) --m;
    return m;
}

/// LoS probability for a fixed building index. Empty product (index < 0) is 1.
inline double los_probability_for_index(long index, double bs_height, double ue_height, double c) noexcept {
    if (index < 0) return 1.0;
    const double slots = static_cast<double>(index + 1);
    const double drop = (bs_height - ue_height) / slots;
    const double inv_two_c2 = 1.0 / (2.0 * c * c);
    double p = 1.0;
    for (long n = 0; n <= index; ++n) {
        const double h = bs_height - (static_cast<double>(n) + 0.5) * drop;
        p *= -std::expm1(-h * h * inv_two_c2);
        if (p == 0.0) break;
    }
    return p;
}

inline double los_probability(const LinkGeometry& geom, const EnvironmentParams& env) {
    return los_probability_for_index(los_building_index(geom.ground_distance, env), geom.bs_height,
                                     geom.ue_height, env.c);
}

/// Ground distance of the k-th LoS step, where the building index becomes k.
inline double los_breakpoint(long k, const EnvironmentParams& env) noexcept {
    return static_cast<double>(k + 1) / env.crossing_rate();
}

/// All LoS step radii in (0, r_max], ascending.
inline std::vector<double> los_breakpoints(const EnvironmentParams& env, double r_max) {
    if (!(r_max > 0.0)) throw DomainError("los_breakpoints: r_max must be positive");
    std::vector<double> radii;
    for (long k = 0;; ++k) {
        const double r = los_breakpoint(k, env);
        if (r > r_max) break;
        radii.push_back(r);
    }
    return radii;
}

inline bool in_main_lobe(double depression, const AntennaPattern& pattern) noexcept {
    return depression >= pattern.lower_edge() && depression <= pattern.upper_edge();
}

inline double antenna_gain(const LinkGeometry& geom, const AntennaPattern& pattern) noexcept {
    return in_main_lobe(geom.depression_angle(), pattern) ? pattern.gain_main : pattern.gain_side;
}

/// Ground distances (0-2 of them) where the depression angle crosses a beam edge.
inline std::vector<double> gain_switch_radii(double bs_height, double ue_height, const AntennaPattern& pattern) {
    std::vector<double> radii;
    const double dh = bs_height - ue_height;
    if (dh == 0.0) return radii;
    for (double edge : {pattern.lower_edge(), pattern.upper_edge()}) {
        if (std::abs(edge) >= 0.5 * std::numbers::pi) continue;
        const double t = std::tan(edge);
        if (t == 0.0) continue;
        const double r = dh / t;
        if (r > 0.0 && std::isfinite(r)) radii.push_back(r);
    }
    std::sort(radii.begin(), radii.end());
    return radii;
}

/// Unit-mean gamma density with shape m.
inline double fading_pdf(double omega, int m) {
    if (m < 1) throw DomainError("fading_pdf: order must be >= 1");
    if (omega < 0.0) return 0.0;
    if (omega == 0.0) return m == 1 ? 1.0 : 0.0;
    const double md = m;
    return std::exp(md * std::log(md) + (md - 1.0) * std::log(omega) - md * omega - std::lgamma(md));
}

/// Draw from gamma(shape m, rate m).
template <class Urbg>
double sample_fading(int m, Urbg& rng) {
    if (m < 1) throw DomainError("sample_fading: order must be >= 1");
    if (m <= 16) {
        // Sum of m Exp(m) variates; the product of m uniforms stays far above denormals.
        double product = 1.0;
        for (int i = 0; i < m; ++i) product *= uniform_open_closed(rng);
        return -std::log(product) / m;
    }
    std::gamma_distribution<double> gamma(static_cast<double>(m), 1.0 / m);
    return gamma(rng);
}

}  // namespace dronecov
