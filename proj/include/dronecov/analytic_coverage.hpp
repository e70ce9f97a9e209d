#pragma once

// Exact numerical evaluation of the downlink coverage probability of the
// closest-BS association rule in a Poisson field of ground base stations.
//
// The interference Laplace transform conditioned on the serving distance r0 is
//
//     L(s) = exp(eta(s)),  eta(s) = -2 pi lambda Int_{r0}^inf [1 - P_L Y_L - P_N Y_N] r dr,
//
// with Y_v = (1 + s c_v(r) / m_v)^{-m_v} and c_v(r) = P_t G(r) A_v d^{-alpha_v}.
// Everything downstream is expressed through the scaled Taylor coefficients
//
//     a_k = (-s)^k L^{(k)}(s) / k!,       e_k = (-s)^k eta^{(k)}(s) / k!,
//
// which are all non-negative (complete monotonicity), sum to one, and obey
// a_j = sum_{i<j} ((j-i)/j) e_{j-i} a_i. The conditional coverage of a link
// with fading order m is then sum_{k<m} a_k, a sum without cancellation.
//
// The radial integral is split into
//   * a near field [r0, R_s], integrated adaptively on panels cut at every
//     LoS step and antenna-gain switch;
//   * a far field [R_s, inf), where s c_v(r) is small and the integrand is a
//     convergent power series in u = s c / m. Its radial moments do not
//     depend on s or r0 and are tabulated once per scenario, per LoS step;
//   * beyond a few thousand LoS steps the product form of P_L is replaced by
//     its Euler-Maclaurin asymptotic, integrated in log-radius.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dronecov/channel_model.hpp"
#include "dronecov/errors.hpp"
#include "dronecov/quadrature.hpp"

namespace dronecov {

struct NetworkScenario {
    double bs_density = 50e-6;            ///< BSs per m^2
    double bs_height = 30.0;              ///< m
    double ue_height = 60.0;              ///< m
    double tx_power = db_to_linear(-6.0); ///< linear
    double sir_threshold = 0.3;           ///< linear
    ChannelParams channel;
    EnvironmentParams env;
    AntennaPattern pattern;

    void validate() const {
        if (!(bs_density > 0.0)) throw DomainError("scenario: bs_density must be positive");
        if (!(bs_height > 0.0)) throw DomainError("scenario: bs_height must be positive");
        if (!(ue_height >= 0.0)) throw DomainError("scenario: ue_height must be non-negative");
        if (!(tx_power > 0.0)) throw DomainError("scenario: tx_power must be positive");
        if (!(sir_threshold > 0.0)) throw DomainError("scenario: sir_threshold must be positive");
        channel.validate();
        env.validate();
        pattern.validate();
    }

    LinkGeometry link(double ground_distance) const { return {ground_distance, bs_height, ue_height}; }

    bool operator==(const NetworkScenario&) const = default;
};

struct QuadratureSpec {
    double rel_tol = 1e-8;
    double abs_tol = 1e-10;
    double outer_trunc_prob = 1e-8;      ///< serving-distance mass left beyond the outer cut
    double far_field_threshold = 0.05;   ///< switch to the moment series once (m + K) u <= this
    std::size_t max_intervals = 20000;   ///< adaptive subintervals per integral

    void validate() const {
        if (!(rel_tol > 0.0) || !(abs_tol > 0.0)) throw DomainError("quadrature: tolerances must be positive");
        if (!(outer_trunc_prob > 0.0 && outer_trunc_prob < 1.0))
            throw DomainError("quadrature: outer_trunc_prob must lie in (0, 1)");
        if (!(far_field_threshold > 0.0 && far_field_threshold <= 0.2))
            throw DomainError("quadrature: far_field_threshold must lie in (0, 0.2]");
        if (max_intervals < 16) throw DomainError("quadrature: max_intervals too small");
    }

    bool operator==(const QuadratureSpec&) const = default;
};

enum class CoverageMethod { kAnalytic, kRayleighClosedForm, kMonteCarlo };

inline const char* to_string(CoverageMethod m) noexcept {
    switch (m) {
        case CoverageMethod::kAnalytic: return "analytic";
        case CoverageMethod::kRayleighClosedForm: return "rayleigh-closed-form";
        case CoverageMethod::kMonteCarlo: return "monte-carlo";
    }
    return "unknown";
}

struct CoverageDiagnostics {
    std::size_t outer_evaluations = 0;
    std::size_t inner_integrals = 0;
    std::size_t inner_evaluations = 0;
    double truncation_radius = 0.0;    ///< outer cut R_max [m]
    double quadrature_error = 0.0;
    double truncation_error = 0.0;
    double max_inner_error = 0.0;
};

struct CoverageResult {
    double probability = 0.0;
    CoverageMethod method = CoverageMethod::kAnalytic;
    double error_estimate = 0.0;
    CoverageDiagnostics diagnostics;
};

/// Highest derivative order served by upsilon_derivative / laplace_derivatives.
inline constexpr int kMaxDerivativeOrder = 32;
/// Highest Nakagami order accepted by the coverage integrals.
inline constexpr int kMaxFadingOrder = 128;

/// Nearest-BS ground distance density of a PPP.
inline double serving_distance_pdf(double r0, double density) {
    if (r0 < 0.0 || !(density > 0.0)) throw DomainError("serving_distance_pdf: invalid arguments");
    return 2.0 * std::numbers::pi * density * r0 * std::exp(-density * std::numbers::pi * r0 * r0);
}

/// Radius beyond which the nearest-BS distance has probability mass eps.
inline double outer_truncation_radius(double density, double eps) {
    return std::sqrt(std::log(1.0 / eps) / (std::numbers::pi * density));
}

/// P_t G(r) zeta_v(r): mean received power from a BS at ground distance r.
inline double mean_link_power(double r, const NetworkScenario& scn, LinkState los) {
    const LinkGeometry g = scn.link(r);
    return scn.tx_power * antenna_gain(g, scn.pattern) * path_loss(g, scn.channel, los);
}

/// Per-interferer Laplace factor (m / (m + s c))^m.
inline double upsilon(double r, double s, const NetworkScenario& scn, LinkState los) {
    if (s < 0.0) throw DomainError("upsilon: s must be non-negative");
    if (s == 0.0) return 1.0;
    const double m = scn.channel.fading_order(los);
    const double u = s * mean_link_power(r, scn, los) / m;
    return std::exp(-m * std::log1p(u));
}

/// j-th derivative of upsilon with respect to s.
inline double upsilon_derivative(double r, double s, const NetworkScenario& scn, LinkState los, int order) {
    if (order < 0) throw DomainError("upsilon_derivative: negative order");
    if (order > kMaxDerivativeOrder)
        throw CapabilityError("upsilon_derivative: order exceeds " + std::to_string(kMaxDerivativeOrder));
    if (order == 0) return upsilon(r, s, scn, los);
    if (s < 0.0) throw DomainError("upsilon_derivative: s must be non-negative");
    const int m = scn.channel.fading_order(los);
    const double c = mean_link_power(r, scn, los);
    // (-1)^j (m)_j (c/m)^j (1 + s c/m)^{-(m+j)}
    double rising = 1.0;
    for (int i = 0; i < order; ++i) rising *= static_cast<double>(m + i);
    const double u = s * c / m;
    const double value =
        rising * std::pow(c / m, order) * std::exp(-static_cast<double>(m + order) * std::log1p(u));
    return (order % 2 == 0) ? value : -value;
}

/// Scaled Taylor data of the conditional interference Laplace transform at s.
struct LaplaceSeries {
    double s = 0.0;
    double eta = 0.0;                ///< log L(s)
    std::vector<double> exponent;    ///< e_k, k = 0..K (e_0 = -eta)
    std::vector<double> terms;       ///< a_k, k = 0..K
    double error_estimate = 0.0;     ///< absolute, on eta and each e_k
    std::size_t evaluations = 0;
    double switch_radius = 0.0;      ///< start of the moment-series region
};

namespace detail {

// expm1(e x) / e, continuous at e = 0.
inline double expm1_ratio(double e, double x) {
    if (e == 0.0) return x;
    return std::expm1(e * x) / e;
}

// sum_{k<count} a_k from the exponent coefficients, rescaling to survive
// underflow of exp(eta).
inline std::vector<double> taylor_terms(double eta, std::span<const double> exponent, std::size_t count) {
    std::vector<double> b(count, 0.0);
    if (count == 0) return b;
    b[0] = 1.0;
    double log_scale = eta;
    for (std::size_t j = 1; j < count; ++j) {
        double acc = 0.0;
        for (std::size_t i = 0; i < j; ++i)
            acc += (static_cast<double>(j - i) / static_cast<double>(j)) * exponent[j - i] * b[i];
        b[j] = acc;
        if (acc > 1e250) {
            for (std::size_t i = 0; i <= j; ++i) b[i] *= 1e-250;
            log_scale += 250.0 * std::numbers::ln10;
        }
    }
    for (double& v : b) v = (v == 0.0) ? 0.0 : std::exp(std::log(v) + log_scale);
    return b;
}

}  // namespace detail

/// Precomputed radial structure of the interference field for one scenario.
/// Immutable after construction; safe to share across threads.
class InterferenceField {
public:
    /// Number of LoS steps evaluated with the exact product form.
    static constexpr long kExactSteps = 4096;
    /// Extra series terms kept beyond the highest requested order.
    static constexpr int kSeriesTerms = 18;

    InterferenceField(const NetworkScenario& scn, const QuadratureSpec& quad, int max_order)
        : scn_(scn), quad_(quad), max_order_(max_order) {
        scn_.validate();
        quad_.validate();
        if (max_order < 0) throw DomainError("InterferenceField: negative order");
        if (max_order >= kMaxFadingOrder)
            throw CapabilityError("InterferenceField: order exceeds " + std::to_string(kMaxFadingOrder - 1));
        if (scn_.channel.m_los > kMaxFadingOrder || scn_.channel.m_nlos > kMaxFadingOrder)
            throw CapabilityError("InterferenceField: fading order exceeds " + std::to_string(kMaxFadingOrder));
        two_pi_lambda_ = 2.0 * std::numbers::pi * scn_.bs_density;
        dh2_ = std::pow(scn_.ue_height - scn_.bs_height, 2);
        switches_ = gain_switch_radii(scn_.bs_height, scn_.ue_height, scn_.pattern);
        last_switch_ = switches_.empty() ? 0.0 : switches_.back();
        far_gain_ = antenna_gain(scn_.link(std::max(2.0 * last_switch_, 1.0)), scn_.pattern);
        moment_count_ = max_order_ + kSeriesTerms + 1;
        build_los_table();
        build_moments();
    }

    const NetworkScenario& scenario() const noexcept { return scn_; }
    int max_order() const noexcept { return max_order_; }

    /// LoS probability used by the integrals: exact for the first kExactSteps
    /// steps, asymptotic beyond.
    double los_probability(double r) const {
        const long idx = los_building_index(r, scn_.env);
        if (idx < kExactSteps) return idx < 0 ? 1.0 : los_table_[static_cast<std::size_t>(idx)];
        return smooth_los(r);
    }

    double gain(double r) const { return antenna_gain(scn_.link(r), scn_.pattern); }

    /// Scaled Taylor data of L(s | r0) up to max_order.
    LaplaceSeries laplace_series(double s, double r0, int max_order) const {
        if (s < 0.0) throw DomainError("laplace: s must be non-negative");
        if (r0 < 0.0) throw DomainError("laplace: r0 must be non-negative");
        if (max_order > max_order_) throw CapabilityError("laplace: order exceeds field capacity");
        const std::size_t dim = static_cast<std::size_t>(max_order) + 1;
        LaplaceSeries out;
        out.s = s;
        out.exponent.assign(dim, 0.0);
        if (s == 0.0) {
            out.terms.assign(dim, 0.0);
            out.terms[0] = 1.0;
            out.switch_radius = r0;
            return out;
        }

        std::vector<double> integral(dim, 0.0);
        double error = 0.0;

        // Near field: panel edges from r0 up to the first admissible switch radius.
        std::vector<double> edges{r0};
        auto push_edge = [&](double r) {
            if (r > edges.back()) edges.push_back(r);
        };
        auto series_ok = [&](double r) {
            if (r < last_switch_) return false;
            const double w = r * r + dh2_;
            for (LinkState v : {LinkState::kLos, LinkState::kNlos}) {
                const double m = scn_.channel.fading_order(v);
                const double u = s * scn_.tx_power * far_gain_ * scn_.channel.intercept(v) *
                                 std::pow(w, -0.5 * scn_.channel.alpha(v)) / m;
                if ((m + max_order) * u > quad_.far_field_threshold) return false;
            }
            return true;
        };

        std::optional<long> switch_step;
        double beyond_radius = 0.0;
        {
            std::size_t sw = 0;
            for (long k = std::max<long>(0, los_building_index(r0, scn_.env) + 1); k <= kExactSteps; ++k) {
                const double rb = los_breakpoint(k, scn_.env);
                while (sw < switches_.size() && switches_[sw] < rb) push_edge(switches_[sw++]);
                if (rb <= r0) continue;
                push_edge(rb);
                if (series_ok(rb)) {
                    switch_step = k;
                    break;
                }
            }
            if (!switch_step) {
                // Beyond the exact table: geometric panels until the series applies.
                while (sw < switches_.size()) push_edge(switches_[sw++]);
                double r = std::max(edges.back(), far_start_);
                push_edge(r);
                for (int guard = 0; !series_ok(r); ++guard) {
                    if (guard > 200) {
                        NumericDiagnostics d{};
                        d.radius = r;
                        throw NumericError("laplace: far-field series never becomes valid", d);
                    }
                    r *= 1.5;
                    push_edge(r);
                }
                beyond_radius = r;
            }
        }

        const double inner_abs = std::max(quad_.abs_tol * 1e-2 / two_pi_lambda_, 1e-300);
        quadrature::Tolerance tol{quad_.rel_tol * 1e-2, inner_abs, quad_.max_intervals};
        auto integrand = [&](double r, std::span<double> f) { near_integrand(r, s, max_order, f); };
        const auto near = quadrature::integrate_panels(integrand, edges, dim, tol);
        out.evaluations = near.evaluations;
        if (!near.converged) {
            NumericDiagnostics d{near.evaluations, near.intervals, near.max_error(), edges.back()};
            throw NumericError("laplace: near-field quadrature did not converge", d);
        }
        for (std::size_t k = 0; k < dim; ++k) {
            integral[k] += near.value[k];
            error = std::max(error, near.error[k]);
        }

        // Far field.
        if (switch_step) {
            const std::size_t j = static_cast<std::size_t>(*switch_step - first_moment_step_);
            add_far_series(s, max_order, los_breakpoint(*switch_step, scn_.env), cumulative_[j], integral);
            out.switch_radius = los_breakpoint(*switch_step, scn_.env);
        } else {
            const auto moments = far_moments(beyond_radius);
            add_far_series(s, max_order, beyond_radius, moments, integral);
            out.switch_radius = beyond_radius;
        }

        out.eta = -two_pi_lambda_ * integral[0];
        out.exponent[0] = -out.eta;
        for (std::size_t k = 1; k < dim; ++k) out.exponent[k] = two_pi_lambda_ * integral[k];
        out.error_estimate = two_pi_lambda_ * error;
        out.terms = detail::taylor_terms(out.eta, out.exponent, dim);
        return out;
    }

    double laplace(double s, double r0) const { return laplace_series(s, r0, 0).terms[0]; }

    /// Int_r^inf [P_L c_L + P_N c_N] x dx: mean interference from beyond ground
    /// distance r, divided by 2 pi lambda. Infinite if the tail diverges.
    double mean_power_beyond(double r) const {
        std::vector<double> edges{r};
        std::optional<long> step;
        std::size_t sw = 0;
        for (long k = std::max<long>(0, los_building_index(r, scn_.env) + 1); k <= kExactSteps; ++k) {
            const double rb = los_breakpoint(k, scn_.env);
            while (sw < switches_.size() && switches_[sw] < rb) {
                if (switches_[sw] > edges.back()) edges.push_back(switches_[sw]);
                ++sw;
            }
            if (rb <= r) continue;
            edges.push_back(rb);
            if (rb >= last_switch_) {
                step = k;
                break;
            }
        }
        if (!step) {
            for (; sw < switches_.size(); ++sw)
                if (switches_[sw] > edges.back()) edges.push_back(switches_[sw]);
            if (far_start_ > edges.back()) edges.push_back(far_start_);
        }
        auto integrand = [&](double x) {
            const double p = los_probability(x);
            const double g = gain(x) * scn_.tx_power;
            const LinkGeometry geom = scn_.link(x);
            return x * g * (p * path_loss(geom, scn_.channel, LinkState::kLos) +
                            (1.0 - p) * path_loss(geom, scn_.channel, LinkState::kNlos));
        };
        const auto near = quadrature::integrate_scalar(integrand, edges, {1e-10, 1e-300, quad_.max_intervals});
        const double radius = edges.back();
        const Moments moments =
            step ? cumulative_[static_cast<std::size_t>(*step - first_moment_step_)] : far_moments(radius);
        const double w = radius * radius + dh2_;
        double far = 0.0;
        for (LinkState v : {LinkState::kLos, LinkState::kNlos}) {
            const double m1 = (v == LinkState::kLos ? moments.los : moments.nlos)[1];
            if (m1 == 0.0) continue;
            far += scn_.tx_power * far_gain_ * scn_.channel.intercept(v) *
                   std::pow(w, -0.5 * scn_.channel.alpha(v)) * m1;
        }
        return near.value[0] + far;
    }

private:
    // Moments of the far field, per link state: M[v][q] for q = 1..moment_count_-1,
    // scaled to the reference radius where they start.
    struct Moments {
        std::vector<double> los;
        std::vector<double> nlos;
    };

    void near_integrand(double r, double s, int max_order, std::span<double> f) const {
        std::fill(f.begin(), f.end(), 0.0);
        const double w = r * r + dh2_;
        const double g = gain(r);
        const double p = los_probability(r);
        for (LinkState v : {LinkState::kLos, LinkState::kNlos}) {
            const double weight = v == LinkState::kLos ? p : 1.0 - p;
            if (weight == 0.0) continue;
            const double m = scn_.channel.fading_order(v);
            const double u = s * scn_.tx_power * g * scn_.channel.intercept(v) *
                             std::pow(w, -0.5 * scn_.channel.alpha(v)) / m;
            const double log1pu = std::log1p(u);
            f[0] += weight * -std::expm1(-m * log1pu);
            if (max_order == 0) continue;
            // C(m+k-1, k) u^k (1+u)^{-(m+k)}
            double t = std::exp(-m * log1pu);
            const double ratio = u / (1.0 + u);
            for (int k = 1; k <= max_order; ++k) {
                t *= (m + k - 1.0) / k * ratio;
                f[static_cast<std::size_t>(k)] += weight * t;
            }
        }
        for (double& x : f) x *= r;
    }

    void add_far_series(double s, int max_order, double radius, const Moments& mom,
                        std::vector<double>& integral) const {
        const double w = radius * radius + dh2_;
        for (LinkState v : {LinkState::kLos, LinkState::kNlos}) {
            const auto& M = v == LinkState::kLos ? mom.los : mom.nlos;
            const double m = scn_.channel.fading_order(v);
            const double u = s * scn_.tx_power * far_gain_ * scn_.channel.intercept(v) *
                             std::pow(w, -0.5 * scn_.channel.alpha(v)) / m;
            const std::size_t qmax = M.size() - 1;
            // cu[q] = C(m+q-1, q) u^q
            std::vector<double> cu(qmax + 1, 0.0);
            cu[0] = 1.0;
            for (std::size_t q = 1; q <= qmax; ++q) cu[q] = cu[q - 1] * (m + q - 1.0) / q * u;
            // Component 0: 1 - (1+u)^{-m} = sum_{q>=1} (-1)^{q+1} C(m+q-1,q) u^q
            {
                double sum = 0.0;
                for (std::size_t q = 1; q <= qmax; ++q) {
                    const double term = cu[q] * M[q];
                    sum += (q % 2 == 1) ? term : -term;
                    if (std::abs(term) <= 1e-18 * std::abs(sum)) break;
                }
                integral[0] += sum;
            }
            for (int k = 1; k <= max_order; ++k) {
                double sum = 0.0;
                double d = 1.0;  // C(m+k+l-1, l) u^l
                for (std::size_t l = 0; k + l <= qmax; ++l) {
                    if (l > 0) d *= (m + k + l - 1.0) / static_cast<double>(l) * u;
                    const double term = d * M[static_cast<std::size_t>(k) + l];
                    sum += (l % 2 == 0) ? term : -term;
                    if (l > 0 && std::abs(term) <= 1e-18 * std::abs(sum)) break;
                }
                integral[static_cast<std::size_t>(k)] += cu[static_cast<std::size_t>(k)] * sum;
            }
        }
    }

    void build_los_table() {
        los_table_.resize(static_cast<std::size_t>(kExactSteps));
        for (long k = 0; k < kExactSteps; ++k)
            los_table_[static_cast<std::size_t>(k)] =
                los_probability_for_index(k, scn_.bs_height, scn_.ue_height, scn_.env.c);

        // Euler-Maclaurin data for the midpoint sum of g(h) = log(1 - exp(-h^2 / 2c^2)).
        const double a = scn_.bs_height;
        const double b = scn_.ue_height;
        const double c2 = scn_.env.c * scn_.env.c;
        auto g = [c2](double h) { return std::log(-std::expm1(-h * h / (2.0 * c2))); };
        auto dg = [c2](double h) { return (h / c2) / std::expm1(h * h / (2.0 * c2)); };
        const double last = los_table_.back();
        smooth_zero_ = !(last > 1e-280) || std::min(a, b) <= 0.0;
        if (!smooth_zero_) {
            if (a == b) {
                mean_g_ = g(a);
                edge_slope_ = 0.0;
            } else {
                const double lo = std::min(a, b), hi = std::max(a, b);
                std::vector<double> e{lo, hi};
                const auto res = quadrature::integrate_scalar(g, e, {1e-14, 1e-300, 4000});
                mean_g_ = res.value[0] / (hi - lo);
                edge_slope_ = dg(b) - dg(a);
            }
            // Keep the asymptotic form only where it reproduces the exact product.
            const double n = static_cast<double>(kExactSteps);
            const double approx = smooth_log_los(n - 1.0);
            const double exact = std::log(last);
            smooth_exact_fallback_ = std::abs(approx - exact) > 1e-9 * std::max(1.0, std::abs(exact));
        }
        far_start_ = std::max(los_breakpoint(kExactSteps, scn_.env), last_switch_);
    }

    // Log of the LoS product for a (possibly fractional) building index mu.
    double smooth_log_los(double mu) const {
        const double slots = mu + 1.0;
        const double delta = (scn_.ue_height - scn_.bs_height) / slots;
        return slots * mean_g_ - delta / 24.0 * edge_slope_;
    }

    double smooth_los(double r) const {
        if (smooth_zero_) return 0.0;
        if (smooth_exact_fallback_)
            return los_probability_for_index(los_building_index(r, scn_.env), scn_.bs_height, scn_.ue_height,
                                             scn_.env.c);
        const double mu = r * scn_.env.crossing_rate() - 1.5;
        return std::exp(smooth_log_los(mu));
    }

    // Moments Int_R^inf P_v(r) (w/w_R)^{-q alpha_v/2} r dr, evaluated in log radius.
    Moments far_moments(double radius) const {
        const std::size_t qn = static_cast<std::size_t>(moment_count_);
        const double wr = radius * radius + dh2_;
        const double al = scn_.channel.alpha_los, an = scn_.channel.alpha_nlos;
        auto integrand = [&](double t, std::span<double> f) {
            const double r = radius * std::exp(t);
            const double w = r * r + dh2_;
            const double p = smooth_los(r);
            const double jac = r * r;
            const double lw = std::log(w / wr);
            for (std::size_t q = 1; q < qn; ++q) {
                f[q] = p * jac * std::exp(-0.5 * q * al * lw);
                f[qn + q] = (1.0 - p) * jac * std::exp(-0.5 * q * an * lw);
            }
            f[0] = 0.0;
            f[qn] = 0.0;
        };
        // Extend the log-radius range until the LoS weight has died out or a hard cap.
        double t_end = 8.0;
        while (t_end < 64.0 && smooth_los(radius * std::exp(t_end)) > 1e-22 * std::max(smooth_los(radius), 1e-300))
            t_end *= 2.0;
        std::vector<double> edges;
        for (double t = 0.0; t < t_end; t += 0.5) edges.push_back(t);
        edges.push_back(t_end);
        const auto res = quadrature::integrate_panels(integrand, edges, 2 * qn, {1e-13, 1e-300, 20000});
        Moments out;
        out.los.assign(qn, 0.0);
        out.nlos.assign(qn, 0.0);
        const double r_end = radius * std::exp(t_end);
        const double w_end = r_end * r_end + dh2_;
        const double p_end = smooth_los(r_end);
        for (std::size_t q = 1; q < qn; ++q) {
            out.los[q] = res.value[q] + power_tail(q * al, w_end, wr, p_end);
            out.nlos[q] = res.value[qn + q] + power_tail(q * an, w_end, wr, 1.0 - p_end);
        }
        return out;
    }

    // weight * Int_{w_end}^inf (w/wr)^{-e/2} dw/2, infinite if e <= 2.
    static double power_tail(double e, double w_end, double wr, double weight) {
        if (weight == 0.0) return 0.0;
        if (e <= 2.0) return std::numeric_limits<double>::infinity();
        return weight * 0.5 * w_end * std::exp(-0.5 * e * std::log(w_end / wr)) / (0.5 * e - 1.0);
    }

    void build_moments() {
        // Cumulative moments from every LoS step beyond the last gain switch.
        first_moment_step_ = 0;
        while (first_moment_step_ < kExactSteps && los_breakpoint(first_moment_step_, scn_.env) < last_switch_)
            ++first_moment_step_;
        const std::size_t qn = static_cast<std::size_t>(moment_count_);
        const std::size_t n = static_cast<std::size_t>(kExactSteps - first_moment_step_ + 1);
        cumulative_.assign(n, Moments{});
        const double al = scn_.channel.alpha_los, an = scn_.channel.alpha_nlos;

        Moments tail = far_moments(far_start_);
        if (far_start_ > los_breakpoint(kExactSteps, scn_.env)) {
            // Gain switch lies beyond the table; no step moments are used.
            cumulative_.back() = tail;
            return;
        }
        cumulative_.back() = tail;
        for (long k = kExactSteps - 1; k >= first_moment_step_; --k) {
            const double ra = los_breakpoint(k, scn_.env), rb = los_breakpoint(k + 1, scn_.env);
            const double wa = ra * ra + dh2_, wb = rb * rb + dh2_;
            const double lw = std::log(wb / wa);
            const double p = los_table_[static_cast<std::size_t>(k)];
            const Moments& next = cumulative_[static_cast<std::size_t>(k + 1 - first_moment_step_)];
            Moments cur;
            cur.los.assign(qn, 0.0);
            cur.nlos.assign(qn, 0.0);
            for (std::size_t q = 1; q < qn; ++q) {
                const double el = 1.0 - 0.5 * q * al, en = 1.0 - 0.5 * q * an;
                cur.los[q] = p * 0.5 * wa * detail::expm1_ratio(el, lw) +
                             std::exp(-0.5 * q * al * lw) * next.los[q];
                cur.nlos[q] = (1.0 - p) * 0.5 * wa * detail::expm1_ratio(en, lw) +
                              std::exp(-0.5 * q * an * lw) * next.nlos[q];
            }
            cumulative_[static_cast<std::size_t>(k - first_moment_step_)] = std::move(cur);
        }
    }

    NetworkScenario scn_;
    QuadratureSpec quad_;
    int max_order_ = 0;
    int moment_count_ = 0;
    double two_pi_lambda_ = 0.0;
    double dh2_ = 0.0;
    std::vector<double> switches_;
    double last_switch_ = 0.0;
    double far_gain_ = 0.0;
    double far_start_ = 0.0;
    std::vector<double> los_table_;
    bool smooth_zero_ = false;
    bool smooth_exact_fallback_ = false;
    double mean_g_ = 0.0;
    double edge_slope_ = 0.0;
    long first_moment_step_ = 0;
    std::vector<Moments> cumulative_;
};

/// L_{I|r0}(s).
inline double laplace_interference(double s, double r0, const NetworkScenario& scn, const QuadratureSpec& quad) {
    return InterferenceField(scn, quad, 0).laplace(s, r0);
}

/// d^j/ds^j L_{I|r0}(s) for j = 0..max_order.
inline std::vector<double> laplace_derivatives(double s, double r0, const NetworkScenario& scn,
                                               const QuadratureSpec& quad, int max_order) {
    if (max_order < 0) throw DomainError("laplace_derivatives: negative order");
    if (max_order > kMaxDerivativeOrder)
        throw CapabilityError("laplace_derivatives: order exceeds " + std::to_string(kMaxDerivativeOrder));
    if (max_order > 0 && !(s > 0.0)) throw DomainError("laplace_derivatives: s must be positive for order >= 1");
    const InterferenceField field(scn, quad, max_order);
    const LaplaceSeries series = field.laplace_series(s, r0, max_order);
    std::vector<double> out(series.terms.size());
    double scale = 1.0;  // j! / (-s)^j
    for (std::size_t j = 0; j < out.size(); ++j) {
        if (j > 0) scale *= -static_cast<double>(j) / s;
        out[j] = series.terms[j] * scale;
    }
    return out;
}

namespace detail {

inline double serving_threshold_arg(double r0, const NetworkScenario& scn, LinkState los) {
    return scn.channel.fading_order(los) * scn.sir_threshold / mean_link_power(r0, scn, los);
}

inline double checked_probability(double value, double tol, const char* what) {
    if (!(value >= -tol && value <= 1.0 + tol)) {
        NumericDiagnostics d{};
        d.error_estimate = value;
        throw NumericError(std::string(what) + ": probability outside [0, 1]", d);
    }
    return std::clamp(value, 0.0, 1.0);
}

inline double conditional_coverage(const InterferenceField& field, double r0, LinkState los,
                                   double tol, std::size_t* evaluations = nullptr, double* error = nullptr) {
    const NetworkScenario& scn = field.scenario();
    const int m = scn.channel.fading_order(los);
    const double s = serving_threshold_arg(r0, scn, los);
    const LaplaceSeries series = field.laplace_series(s, r0, m - 1);
    if (evaluations) *evaluations += series.evaluations;
    if (error) *error = std::max(*error, series.error_estimate);
    double sum = 0.0;
    for (double a : series.terms) sum += a;
    return checked_probability(sum, tol, "conditional_coverage");
}

template <class Conditional>
CoverageResult integrate_outer(const InterferenceField& field, const QuadratureSpec& quad, CoverageMethod method,
                               Conditional&& conditional) {
    const NetworkScenario& scn = field.scenario();
    const double r_max = outer_truncation_radius(scn.bs_density, quad.outer_trunc_prob);
    std::vector<double> edges{0.0};
    for (double r : gain_switch_radii(scn.bs_height, scn.ue_height, scn.pattern))
        if (r < r_max) edges.push_back(r);
    if (r_max > los_breakpoint(0, scn.env))
        for (double r : los_breakpoints(scn.env, r_max)) edges.push_back(r);
    edges.push_back(r_max);
    std::sort(edges.begin(), edges.end());
    edges.erase(std::unique(edges.begin(), edges.end()), edges.end());

    CoverageResult result;
    result.method = method;
    auto& diag = result.diagnostics;
    diag.truncation_radius = r_max;
    auto integrand = [&](double r0) {
        const double p = field.los_probability(r0);
        double value = 0.0;
        if (p > 0.0) value += p * conditional(r0, LinkState::kLos, diag);
        if (p < 1.0) value += (1.0 - p) * conditional(r0, LinkState::kNlos, diag);
        return value * serving_distance_pdf(r0, scn.bs_density);
    };
    const auto res =
        quadrature::integrate_scalar(integrand, edges, {quad.rel_tol, quad.abs_tol, quad.max_intervals});
    if (!res.converged) {
        NumericDiagnostics d{res.evaluations, res.intervals, res.max_error(), r_max};
        throw NumericError("coverage: outer quadrature did not converge", d);
    }
    diag.outer_evaluations = res.evaluations;
    diag.quadrature_error = res.error[0];
    diag.truncation_error = quad.outer_trunc_prob;
    result.error_estimate = res.error[0] + quad.outer_trunc_prob + diag.max_inner_error;
    result.probability = checked_probability(res.value[0], 10.0 * result.error_estimate + 1e-12, "coverage");
    return result;
}

}  // namespace detail

/// Coverage of the serving link at ground distance r0 in the given LoS state.
inline double conditional_coverage(double r0, const NetworkScenario& scn, const QuadratureSpec& quad,
                                   LinkState los) {
    const InterferenceField field(scn, quad, scn.channel.fading_order(los) - 1);
    return detail::conditional_coverage(field, r0, los, 1e-6);
}

/// Total coverage probability for integer Nakagami orders.
inline CoverageResult coverage_probability(const NetworkScenario& scn, const QuadratureSpec& quad) {
    const int order = std::max(scn.channel.m_los, scn.channel.m_nlos) - 1;
    const InterferenceField field(scn, quad, order);
    return detail::integrate_outer(
        field, quad, CoverageMethod::kAnalytic, [&](double r0, LinkState los, CoverageDiagnostics& diag) {
            ++diag.inner_integrals;
            return detail::conditional_coverage(field, r0, los, 1e-6, &diag.inner_evaluations,
                                                &diag.max_inner_error);
        });
}

/// Coverage with Rayleigh fading on every link: the Laplace transform itself, no derivatives.
inline CoverageResult rayleigh_coverage(const NetworkScenario& scn, const QuadratureSpec& quad) {
    NetworkScenario rayleigh = scn;
    rayleigh.channel.m_los = 1;
    rayleigh.channel.m_nlos = 1;
    const InterferenceField field(rayleigh, quad, 0);
    return detail::integrate_outer(
        field, quad, CoverageMethod::kRayleighClosedForm,
        [&](double r0, LinkState los, CoverageDiagnostics& diag) {
            ++diag.inner_integrals;
            const double s = detail::serving_threshold_arg(r0, rayleigh, los);
            const LaplaceSeries series = field.laplace_series(s, r0, 0);
            diag.inner_evaluations += series.evaluations;
            diag.max_inner_error = std::max(diag.max_inner_error, series.error_estimate);
            return series.terms[0];
        });
}

}  // namespace dronecov
