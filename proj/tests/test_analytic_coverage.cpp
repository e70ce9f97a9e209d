#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numbers>

#include "dronecov/analytic_coverage.hpp"
#include "oracle.hpp"

using namespace dronecov;
using Catch::Approx;

namespace {

NetworkScenario fading(int m_los, int m_nlos, double ue_height = 60.0) {
    NetworkScenario scn;
    scn.channel.m_los = m_los;
    scn.channel.m_nlos = m_nlos;
    scn.ue_height = ue_height;
    return scn;
}

double los_s(double r0, const NetworkScenario& scn) {
    return scn.sir_threshold / mean_link_power(r0, scn, LinkState::kLos);
}

// Reference values produced by tests/oracle.hpp (see the hidden [.oracle] case).
struct FrozenConditional {
    int m_los, m_nlos;
    double ue_height, r0;
    LinkState state;
    double value;
};

constexpr FrozenConditional kConditional[] = {
    {1, 3, 60.0, 150.0, LinkState::kLos, 0.011618711888123903},
    {1, 3, 60.0, 50.0, LinkState::kNlos, 1.7628488108139907e-50},
    {3, 1, 60.0, 50.0, LinkState::kLos, 0.49566028216456881},
    {3, 1, 60.0, 150.0, LinkState::kLos, 0.00023692940174341022},
    {3, 1, 60.0, 400.0, LinkState::kLos, 1.6343050441692729e-21},
    {1, 3, 1.5, 100.0, LinkState::kLos, 0.84766972502024662},
    {1, 3, 1.5, 100.0, LinkState::kNlos, 0.216721215579181},
    {3, 1, 1.5, 30.0, LinkState::kLos, 0.96653462696746217},
};

struct FrozenDerivative {
    double r0, value;
};

constexpr FrozenDerivative kFirstDerivative[] = {
    {40.0, -3.0280623333755221e-09},
    {150.0, -4.351342191025907e-11},
    {500.0, -4.9776908012759049e-21},
};

constexpr double kRayleighAerial = 0.307640724396688;   // h_D = 60 m
constexpr double kRayleighGround = 0.676538791977683;   // h_D = 1.5 m
constexpr double kHighUserLaplace = 0.00097145345756951456;   // h_D = 150 m, r0 = 100 m, LoS s

}  // namespace

TEST_CASE("conditional coverage matches frozen reference values") {
    const QuadratureSpec quad;
    for (const auto& c : kConditional) {
        const NetworkScenario scn = fading(c.m_los, c.m_nlos, c.ue_height);
        CHECK(conditional_coverage(c.r0, scn, quad, c.state) == Approx(c.value).epsilon(1e-10));
    }
}

TEST_CASE("first derivative of the Laplace transform matches frozen reference values") {
    const NetworkScenario scn;
    for (const auto& d : kFirstDerivative)
        CHECK(laplace_derivatives(los_s(d.r0, scn), d.r0, scn, {}, 1)[1] == Approx(d.value).epsilon(1e-10));
}

TEST_CASE("Laplace transform reaches far for a user well above the base stations") {
    const NetworkScenario scn = fading(1, 3, 150.0);
    CHECK(laplace_interference(los_s(100.0, scn), 100.0, scn, {}) == Approx(kHighUserLaplace).epsilon(1e-10));
}

TEST_CASE("Rayleigh coverage matches frozen reference values") {
    const QuadratureSpec quad;
    CHECK(rayleigh_coverage(fading(1, 1, 60.0), quad).probability == Approx(kRayleighAerial).epsilon(1e-8));
    CHECK(rayleigh_coverage(fading(1, 1, 1.5), quad).probability == Approx(kRayleighGround).epsilon(1e-8));
}

TEST_CASE("reference values regenerate from the brute-force oracle", "[.oracle]") {
    for (const auto& c : kConditional)
        CHECK(oracle::conditional_coverage(c.r0, fading(c.m_los, c.m_nlos, c.ue_height), c.state) ==
              Approx(c.value).epsilon(1e-12));
    const NetworkScenario scn;
    for (const auto& d : kFirstDerivative)
        CHECK(oracle::laplace_first_derivative(los_s(d.r0, scn), d.r0, scn) == Approx(d.value).epsilon(1e-12));
    const NetworkScenario high = fading(1, 3, 150.0);
    CHECK(oracle::laplace(los_s(100.0, high), 100.0, high, 1e6) == Approx(kHighUserLaplace).epsilon(1e-12));
    CHECK(oracle::rayleigh_coverage(fading(1, 1, 60.0)) == Approx(kRayleighAerial).epsilon(1e-12));
    CHECK(oracle::rayleigh_coverage(fading(1, 1, 1.5)) == Approx(kRayleighGround).epsilon(1e-12));
}

TEST_CASE("Rayleigh closed form and general formula agree for m = 1") {
    const QuadratureSpec quad;
    for (double hd : {1.5, 60.0}) {
        const NetworkScenario scn = fading(1, 1, hd);
        CHECK(coverage_probability(scn, quad).probability ==
              Approx(rayleigh_coverage(scn, quad).probability).epsilon(1e-9));
    }
}

TEST_CASE("serving distance density and the outer cut") {
    const double lambda = 50e-6;
    double mass = 0.0;
    const double h = 0.05;
    for (double r = h / 2; r < 500.0; r += h) mass += serving_distance_pdf(r, lambda) * h;
    CHECK(mass == Approx(1.0 - std::exp(-lambda * std::numbers::pi * 500.0 * 500.0)).epsilon(1e-6));
    const double r_max = outer_truncation_radius(lambda, 1e-8);
    CHECK(std::exp(-lambda * std::numbers::pi * r_max * r_max) == Approx(1e-8).epsilon(1e-12));
    CHECK_THROWS_AS(serving_distance_pdf(-1.0, lambda), DomainError);
}

TEST_CASE("upsilon derivatives match finite differences") {
    const NetworkScenario scn = fading(3, 2);
    for (LinkState st : {LinkState::kLos, LinkState::kNlos}) {
        const double s = 2.0 / mean_link_power(200.0, scn, st), h = 1e-3 * s;
        for (int k = 0; k < 4; ++k) {
            const double fd = (upsilon_derivative(200.0, s + h, scn, st, k) - upsilon_derivative(200.0, s - h, scn, st, k)) /
                              (2 * h);
            CHECK(upsilon_derivative(200.0, s, scn, st, k + 1) == Approx(fd).epsilon(1e-5));
        }
    }
}

TEST_CASE("orders beyond the supported range raise CapabilityError") {
    const NetworkScenario scn;
    CHECK_THROWS_AS(upsilon_derivative(100.0, 1.0, scn, LinkState::kLos, kMaxDerivativeOrder + 1), CapabilityError);
    CHECK_THROWS_AS(laplace_derivatives(1.0, 100.0, scn, {}, kMaxDerivativeOrder + 1), CapabilityError);
    CHECK_THROWS_AS(coverage_probability(fading(kMaxFadingOrder + 1, 1), {}), CapabilityError);
}

TEST_CASE("invalid arguments raise DomainError") {
    const NetworkScenario scn;
    CHECK_THROWS_AS(upsilon(100.0, -1.0, scn, LinkState::kLos), DomainError);
    CHECK_THROWS_AS(laplace_derivatives(0.0, 100.0, scn, {}, 1), DomainError);
    CHECK(laplace_derivatives(0.0, 100.0, scn, {}, 0)[0] == 1.0);
    NetworkScenario bad = scn;
    bad.bs_density = 0.0;
    CHECK_THROWS_AS(coverage_probability(bad, {}), DomainError);
    QuadratureSpec q;
    q.rel_tol = 0.0;
    CHECK_THROWS_AS(coverage_probability(scn, q), DomainError);
}

TEST_CASE("Taylor terms of a pure exponential") {
    // L(s + t) = exp(eta + c t): a_j = exp(eta) c^j / j!.
    const double c = 7.5;
    std::vector<double> exponent(30, 0.0);
    exponent[1] = c;
    const auto terms = detail::taylor_terms(-2.0, exponent, 30);
    for (std::size_t j = 0; j < terms.size(); ++j)
        CHECK(terms[j] == Approx(std::exp(-2.0 + j * std::log(c) - std::lgamma(j + 1.0))).epsilon(1e-12));
}

TEST_CASE("Taylor terms survive an underflowing transform") {
    const double c = 400.0;
    std::vector<double> exponent(800, 0.0);
    exponent[1] = c;
    const auto terms = detail::taylor_terms(-800.0, exponent, 800);
    CHECK(terms[0] == 0.0);
    for (std::size_t j : {300u, 400u, 500u}) {
        const double expected = std::exp(-800.0 + j * std::log(c) - std::lgamma(j + 1.0));
        REQUIRE(expected > 1e-300);
        CHECK(terms[j] == Approx(expected).epsilon(1e-10));
    }
}

TEST_CASE("expm1_ratio is continuous at zero") {
    CHECK(detail::expm1_ratio(0.0, 0.7) == 0.7);
    CHECK(detail::expm1_ratio(1e-12, 0.7) == Approx(0.7).epsilon(1e-11));
    CHECK(detail::expm1_ratio(-2.0, 1.5) == Approx(std::expm1(-3.0) / -2.0));
}

TEST_CASE("the Laplace transform is completely monotone") {
    const NetworkScenario scn = fading(4, 2);
    const InterferenceField field(scn, {}, 12);
    for (double r0 : {20.0, 80.0, 300.0})
        for (double scale : {1e-3, 1.0, 1e3}) {
            const auto series = field.laplace_series(scale * los_s(r0, scn), r0, 12);
            for (double a : series.terms) CHECK(a >= 0.0);
            CHECK(series.terms[0] <= 1.0);
        }
}

TEST_CASE("conditional coverage is the partial sum of the Taylor terms") {
    const NetworkScenario scn = fading(5, 2);
    const InterferenceField field(scn, {}, 4);
    const double r0 = 120.0;
    const double s = detail::serving_threshold_arg(r0, scn, LinkState::kLos);
    const auto series = field.laplace_series(s, r0, 4);
    double sum = 0.0;
    for (double a : series.terms) sum += a;
    CHECK(conditional_coverage(r0, scn, {}, LinkState::kLos) == Approx(sum).epsilon(1e-12));
}

TEST_CASE("coverage does not depend on transmit power") {
    const QuadratureSpec quad;
    NetworkScenario scn = fading(3, 1);
    const double base = coverage_probability(scn, quad).probability;
    for (double factor : {1e-3, 0.1, 10.0, 1e4}) {
        NetworkScenario scaled = scn;
        scaled.tx_power *= factor;
        CHECK(coverage_probability(scaled, quad).probability == Approx(base).epsilon(1e-9));
    }
}

TEST_CASE("coverage probability is a probability with diagnostics") {
    const auto r = coverage_probability(NetworkScenario{}, {});
    CHECK(r.probability > 0.0);
    CHECK(r.probability < 1.0);
    CHECK(r.error_estimate < 1e-6);
    CHECK(r.diagnostics.outer_evaluations > 0);
    CHECK(r.diagnostics.inner_integrals > 0);
    CHECK(r.diagnostics.truncation_radius == Approx(outer_truncation_radius(50e-6, 1e-8)));
    CHECK(std::string(to_string(r.method)) == "analytic");
}

TEST_CASE("a looser far-field switch leaves results unchanged") {
    const NetworkScenario scn = fading(3, 1);
    QuadratureSpec strict;
    strict.far_field_threshold = 0.002;
    for (double r0 : {40.0, 250.0})
        CHECK(conditional_coverage(r0, scn, strict, LinkState::kLos) ==
              Approx(conditional_coverage(r0, scn, {}, LinkState::kLos)).epsilon(1e-9));
}

TEST_CASE("mean interference power beyond a radius matches direct integration") {
    const NetworkScenario scn;
    const InterferenceField field(scn, {}, 0);
    for (double r : {200.0, 1000.0, 10000.0}) {
        const auto res = quadrature::integrate_scalar(
            [&](double x) {
                const double p = los_probability(scn.link(x), scn.env);
                return (p * mean_link_power(x, scn, LinkState::kLos) +
                        (1 - p) * mean_link_power(x, scn, LinkState::kNlos)) * x;
            },
            std::vector<double>{r, 2 * r, 8 * r, 64 * r, 4096 * r}, {1e-12, 0.0, 20000});
        const double tail = scn.tx_power * scn.pattern.gain_side * scn.channel.intercept_nlos *
                            std::pow(4096 * r, 2.0 - scn.channel.alpha_nlos) / (scn.channel.alpha_nlos - 2.0);
        CHECK(field.mean_power_beyond(r) == Approx(res.value[0] + tail).epsilon(1e-6));
    }
}

TEST_CASE("asymptotic LoS probability beyond the exact table agrees at step centres") {
    NetworkScenario scn = fading(1, 3, 150.0);
    const InterferenceField field(scn, {}, 0);
    const double q = scn.env.crossing_rate();
    for (long k : {InterferenceField::kExactSteps + 10, 2 * InterferenceField::kExactSteps, 20000L}) {
        const double r = (k + 1.5) / q;
        const double exact = los_probability_for_index(k, scn.bs_height, scn.ue_height, scn.env.c);
        REQUIRE(exact > 0.0);
        CHECK(field.los_probability(r) == Approx(exact).epsilon(1e-7));
    }
    CHECK(field.los_probability(10.0) == 1.0);
}

TEST_CASE("fading orders beyond the derivative limit still evaluate") {
    const auto r = coverage_probability(fading(40, 40), {});
    CHECK(r.probability > 0.0);
    CHECK(r.probability < 1.0);
}

TEST_CASE("upsilon closed-form values") {
    NetworkScenario scn = fading(3, 3);
    const double r = 120.0;
    const double c = mean_link_power(r, scn, LinkState::kLos);
    CHECK(upsilon(r, 0.0, scn, LinkState::kLos) == 1.0);
    CHECK(upsilon(r, 1.0 / c, scn, LinkState::kLos) == Approx(0.421875).epsilon(1e-14));
    CHECK(upsilon_derivative(r, 2.0 / c, scn, LinkState::kLos, 0) == upsilon(r, 2.0 / c, scn, LinkState::kLos));
    scn = fading(1, 1);
    const double s = 0.7 / c;
    CHECK(upsilon_derivative(r, s, scn, LinkState::kLos, 1) == Approx(-c / std::pow(1.0 + s * c, 2)).epsilon(1e-14));
}

TEST_CASE("upsilon derivatives of every order match finite differences tightly") {
    const NetworkScenario scn = fading(4, 2);
    for (LinkState st : {LinkState::kLos, LinkState::kNlos}) {
        const double s = 0.5 / mean_link_power(300.0, scn, st), h = 1e-4 * s;
        for (int k = 0; k < 8; ++k) {
            const double fd =
                (upsilon_derivative(300.0, s + h, scn, st, k) - upsilon_derivative(300.0, s - h, scn, st, k)) / (2 * h);
            CHECK(upsilon_derivative(300.0, s, scn, st, k + 1) == Approx(fd).epsilon(1e-6));
        }
    }
}

TEST_CASE("transform limits in s and in the threshold") {
    const NetworkScenario scn;
    const QuadratureSpec quad;
    CHECK(laplace_interference(0.0, 100.0, scn, quad) == 1.0);
    CHECK(serving_distance_pdf(0.0, scn.bs_density) == 0.0);
    const double s = los_s(100.0, scn);
    CHECK(laplace_derivatives(s, 100.0, scn, quad, 0)[0] == laplace_interference(s, 100.0, scn, quad));

    NetworkScenario low = fading(3, 2);
    low.sir_threshold = 1e-12;
    CHECK(conditional_coverage(150.0, low, quad, LinkState::kLos) == Approx(1.0).margin(1e-9));
    CHECK(conditional_coverage(150.0, low, quad, LinkState::kNlos) == Approx(1.0).margin(1e-9));
    CHECK(coverage_probability(low, quad).probability == Approx(1.0).margin(2e-8));
    NetworkScenario high = scn;
    high.sir_threshold = 1e12;
    CHECK(rayleigh_coverage(high, quad).probability < 1e-10);

    const NetworkScenario ray = fading(1, 1);
    CHECK(conditional_coverage(150.0, ray, quad, LinkState::kLos) ==
          laplace_interference(los_s(150.0, ray), 150.0, ray, quad));
}
