#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <span>
#include <tuple>
#include <vector>

#include "dronecov/channel_model.hpp"
#include "dronecov/quadrature.hpp"

using namespace dronecov;
using Catch::Approx;

namespace {

// Direct product of per-building clearance probabilities, written without the
// library's helpers.
double los_by_hand(double r, double hbs, double hd, const EnvironmentParams& env) {
    const double crossings = r * std::sqrt(env.a * env.b) / 1000.0;
    const long m = static_cast<long>(std::floor(crossings - 1.0));
    double p = 1.0;
    for (long n = 0; n <= m; ++n) {
        const double h = hbs - (n + 0.5) * (hbs - hd) / (m + 1);
        p *= 1.0 - std::exp(-h * h / (2.0 * env.c * env.c));
    }
    return p;
}

// Zeroth and first moments of the fading density by adaptive quadrature.
std::pair<double, double> quadrature_mass(int m, const std::vector<double>& edges) {
    const auto res = quadrature::integrate_panels(
        [&](double x, std::span<double> f) {
            f[0] = fading_pdf(x, m);
            f[1] = x * f[0];
        },
        edges, 2, {1e-12, 1e-15, 5000});
    return {res.value[0], res.value[1]};
}

}  // namespace

TEST_CASE("path loss follows the power law in 3-D distance") {
    const ChannelParams ch;
    const LinkGeometry g{100.0, 30.0, 60.0};
    const double d = std::sqrt(100.0 * 100.0 + 30.0 * 30.0);
    CHECK(path_loss(g, ch, LinkState::kLos) == Approx(std::pow(10.0, -4.11) * std::pow(d, -2.09)).epsilon(1e-14));
    CHECK(path_loss(g, ch, LinkState::kNlos) == Approx(std::pow(10.0, -3.29) * std::pow(d, -3.75)).epsilon(1e-14));
    CHECK_THROWS_AS(path_loss(LinkGeometry{0.0, 30.0, 30.0}, ch, LinkState::kLos), DomainError);
}

TEST_CASE("LoS probability matches the building-grid product") {
    const EnvironmentParams env;
    for (double r : {0.0, 50.0, 81.6, 82.0, 300.0, 1234.5, 5000.0})
        for (double hd : {0.0, 1.5, 30.0, 60.0, 200.0})
            CHECK(los_probability(LinkGeometry{r, 30.0, hd}, env) ==
                  Approx(los_by_hand(r, 30.0, hd, env)).epsilon(1e-12).margin(1e-300));
}

TEST_CASE("LoS probability is 1 before the first step") {
    for (const EnvironmentParams env : {EnvironmentParams{0.1, 750, 8}, EnvironmentParams{}, EnvironmentParams{0.5, 300, 50}}) {
        const double first = los_breakpoint(0, env);
        CHECK(first == Approx(1.0 / env.crossing_rate()));
        for (double r = 0.0; r < first; r += first / 17.0) CHECK(los_probability(LinkGeometry{r, 30.0, 1.5}, env) == 1.0);
        CHECK(los_probability(LinkGeometry{first * 1.0001, 30.0, 1.5}, env) < 1.0);
    }
}

TEST_CASE("LoS probability is constant between consecutive steps") {
    const EnvironmentParams env;
    const auto steps = los_breakpoints(env, 3000.0);
    REQUIRE(steps.size() > 10);
    for (std::size_t k = 0; k + 1 < steps.size(); ++k) {
        const double ref = los_probability(LinkGeometry{steps[k], 30.0, 60.0}, env);
        for (int j = 1; j < 10; ++j) {
            const double r = steps[k] + (steps[k + 1] - steps[k]) * j / 10.0;
            CHECK(los_probability(LinkGeometry{r, 30.0, 60.0}, env) == ref);
        }
    }
}

TEST_CASE("LoS probability grows with user height and is symmetric in the two heights") {
    const EnvironmentParams env;
    for (double r : {100.0, 400.0, 2000.0}) {
        double prev = 0.0;
        for (double hd = 0.0; hd <= 300.0; hd += 5.0) {
            const double p = los_probability(LinkGeometry{r, 30.0, hd}, env);
            CHECK(p >= prev);
            prev = p;
            CHECK(p == Approx(los_probability(LinkGeometry{r, hd, 30.0}, env)).epsilon(1e-12).margin(1e-300));
        }
    }
}

TEST_CASE("breakpoint list stops at r_max") {
    const EnvironmentParams env;
    const auto steps = los_breakpoints(env, 1000.0);
    CHECK(steps.back() <= 1000.0);
    CHECK(los_breakpoint(static_cast<long>(steps.size()), env) > 1000.0);
    CHECK_THROWS_AS(los_breakpoints(env, 0.0), DomainError);
}

TEST_CASE("antenna gain switches at the beam edges") {
    const AntennaPattern pat;   // 40 degree beam tilted 30 degrees down
    const auto radii = gain_switch_radii(30.0, 1.5, pat);
    REQUIRE(radii.size() == 2);
    CHECK(radii[0] == Approx(28.5 / std::tan(deg_to_rad(50.0))));
    CHECK(radii[1] == Approx(28.5 / std::tan(deg_to_rad(10.0))));
    auto gain = [&](double r) { return antenna_gain(LinkGeometry{r, 30.0, 1.5}, pat); };
    CHECK(gain(radii[0] * 0.99) == pat.gain_side);
    CHECK(gain(radii[0] * 1.01) == pat.gain_main);
    CHECK(gain(radii[1] * 0.99) == pat.gain_main);
    CHECK(gain(radii[1] * 1.01) == pat.gain_side);
}

TEST_CASE("users above the antenna stay in the side lobe of a down-tilted beam") {
    const AntennaPattern pat;
    CHECK(gain_switch_radii(30.0, 60.0, pat).empty());
    for (double r : {0.0, 10.0, 100.0, 1e4}) CHECK(antenna_gain(LinkGeometry{r, 30.0, 60.0}, pat) == pat.gain_side);
    const auto up = gain_switch_radii(30.0, 60.0, AntennaPattern::from_degrees(40.0, -10.0, 10.0, 0.5));
    CHECK(up.size() == 1);
}

TEST_CASE("parameter validation rejects unphysical values") {
    CHECK_THROWS_AS((EnvironmentParams{1.0, 500, 15}.validate()), DomainError);
    CHECK_THROWS_AS((EnvironmentParams{0.3, 0, 15}.validate()), DomainError);
    ChannelParams ch;
    ch.alpha_nlos = 2.0;
    CHECK_THROWS_AS(ch.validate(), DomainError);
    ch = {};
    ch.m_los = 0;
    CHECK_THROWS_AS(ch.validate(), DomainError);
    CHECK_THROWS_AS(AntennaPattern::from_degrees(40, 30, 0.5, 0.5).validate(), DomainError);
}

TEST_CASE("fading density integrates to one with unit mean") {
    for (int m : {1, 2, 3, 10, 40}) {
        double mass = 0.0, mean = 0.0;
        const double h = 1e-4;
        for (double x = h / 2; x < 20.0; x += h) {
            mass += fading_pdf(x, m) * h;
            mean += x * fading_pdf(x, m) * h;
        }
        CHECK(mass == Approx(1.0).epsilon(1e-6));
        CHECK(mean == Approx(1.0).epsilon(1e-6));
    }
    CHECK(fading_pdf(-1.0, 2) == 0.0);
    CHECK_THROWS_AS(fading_pdf(1.0, 0), DomainError);
}

TEST_CASE("sampled fading has mean 1 and variance 1/m") {
    for (int m : {1, 3, 16, 17, 100}) {
        auto rng = derive_stream(5, {static_cast<std::uint64_t>(m)});
        const int n = 200000;
        double sum = 0.0, sq = 0.0;
        for (int i = 0; i < n; ++i) {
            const double x = sample_fading(m, rng);
            REQUIRE(x > 0.0);
            sum += x;
            sq += x * x;
        }
        const double mean = sum / n, var = sq / n - mean * mean;
        CHECK(std::abs(mean - 1.0) < 5.0 * std::sqrt(1.0 / m / n));
        CHECK(var == Approx(1.0 / m).epsilon(0.03));
    }
}

TEST_CASE("derived streams are reproducible and distinct") {
    auto a = derive_stream(1, {2, 3}), b = derive_stream(1, {2, 3}), c = derive_stream(1, {3, 2});
    bool differs = false;
    for (int i = 0; i < 8; ++i) {
        const auto x = a(), y = b(), z = c();
        CHECK(x == y);
        differs = differs || x != z;
    }
    CHECK(differs);
    auto u = derive_stream(9, {});
    for (int i = 0; i < 1000; ++i) {
        const double v = uniform_open_closed(u);
        CHECK((v > 0.0 && v <= 1.0));
    }
}

TEST_CASE("hand-evaluated channel values") {
    const ChannelParams ch;
    CHECK(path_loss(LinkGeometry{0.0, 30.0, 60.0}, ch, LinkState::kLos) ==
          Approx(std::pow(10.0, -4.11) * std::pow(30.0, -2.09)).epsilon(1e-14));
    CHECK(los_probability(LinkGeometry{100.0, 30.0, 60.0}, EnvironmentParams{}) ==
          Approx(1.0 - std::exp(-4.5)).epsilon(1e-14));
    const AntennaPattern pat;
    CHECK(antenna_gain(LinkGeometry{100.0, 30.0, 60.0}, pat) == pat.gain_side);
    CHECK(antenna_gain(LinkGeometry{30.0 / std::tan(deg_to_rad(30.0)), 30.0, 0.0}, pat) == pat.gain_main);
    const auto radii = gain_switch_radii(30.0, 0.0, pat);
    REQUIRE(radii.size() == 2);
    CHECK(radii[0] == Approx(25.17).margin(0.01));
    CHECK(radii[1] == Approx(170.14).margin(0.01));
}

TEST_CASE("equal heights give a finite LoS probability") {
    const EnvironmentParams env;
    for (double r : {0.0, 100.0, 5000.0}) {
        const double p = los_probability(LinkGeometry{r, 30.0, 30.0}, env);
        const long m = los_building_index(r, env);
        CHECK(p == Approx(std::pow(1.0 - std::exp(-900.0 / 450.0), static_cast<double>(m + 1))).epsilon(1e-12));
    }
}

TEST_CASE("LoS path loss dominates when its parameters are more favourable") {
    ChannelParams ch;
    ch.intercept_los = ch.intercept_nlos;
    for (double r : {0.0, 5.0, 100.0, 1e4})
        CHECK(path_loss(LinkGeometry{r, 30.0, 1.5}, ch, LinkState::kLos) >=
              path_loss(LinkGeometry{r, 30.0, 1.5}, ch, LinkState::kNlos));
}

TEST_CASE("fading density edge values and tight normalization") {
    CHECK(fading_pdf(0.0, 1) == 1.0);
    CHECK(fading_pdf(0.0, 3) == 0.0);
    for (int m : {1, 3, 100}) {
        const std::vector<double> edges{0.0, 0.5, 1.0, 2.0, 5.0, 60.0};
        const auto mass = quadrature_mass(m, edges);
        CHECK(mass.first == Approx(1.0).epsilon(1e-8));
        CHECK(mass.second == Approx(1.0).epsilon(1e-8));
    }
}

TEST_CASE("a million draws match the gamma moments") {
    auto rng = derive_stream(2024, {});
    for (auto [m, tol_mean, tol_var] : {std::tuple{3, 0.005, 0.01}, std::tuple{1, 0.005, 0.01}, std::tuple{100, 0.005, 0.002}}) {
        double sum = 0.0, sq = 0.0;
        const int n = 1000000;
        for (int i = 0; i < n; ++i) {
            const double x = sample_fading(m, rng);
            sum += x;
            sq += x * x;
        }
        const double mean = sum / n, var = sq / n - mean * mean;
        CHECK(mean == Approx(1.0).margin(tol_mean));
        CHECK(var == Approx(1.0 / m).margin(tol_var));
    }
}

TEST_CASE("building index agrees with the step radii exactly") {
    for (const EnvironmentParams env : {EnvironmentParams{0.1, 750, 8}, EnvironmentParams{}, EnvironmentParams{0.5, 300, 20}})
        for (long k = 0; k < 5000; ++k) {
            const double r = los_breakpoint(k, env);
            CHECK(los_building_index(r, env) == k);
            CHECK(los_building_index(std::nextafter(r, 0.0), env) == k - 1);
        }
}
