#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <vector>

#include "dronecov/quadrature.hpp"

using namespace dronecov::quadrature;
using Catch::Approx;

TEST_CASE("a single panel integrates polynomials up to degree 31 exactly") {
    const std::vector<double> edges{-0.3, 1.7};
    for (int deg = 0; deg <= 31; ++deg) {
        const auto res = integrate_scalar([&](double x) { return (deg + 1) * std::pow(x, deg); }, edges,
                                          {1e-15, 0.0, 1});
        const double exact = std::pow(1.7, deg + 1) - std::pow(-0.3, deg + 1);
        CHECK(res.value[0] == Approx(exact).epsilon(1e-13));
        CHECK(res.evaluations == 21);
    }
}

TEST_CASE("adaptive refinement reaches the requested tolerance") {
    const std::vector<double> edges{0.0, 10.0};
    const auto res = integrate_scalar([](double x) { return std::exp(-x) * std::cos(5 * x); }, edges, {1e-12, 0.0, 500});
    const double exact = (1.0 - std::exp(-10.0) * (std::cos(50.0) - 5 * std::sin(50.0))) / 26.0;
    CHECK(res.converged);
    CHECK(res.value[0] == Approx(exact).epsilon(1e-11));
}

TEST_CASE("panel edges absorb jumps") {
    const std::vector<double> edges{0.0, 1.0, std::numbers::sqrt2, 3.0};
    auto step = [](double x) { return x < 1.0 ? 1.0 : (x < std::numbers::sqrt2 ? 5.0 : -2.0); };
    const auto res = integrate_scalar(step, edges, {1e-14, 0.0, 3});
    CHECK(res.value[0] == Approx(1.0 + 5.0 * (std::numbers::sqrt2 - 1.0) - 2.0 * (3.0 - std::numbers::sqrt2)));
    CHECK(res.intervals == 3);
}

TEST_CASE("vector integrands share one refinement") {
    const std::vector<double> edges{0.0, 1.0};
    const auto res = integrate_panels(
        [](double x, std::span<double> f) {
            f[0] = std::sqrt(x);
            f[1] = x * x;
        },
        edges, 2, {1e-10, 0.0, 2000});
    CHECK(res.converged);
    CHECK(res.value[0] == Approx(2.0 / 3.0).epsilon(1e-9));
    CHECK(res.value[1] == Approx(1.0 / 3.0).epsilon(1e-14));
}

TEST_CASE("an interval budget that is too small is reported") {
    const std::vector<double> edges{0.0, 1.0};
    const auto res = integrate_scalar([](double x) { return 1.0 / std::sqrt(x); }, edges, {1e-14, 0.0, 4});
    CHECK_FALSE(res.converged);
    CHECK(res.max_error() > 0.0);
}

TEST_CASE("degenerate inputs give zero") {
    CHECK(integrate_scalar([](double) { return 1.0; }, std::vector<double>{1.0}, {}).value[0] == 0.0);
    CHECK(integrate_scalar([](double) { return 1.0; }, std::vector<double>{1.0, 1.0}, {}).value[0] == 0.0);
}
