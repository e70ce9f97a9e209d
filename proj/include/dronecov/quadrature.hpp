#pragma once

// Globally adaptive Gauss-Kronrod (10/21) quadrature for vector-valued
// integrands over a union of panels. Panel endpoints are where the integrand
// may jump; the rule never evaluates at them.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

namespace dronecov::quadrature {

struct Tolerance {
    double rel = 1e-10;
    double abs = 1e-14;
    std::size_t max_intervals = 20000;
};

struct Outcome {
    std::vector<double> value;
    std::vector<double> error;
    std::size_t evaluations = 0;
    std::size_t intervals = 0;
    bool converged = true;

    double max_error() const {
        return error.empty() ? 0.0 : *std::max_element(error.begin(), error.end());
    }
};

namespace detail {

struct Rule {
    std::array<double, 11> nodes{};
    std::array<double, 11> kronrod{};
    std::array<double, 11> gauss{};  // zero on Kronrod-only nodes
};

inline const Rule& gk21() {
    static const Rule rule = [] {
        Rule r;
        const auto& x = boost::math::quadrature::gauss_kronrod<double, 21>::abscissa();
        const auto& wk = boost::math::quadrature::gauss_kronrod<double, 21>::weights();
        const auto& wg = boost::math::quadrature::gauss<double, 10>::weights();
        for (std::size_t i = 0; i < 11; ++i) {
            r.nodes[i] = x[i];
            r.kronrod[i] = wk[i];
            r.gauss[i] = (i % 2 == 1) ? wg[(i - 1) / 2] : 0.0;
        }
        return r;
    }();
    return rule;
}

struct Interval {
    double a = 0.0;
    double b = 0.0;
    std::vector<double> value;
    std::vector<double> error;
    double priority = 0.0;
};

// Fills value/error of iv. Integrand signature: f(x, span<double> out).
template <class F>
void apply_rule(F& f, Interval& iv, std::size_t dim, std::vector<double>& scratch) {
    const Rule& rule = gk21();
    const double centre = 0.5 * (iv.a + iv.b);
    const double half = 0.5 * (iv.b - iv.a);
    iv.value.assign(dim, 0.0);
    std::vector<double> gauss(dim, 0.0);
    scratch.resize(dim);
    auto accumulate = [&](double x, double wk, double wg) {
        f(x, std::span<double>(scratch));
        for (std::size_t k = 0; k < dim; ++k) {
            iv.value[k] += wk * scratch[k];
            gauss[k] += wg * scratch[k];
        }
    };
    accumulate(centre, rule.kronrod[0], rule.gauss[0]);
    for (std::size_t i = 1; i < 11; ++i) {
        const double dx = half * rule.nodes[i];
        accumulate(centre - dx, rule.kronrod[i], rule.gauss[i]);
        accumulate(centre + dx, rule.kronrod[i], rule.gauss[i]);
    }
    iv.error.resize(dim);
    for (std::size_t k = 0; k < dim; ++k) {
        iv.value[k] *= half;
        iv.error[k] = std::abs(iv.value[k] - half * gauss[k]);
    }
}

}  // namespace detail

/// Integrates a dim-component integrand over [edges.front(), edges.back()],
/// treating each [edges[i], edges[i+1]] as a separate smooth panel. Refinement
/// stops once every component satisfies err <= max(abs, rel * |value|).
template <class F>
Outcome integrate_panels(F&& f, std::span<const double> edges, std::size_t dim, const Tolerance& tol) {
    Outcome out;
    out.value.assign(dim, 0.0);
    out.error.assign(dim, 0.0);
    if (edges.size() < 2 || dim == 0) return out;

    std::vector<double> scratch;
    std::vector<detail::Interval> pool;
    pool.reserve(edges.size() - 1);
    for (std::size_t i = 0; i + 1 < edges.size(); ++i) {
        if (!(edges[i + 1] > edges[i])) continue;
        detail::Interval iv{edges[i], edges[i + 1], {}, {}, 0.0};
        detail::apply_rule(f, iv, dim, scratch);
        out.evaluations += 21;
        pool.push_back(std::move(iv));
    }

    auto totals = [&] {
        std::fill(out.value.begin(), out.value.end(), 0.0);
        std::fill(out.error.begin(), out.error.end(), 0.0);
        for (const auto& iv : pool)
            for (std::size_t k = 0; k < dim; ++k) {
                out.value[k] += iv.value[k];
                out.error[k] += iv.error[k];
            }
    };
    auto allowed = [&](std::size_t k) { return std::max(tol.abs, tol.rel * std::abs(out.value[k])); };

    // Priority: error relative to each component's allowance, so the worst
    // component drives refinement.
    auto refresh_priority = [&](detail::Interval& iv) {
        double p = 0.0;
        for (std::size_t k = 0; k < dim; ++k) p = std::max(p, iv.error[k] / allowed(k));
        iv.priority = p;
    };

    totals();
    std::vector<std::size_t> order;
    for (;;) {
        bool done = true;
        for (std::size_t k = 0; k < dim; ++k)
            if (out.error[k] > allowed(k)) done = false;
        if (done) break;
        if (pool.size() >= tol.max_intervals) {
            out.converged = false;
            break;
        }
        // Re-rank against the current totals and bisect the intervals that
        // carry the bulk of the remaining error.
        double mass = 0.0;
        for (auto& iv : pool) {
            refresh_priority(iv);
            mass += iv.priority;
        }
        order.resize(pool.size());
        for (std::size_t i = 0; i < pool.size(); ++i) order[i] = i;
        std::sort(order.begin(), order.end(),
                  [&](std::size_t x, std::size_t y) { return pool[x].priority > pool[y].priority; });
        double taken = 0.0;
        bool split_any = false;
        for (std::size_t idx : order) {
            if (split_any && taken >= 0.5 * mass) break;
            if (pool.size() >= tol.max_intervals) break;
            taken += pool[idx].priority;
            const double mid = 0.5 * (pool[idx].a + pool[idx].b);
            if (!(mid > pool[idx].a && mid < pool[idx].b)) continue;
            detail::Interval right{mid, pool[idx].b, {}, {}, 0.0};
            pool[idx].b = mid;
            detail::apply_rule(f, pool[idx], dim, scratch);
            detail::apply_rule(f, right, dim, scratch);
            out.evaluations += 42;
            pool.push_back(std::move(right));
            split_any = true;
        }
        if (!split_any) {
            out.converged = false;
            break;
        }
        totals();
    }
    out.intervals = pool.size();
    return out;
}

/// Scalar convenience wrapper.
template <class F>
Outcome integrate_scalar(F&& f, std::span<const double> edges, const Tolerance& tol) {
    return integrate_panels([&](double x, std::span<double> out) { out[0] = f(x); }, edges, 1, tol);
}

}  // namespace dronecov::quadrature
