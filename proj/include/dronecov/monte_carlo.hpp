#pragma once

// Monte Carlo estimator of the same coverage probability: drop a PPP of base
// stations on a finite disk around the user, attach LoS states and Nakagami
// fading, and count drops whose SIR exceeds the threshold.
//
// Every drop draws from its own substreams keyed by (seed, drop, attempt, ring),
// so results do not depend on the worker count or on the order drops run in.
// Base stations are generated ring by ring over fixed-width annuli and then
// clipped to the disk, which makes realizations on nested disks coincide.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <limits>
#include <mutex>
#include <numbers>
#include <optional>
#include <random>
#include <span>
#include <thread>
#include <vector>

#include "dronecov/analytic_coverage.hpp"
#include "dronecov/channel_model.hpp"
#include "dronecov/errors.hpp"
#include "dronecov/rng.hpp"

namespace dronecov {

/// Fix the serving link instead of drawing it from the PPP.
struct Conditioning {
    std::optional<double> serving_distance;   ///< ground distance r0 [m]
    std::optional<LinkState> serving_state;   ///< forced LoS/NLoS state of the serving link

    bool active() const noexcept { return serving_distance.has_value(); }

    bool operator==(const Conditioning&) const = default;
};

struct SimulationSpec {
    std::size_t num_drops = 10000;
    double disk_radius = 0.0;   ///< 0 selects default_disk_radius()
    std::uint64_t seed = 1;
    Conditioning conditioning;
    unsigned workers = 1;       ///< 0 uses every hardware thread

    void validate() const {
        if (num_drops == 0) throw DomainError("simulation: num_drops must be positive");
        if (disk_radius < 0.0 || !std::isfinite(disk_radius))
            throw DomainError("simulation: disk_radius must be finite and non-negative");
        if (conditioning.serving_state && !conditioning.serving_distance)
            throw DomainError("simulation: serving_state requires serving_distance");
        if (conditioning.serving_distance && !(*conditioning.serving_distance >= 0.0))
            throw DomainError("simulation: serving_distance must be non-negative");
    }

    bool operator==(const SimulationSpec&) const = default;
};

struct BaseStationSample {
    double ground_distance = 0.0;
    double azimuth = 0.0;
    LinkState state = LinkState::kNlos;
    double fading = 1.0;
};

struct NetworkRealization {
    std::vector<BaseStationSample> stations;
    std::size_t serving = 0;
    std::size_t attempts = 1;   ///< 1 + number of empty draws that were resampled
};

struct CoverageEstimate {
    double probability = 0.0;
    double std_error = 0.0;
    std::size_t num_drops = 0;
    std::size_t resampled_drops = 0;   ///< drops that had to be redrawn because the disk was empty
    std::size_t interference_free_drops = 0;
    double disk_radius = 0.0;
    double outside_interference_fraction = 0.0;   ///< mean interference share beyond the disk
};

struct LaplaceEstimate {
    double s = 0.0;
    double value = 0.0;
    double std_error = 0.0;
};

struct DiskRadius {
    double radius = 0.0;
    double outside_fraction = 0.0;
};

/// Largest disk the automatic rule will pick [m].
inline constexpr double kMaxAutoDiskRadius = 30000.0;

/// Smallest radius (at least five outer truncation radii) beyond which the mean
/// interference is at most 1e-3 of the mean interference seen past the typical
/// serving distance. Capped at kMaxAutoDiskRadius.
inline DiskRadius default_disk_radius(const NetworkScenario& scn) {
    scn.validate();
    const InterferenceField field(scn, QuadratureSpec{}, 0);
    const double typical = 0.5 / std::sqrt(scn.bs_density);
    const double total = field.mean_power_beyond(typical);
    double radius = 5.0 * outer_truncation_radius(scn.bs_density, 1e-8);
    double fraction = field.mean_power_beyond(radius) / total;
    while (fraction > 1e-3 && radius < kMaxAutoDiskRadius) {
        radius = std::min(radius * 1.05, kMaxAutoDiskRadius);
        fraction = field.mean_power_beyond(radius) / total;
    }
    return {radius, fraction};
}

/// Draws network realizations and evaluates their SIR for one scenario and disk.
class NetworkSampler {
public:
    static constexpr double kRingWidth = 1000.0;
    static constexpr std::uint64_t kServingStream = ~std::uint64_t{0};
    static constexpr std::size_t kMaxAttempts = 10000;

    NetworkSampler(const NetworkScenario& scn, double disk_radius) : scn_(scn), radius_(disk_radius) {
        scn_.validate();
        if (!(disk_radius > 0.0)) throw DomainError("NetworkSampler: disk radius must be positive");
        // Covers the whole outermost ring so clipped stations consume the same draws.
        const double outer = std::ceil(disk_radius / kRingWidth) * kRingWidth;
        const long last = los_building_index(outer, scn_.env) + 1;
        los_table_.reserve(static_cast<std::size_t>(std::max(0L, last) + 1));
        for (long k = 0; k <= last; ++k)
            los_table_.push_back(los_probability_for_index(k, scn_.bs_height, scn_.ue_height, scn_.env.c));
    }

    double disk_radius() const noexcept { return radius_; }
    const NetworkScenario& scenario() const noexcept { return scn_; }

    double los_probability(double r) const {
        const long k = los_building_index(r, scn_.env);
        return k < 0 ? 1.0 : los_table_[static_cast<std::size_t>(k)];
    }

    NetworkRealization sample(std::uint64_t seed, std::uint64_t drop, const Conditioning& cond) const {
        NetworkRealization out;
        const double inner = cond.serving_distance.value_or(0.0);
        if (cond.active()) {
            if (!(inner < radius_)) throw DomainError("sample_network: serving distance outside the disk");
            auto rng = derive_stream(seed, {drop, 0, kServingStream});
            BaseStationSample bs;
            bs.ground_distance = inner;
            bs.azimuth = 2.0 * std::numbers::pi * uniform_open_closed(rng);
            const double u_los = uniform_open_closed(rng);
            bs.state = cond.serving_state.value_or(u_los <= los_probability(inner) ? LinkState::kLos
                                                                                   : LinkState::kNlos);
            bs.fading = sample_fading(scn_.channel.fading_order(bs.state), rng);
            out.stations.push_back(bs);
            draw_rings(seed, drop, 0, inner, out.stations);
            out.serving = 0;
            return out;
        }
        for (std::uint64_t attempt = 0; attempt < kMaxAttempts; ++attempt) {
            out.stations.clear();
            draw_rings(seed, drop, attempt, 0.0, out.stations);
            if (out.stations.empty()) continue;
            out.attempts = attempt + 1;
            out.serving = static_cast<std::size_t>(
                std::min_element(out.stations.begin(), out.stations.end(),
                                 [](const auto& x, const auto& y) { return x.ground_distance < y.ground_distance; }) -
                out.stations.begin());
            return out;
        }
        throw NumericError("sample_network: disk stayed empty", NumericDiagnostics{kMaxAttempts, 0, 0.0, radius_});
    }

    /// Received power G zeta h without the common transmit power.
    double relative_power(const BaseStationSample& bs) const {
        const LinkGeometry g = scn_.link(bs.ground_distance);
        return antenna_gain(g, scn_.pattern) * path_loss(g, scn_.channel, bs.state) * bs.fading;
    }

    /// Transmit power cancels, so SIR is computed from relative powers only.
    /// +inf when there is no interferer.
    double sir(const NetworkRealization& net) const {
        double interference = 0.0;
        for (std::size_t i = 0; i < net.stations.size(); ++i)
            if (i != net.serving) interference += relative_power(net.stations[i]);
        const double signal = relative_power(net.stations.at(net.serving));
        if (interference == 0.0) return std::numeric_limits<double>::infinity();
        return signal / interference;
    }

    /// Aggregate interference power P_t sum G zeta h over non-serving stations.
    double interference(const NetworkRealization& net) const {
        double total = 0.0;
        for (std::size_t i = 0; i < net.stations.size(); ++i)
            if (i != net.serving) total += relative_power(net.stations[i]);
        return scn_.tx_power * total;
    }

private:
    void draw_rings(std::uint64_t seed, std::uint64_t drop, std::uint64_t attempt, double inner,
                    std::vector<BaseStationSample>& out) const {
        const auto rings = static_cast<std::uint64_t>(std::ceil(radius_ / kRingWidth));
        for (std::uint64_t ring = 0; ring < rings; ++ring) {
            const double a = static_cast<double>(ring) * kRingWidth;
            const double b = a + kRingWidth;
            if (b <= inner) continue;
            auto rng = derive_stream(seed, {drop, attempt, ring});
            const double mean = scn_.bs_density * std::numbers::pi * (b * b - a * a);
            const long count = std::poisson_distribution<long>(mean)(rng);
            for (long i = 0; i < count; ++i) {
                BaseStationSample bs;
                const double u_r = uniform_open_closed(rng);
                bs.ground_distance = std::sqrt(a * a + u_r * (b * b - a * a));
                bs.azimuth = 2.0 * std::numbers::pi * uniform_open_closed(rng);
                const double u_los = uniform_open_closed(rng);
                const bool keep = bs.ground_distance <= radius_ && bs.ground_distance > inner;
                bs.state = u_los <= los_probability(bs.ground_distance) ? LinkState::kLos : LinkState::kNlos;
                bs.fading = sample_fading(scn_.channel.fading_order(bs.state), rng);
                if (keep) out.push_back(bs);
            }
        }
    }

    NetworkScenario scn_;
    double radius_;
    std::vector<double> los_table_;
};

inline NetworkRealization sample_network(const NetworkScenario& scn, double disk_radius, std::uint64_t seed,
                                         std::uint64_t drop, const Conditioning& cond = {}) {
    return NetworkSampler(scn, disk_radius).sample(seed, drop, cond);
}

inline double compute_sir(const NetworkRealization& net, const NetworkScenario& scn, double disk_radius) {
    return NetworkSampler(scn, disk_radius).sir(net);
}

namespace detail {

// Runs body(block_index, first_drop, end_drop) over fixed-size blocks on the
// requested number of threads. Block outputs are reduced by the caller in
// block order.
template <class Body>
void for_each_block(std::size_t num_drops, std::size_t block_size, unsigned workers, Body&& body) {
    const std::size_t blocks = (num_drops + block_size - 1) / block_size;
    unsigned threads = workers == 0 ? std::max(1u, std::thread::hardware_concurrency()) : workers;
    threads = static_cast<unsigned>(std::min<std::size_t>(threads, blocks));
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto run = [&] {
        for (;;) {
            const std::size_t blk = next.fetch_add(1);
            if (blk >= blocks) return;
            try {
                body(blk, blk * block_size, std::min(num_drops, (blk + 1) * block_size));
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
                next.store(blocks);
                return;
            }
        }
    };
    if (threads <= 1) {
        run();
    } else {
        std::vector<std::jthread> pool;
        pool.reserve(threads);
        for (unsigned t = 0; t < threads; ++t) pool.emplace_back(run);
    }
    if (failure) std::rethrow_exception(failure);
}

inline constexpr std::size_t kBlockSize = 256;

inline DiskRadius resolve_disk(const NetworkScenario& scn, const SimulationSpec& spec) {
    if (spec.disk_radius > 0.0) {
        const InterferenceField field(scn, QuadratureSpec{}, 0);
        const double total = field.mean_power_beyond(0.5 / std::sqrt(scn.bs_density));
        return {spec.disk_radius, field.mean_power_beyond(spec.disk_radius) / total};
    }
    return default_disk_radius(scn);
}

}  // namespace detail

/// SIR of one drop; +inf when the drop has no interferer.
inline double simulate_drop_sir(const NetworkScenario& scn, const SimulationSpec& spec, std::uint64_t drop) {
    spec.validate();
    const double radius = spec.disk_radius > 0.0 ? spec.disk_radius : default_disk_radius(scn).radius;
    const NetworkSampler sampler(scn, radius);
    return sampler.sir(sampler.sample(spec.seed, drop, spec.conditioning));
}

/// Fraction of drops with SIR > T, with its binomial standard error.
inline CoverageEstimate estimate_coverage(const NetworkScenario& scn, const SimulationSpec& spec) {
    spec.validate();
    scn.validate();
    const DiskRadius disk = detail::resolve_disk(scn, spec);
    const NetworkSampler sampler(scn, disk.radius);

    struct Block {
        std::size_t covered = 0, resampled = 0, free = 0;
    };
    std::vector<Block> blocks((spec.num_drops + detail::kBlockSize - 1) / detail::kBlockSize);
    detail::for_each_block(spec.num_drops, detail::kBlockSize, spec.workers,
                           [&](std::size_t blk, std::size_t first, std::size_t last) {
                               Block out;
                               for (std::size_t d = first; d < last; ++d) {
                                   const auto net = sampler.sample(spec.seed, d, spec.conditioning);
                                   const double sir = sampler.sir(net);
                                   out.resampled += net.attempts > 1 ? 1 : 0;
                                   out.free += std::isinf(sir) ? 1 : 0;
                                   out.covered += sir > scn.sir_threshold ? 1 : 0;
                               }
                               blocks[blk] = out;
                           });
    CoverageEstimate est;
    std::size_t covered = 0;
    for (const Block& b : blocks) {
        covered += b.covered;
        est.resampled_drops += b.resampled;
        est.interference_free_drops += b.free;
    }
    const double n = static_cast<double>(spec.num_drops);
    est.num_drops = spec.num_drops;
    est.probability = static_cast<double>(covered) / n;
    est.std_error = std::sqrt(est.probability * (1.0 - est.probability) / n);
    est.disk_radius = disk.radius;
    est.outside_interference_fraction = disk.outside_fraction;
    return est;
}

/// Empirical E[exp(-s I) | r0] for every s, from one shared set of drops.
inline std::vector<LaplaceEstimate> estimate_laplace_transform(const NetworkScenario& scn, const SimulationSpec& spec,
                                                               std::span<const double> s_values) {
    spec.validate();
    if (!spec.conditioning.serving_distance)
        throw DomainError("estimate_laplace_transform: requires a serving distance");
    for (double s : s_values)
        if (!(s >= 0.0)) throw DomainError("estimate_laplace_transform: s must be non-negative");
    const DiskRadius disk = detail::resolve_disk(scn, spec);
    const NetworkSampler sampler(scn, disk.radius);

    const std::size_t ns = s_values.size();
    const std::size_t nblocks = (spec.num_drops + detail::kBlockSize - 1) / detail::kBlockSize;
    std::vector<double> sums(nblocks * ns, 0.0), squares(nblocks * ns, 0.0);
    detail::for_each_block(spec.num_drops, detail::kBlockSize, spec.workers,
                           [&](std::size_t blk, std::size_t first, std::size_t last) {
                               for (std::size_t d = first; d < last; ++d) {
                                   const double interference =
                                       sampler.interference(sampler.sample(spec.seed, d, spec.conditioning));
                                   for (std::size_t j = 0; j < ns; ++j) {
                                       const double x = std::exp(-s_values[j] * interference);
                                       sums[blk * ns + j] += x;
                                       squares[blk * ns + j] += x * x;
                                   }
                               }
                           });
    std::vector<LaplaceEstimate> out(ns);
    const double n = static_cast<double>(spec.num_drops);
    for (std::size_t j = 0; j < ns; ++j) {
        double sum = 0.0, sq = 0.0;
        for (std::size_t b = 0; b < nblocks; ++b) {
            sum += sums[b * ns + j];
            sq += squares[b * ns + j];
        }
        const double mean = sum / n;
        const double var = std::max(0.0, sq / n - mean * mean) * n / std::max(1.0, n - 1.0);
        out[j] = {s_values[j], mean, std::sqrt(var / n)};
    }
    return out;
}

}  // namespace dronecov
