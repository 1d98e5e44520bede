#pragma once

/// @file common.hpp Shared plumbing: error types, seeded RNG, thread budget.

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace sae {

/// Dimension or shape disagreement between operands.
struct ShapeError : std::runtime_error {
    explicit ShapeError(const std::string &msg) : std::runtime_error(msg) {}
};

/// Invalid configuration value (precondition violation caught before work starts).
struct ConfigError : std::invalid_argument {
    explicit ConfigError(const std::string &msg) : std::invalid_argument(msg) {}
};

/// Filesystem-level failure (missing file, unwritable path).
struct IoError : std::runtime_error {
    explicit IoError(const std::string &msg) : std::runtime_error(msg) {}
};

/// Training aborted: the diagnostic names the epoch/batch that produced a
/// non-finite value.
struct TrainingError : std::runtime_error {
    explicit TrainingError(const std::string &msg) : std::runtime_error(msg) {}
};

namespace detail {
inline std::atomic<unsigned> g_max_threads{1};
}

/// Worker budget for internally parallel kernels. Results are independent of
/// this setting: parallel kernels split work by output row only.
inline void set_max_threads(unsigned n) { detail::g_max_threads.store(n == 0 ? 1 : n); }
inline unsigned max_threads() { return detail::g_max_threads.load(); }

/** Deterministic random source.
 *
 * Wraps std::mt19937_64 (whose output sequence the standard pins down) and
 * derives doubles and bounded integers by hand, so identical seeds give
 * bit-identical streams on every platform and standard library.
 */
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform in [0, 1), 53-bit resolution.
    double next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform in {0, ..., n-1}, unbiased (rejection sampling).
    std::uint64_t next_below(std::uint64_t n) {
        const std::uint64_t limit = std::uint64_t(-1) - std::uint64_t(-1) % n;
        std::uint64_t v = next_u64();
        while (v >= limit) v = next_u64();
        return v % n;
    }

private:
    std::mt19937_64 engine_;
};

/// Derives an independent stream seed from a run seed (splitmix64 finalizer).
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t z = seed + stream * 0x9E3779B97F4A7C15ull + 0x9E3779B97F4A7C15ull;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

namespace detail {
/// Fisher-Yates.
inline void shuffle_indices(std::vector<std::size_t> &idx, Rng &rng) {
    for (std::size_t i = idx.size(); i > 1; --i)
        std::swap(idx[i - 1], idx[rng.next_below(i)]);
}
} // namespace detail

} // namespace sae
