#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <string_view>

namespace stratopt {

/// @brief Counter-based random stream (Philox4x32-10) keyed by a stable path.
///
/// A stream is a pure function of its 64-bit key and a position counter, so
/// any component can derive an independent child stream from a name or an
/// index without consuming draws from its parent. This is what keeps the
/// generator reproducible when strata or replications are processed in
/// parallel or in a different order.
class RandomStream {
  public:
    using result_type = std::uint64_t;

    RandomStream() = default;
    explicit RandomStream(std::uint64_t key) noexcept : key_{key} {}

    /// Root stream for a seed and a path such as "popgen/deff".
    static RandomStream derive(std::uint64_t seed, std::string_view path) noexcept;

    [[nodiscard]] RandomStream child(std::string_view name) const noexcept;
    [[nodiscard]] RandomStream child(std::uint64_t index) const noexcept;

    [[nodiscard]] std::uint64_t key() const noexcept { return key_; }
    [[nodiscard]] std::uint64_t position() const noexcept { return counter_; }

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept {
        return std::numeric_limits<result_type>::max();
    }

    result_type operator()() noexcept;

    /// Uniform on the open interval (0, 1).
    double uniform() noexcept;
    double uniform(double low, double high) noexcept { return low + (high - low) * uniform(); }

    /// Standard normal via the inverse CDF (one uniform per draw).
    double normal() noexcept;
    double normal(double mean, double sd) noexcept { return mean + sd * normal(); }

    /// Chi-square with the given degrees of freedom.
    double chi_square(double dof);

    bool bernoulli(double p) noexcept { return uniform() < p; }

  private:
    std::uint64_t key_{0};
    std::uint64_t counter_{0};
    std::array<std::uint64_t, 2> buffer_{};
    int buffered_{0};
};

std::uint64_t hash_combine(std::uint64_t seed, std::string_view text) noexcept;
std::uint64_t hash_combine(std::uint64_t seed, std::uint64_t value) noexcept;

} // namespace stratopt
