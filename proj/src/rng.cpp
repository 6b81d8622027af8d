#include "stratopt/rng.h"

#include "stratopt/numeric.h"

#include <random>
#include <stdexcept>

namespace stratopt {

namespace {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

std::uint64_t mix64(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

// Philox4x32 with 10 rounds, Salmon et al. (Random123) constants.
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> ctr,
                                        std::array<std::uint32_t, 2> key) noexcept {
    constexpr std::uint32_t m0 = 0xD2511F53U;
    constexpr std::uint32_t m1 = 0xCD9E8D57U;
    constexpr std::uint32_t w0 = 0x9E3779B9U;
    constexpr std::uint32_t w1 = 0xBB67AE85U;
    for (int round = 0; round < 10; ++round) {
        const std::uint64_t p0 = static_cast<std::uint64_t>(m0) * ctr[0];
        const std::uint64_t p1 = static_cast<std::uint64_t>(m1) * ctr[2];
        const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
        const auto lo0 = static_cast<std::uint32_t>(p0);
        const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
        const auto lo1 = static_cast<std::uint32_t>(p1);
        ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
        key[0] += w0;
        key[1] += w1;
    }
    return ctr;
}

} // namespace

std::uint64_t hash_combine(std::uint64_t seed, std::string_view text) noexcept {
    // FNV-1a over the bytes, finalised with the splitmix mixer.
    std::uint64_t h = 0xCBF29CE484222325ULL ^ mix64(seed + kGolden);
    for (const char c : text) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001B3ULL;
    }
    return mix64(h);
}

std::uint64_t hash_combine(std::uint64_t seed, std::uint64_t value) noexcept {
    return mix64(mix64(seed + kGolden) ^ mix64(value + 0x632BE59BD9B4E019ULL));
}

RandomStream RandomStream::derive(std::uint64_t seed, std::string_view path) noexcept {
    return RandomStream{hash_combine(seed, path)};
}

RandomStream RandomStream::child(std::string_view name) const noexcept {
    return RandomStream{hash_combine(key_, name)};
}

RandomStream RandomStream::child(std::uint64_t index) const noexcept {
    return RandomStream{hash_combine(key_, index)};
}

RandomStream::result_type RandomStream::operator()() noexcept {
    if (buffered_ == 0) {
        const std::array<std::uint32_t, 4> ctr{static_cast<std::uint32_t>(counter_),
                                               static_cast<std::uint32_t>(counter_ >> 32), 0U,
                                               0U};
        const std::array<std::uint32_t, 2> key{static_cast<std::uint32_t>(key_),
                                               static_cast<std::uint32_t>(key_ >> 32)};
        const auto out = philox4x32(ctr, key);
        ++counter_;
        buffer_[0] = (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
        buffer_[1] = (static_cast<std::uint64_t>(out[2]) << 32) | out[3];
        buffered_ = 2;
    }
    return buffer_[2 - buffered_--];
}

double RandomStream::uniform() noexcept {
    return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53;
}

double RandomStream::normal() noexcept { return normal_quantile(uniform()); }

double RandomStream::chi_square(double dof) {
    if (!(dof > 0.0)) {
        throw std::invalid_argument("chi-square degrees of freedom must be positive");
    }
    std::gamma_distribution<double> gamma(0.5 * dof, 2.0);
    return gamma(*this);
}

} // namespace stratopt
