#include "stratopt/numeric.h"

#include <boost/math/special_functions/erf.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace stratopt {

double round_half_even(double x) noexcept {
    const double lower = std::floor(x);
    const double diff = x - lower;
    if (diff > 0.5) {
        return lower + 1.0;
    }
    if (diff < 0.5) {
        return lower;
    }
    return std::fmod(lower, 2.0) == 0.0 ? lower : lower + 1.0;
}

std::int64_t round_to_count(double x) noexcept {
    return static_cast<std::int64_t>(round_half_even(x));
}

double logit(double p) noexcept { return std::log(p / (1.0 - p)); }

double logistic(double x) noexcept {
    if (x >= 0.0) {
        return 1.0 / (1.0 + std::exp(-x));
    }
    const double e = std::exp(x);
    return e / (1.0 + e);
}

double log1pexp(double x) noexcept {
    if (x > 0.0) {
        return x + std::log1p(std::exp(-x));
    }
    return std::log1p(std::exp(x));
}

double normal_cdf(double x) noexcept { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double normal_quantile(double p) noexcept {
    return -std::sqrt(2.0) * boost::math::erfc_inv(2.0 * p);
}

double truncated_normal_from_uniform(double u, double mean, double sd, double low,
                                     double high) noexcept {
    if (sd <= 0.0) {
        return std::clamp(mean, low, high);
    }
    const double a = normal_cdf((low - mean) / sd);
    const double b = normal_cdf((high - mean) / sd);
    const double p = a + u * (b - a);
    if (p <= 0.0) {
        return low;
    }
    if (p >= 1.0) {
        return high;
    }
    return std::clamp(mean + sd * normal_quantile(p), low, high);
}

double mean(std::span<const double> values) noexcept {
    if (values.empty()) {
        return 0.0;
    }
    return std::accumulate(values.begin(), values.end(), 0.0) /
           static_cast<double>(values.size());
}

double sample_variance(std::span<const double> values) noexcept {
    if (values.size() < 2) {
        return 0.0;
    }
    const double m = mean(values);
    double ss = 0.0;
    for (const double v : values) {
        ss += (v - m) * (v - m);
    }
    return ss / static_cast<double>(values.size() - 1);
}

double population_sd(std::span<const double> values) noexcept {
    if (values.empty()) {
        return 0.0;
    }
    const double m = mean(values);
    double ss = 0.0;
    for (const double v : values) {
        ss += (v - m) * (v - m);
    }
    return std::sqrt(ss / static_cast<double>(values.size()));
}

double sorted_quantile(std::span<const double> sorted, double prob) noexcept {
    if (sorted.empty()) {
        return 0.0;
    }
    const double h = (static_cast<double>(sorted.size()) - 1.0) * prob;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

std::vector<std::int64_t> largest_remainder(std::span<const double> weights, std::int64_t total) {
    const double sum = std::accumulate(weights.begin(), weights.end(), 0.0);
    if (weights.empty() || !(sum > 0.0)) {
        throw std::invalid_argument("largest_remainder: weights must have a positive sum");
    }
    std::vector<std::int64_t> out(weights.size());
    std::vector<std::pair<double, std::size_t>> remainders;
    remainders.reserve(weights.size());
    std::int64_t assigned = 0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        const double quota = static_cast<double>(total) * weights[i] / sum;
        out[i] = static_cast<std::int64_t>(std::floor(quota));
        assigned += out[i];
        remainders.emplace_back(quota - std::floor(quota), i);
    }
    std::stable_sort(remainders.begin(), remainders.end(),
                     [](const auto &a, const auto &b) { return a.first > b.first; });
    for (std::int64_t i = 0; assigned < total; ++i, ++assigned) {
        out[remainders[static_cast<std::size_t>(i) % remainders.size()].second] += 1;
    }
    return out;
}

} // namespace stratopt
