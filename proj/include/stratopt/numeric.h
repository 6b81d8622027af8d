#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace stratopt {

/// Round half to even. Used wherever a nearest-integer rounding is applied to
/// sample sizes, so that x.5 cases do not drift upward systematically.
double round_half_even(double x) noexcept;
std::int64_t round_to_count(double x) noexcept;

double logit(double p) noexcept;
double logistic(double x) noexcept;
/// log(1 + exp(x)) without overflow.
double log1pexp(double x) noexcept;

double normal_cdf(double x) noexcept;
/// Standard normal quantile, relative error well below 1e-12 on (0, 1).
double normal_quantile(double p) noexcept;

/// Inverse-CDF draw from N(mean, sd^2) truncated to [low, high] using a single
/// uniform u in (0, 1).
double truncated_normal_from_uniform(double u, double mean, double sd, double low,
                                     double high) noexcept;

double mean(std::span<const double> values) noexcept;
/// Variance with denominator n - 1. Returns 0 for fewer than two values.
double sample_variance(std::span<const double> values) noexcept;
/// Standard deviation with denominator n.
double population_sd(std::span<const double> values) noexcept;
/// Linear-interpolation quantile (Hyndman-Fan type 7) of sorted data.
double sorted_quantile(std::span<const double> sorted, double prob) noexcept;

/// Distributes `total` units across positive weights with the largest
/// remainder method; the result sums to `total` exactly.
std::vector<std::int64_t> largest_remainder(std::span<const double> weights, std::int64_t total);

} // namespace stratopt
