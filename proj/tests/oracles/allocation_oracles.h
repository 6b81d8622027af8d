#pragma once

#include "stratopt/allocation.h"
#include "stratopt/rng.h"

#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

namespace stratopt::oracle {

/// Variance of the estimated total written out from its definition,
/// independent of the library implementation.
inline double total_variance(const std::vector<std::int64_t> &n, const VarianceInputs &in, int d, int k) {
    double v = 0.0;
    for (int h = 0; h < in.strata; ++h) {
        const auto hu = static_cast<std::size_t>(h);
        if (d != 0 && in.domain_of[hu] != d) {
            continue;
        }
        const double N = static_cast<double>(in.N[hu]);
        const double nh = static_cast<double>(n[hu]);
        v += in.DEFF(h, d, k) * (1.0 - nh / N) * N * N * in.S2(h, d, k) / nh;
    }
    return v;
}

inline bool feasible(const std::vector<std::int64_t> &n, const VarianceInputs &in, const PrecisionTargets &t) {
    for (int d = 0; d <= in.domains; ++d) {
        for (int k = 0; k < in.variables; ++k) {
            const double bound = t(d, k) * in.Y(d, k);
            if (total_variance(n, in, d, k) > bound * bound * (1.0 + 1e-12)) {
                return false;
            }
        }
    }
    return true;
}

struct BruteForce {
    double cost{std::numeric_limits<double>::infinity()};
    std::vector<std::int64_t> sizes;
};

/// Exhaustive search over every integer allocation in [n_min_h, N_h].
inline BruteForce exhaustive_optimum(const VarianceInputs &in, const PrecisionTargets &t) {
    BruteForce best;
    std::vector<std::int64_t> n(static_cast<std::size_t>(in.strata));
    for (int h = 0; h < in.strata; ++h) {
        n[static_cast<std::size_t>(h)] = in.n_min[static_cast<std::size_t>(h)];
    }
    while (true) {
        double cost = 0.0;
        for (int h = 0; h < in.strata; ++h) {
            cost += in.cost[static_cast<std::size_t>(h)] * static_cast<double>(n[static_cast<std::size_t>(h)]);
        }
        if (cost < best.cost && feasible(n, in, t)) {
            best = {cost, n};
        }
        int h = 0;
        while (h < in.strata) {
            auto &x = n[static_cast<std::size_t>(h)];
            if (x < in.N[static_cast<std::size_t>(h)]) {
                ++x;
                break;
            }
            x = in.n_min[static_cast<std::size_t>(h)];
            ++h;
        }
        if (h == in.strata) {
            return best;
        }
    }
}

struct RandomInstance {
    VarianceInputs inputs;
    PrecisionTargets targets;
};

/// Random problem with H <= 3, K <= 2, D <= 2 and N_h <= 60. Bounds are set
/// relative to the CV at a quarter sample so constraints bind, capped below one.
inline RandomInstance random_instance(RandomStream &rng) {
    const int H = 1 + static_cast<int>(rng.uniform() * 3.0);
    const int K = 1 + static_cast<int>(rng.uniform() * 2.0);
    const int D = std::min(H, static_cast<int>(rng.uniform() * 3.0));
    RandomInstance out;
    auto &in = out.inputs;
    in.resize(H, D, K);
    for (int k = 0; k < K; ++k) {
        in.variable_names[static_cast<std::size_t>(k)] = "v" + std::to_string(k);
    }
    for (int h = 0; h < H; ++h) {
        const auto hu = static_cast<std::size_t>(h);
        in.N[hu] = 10 + static_cast<std::int64_t>(rng.uniform() * 51.0);
        in.n_min[hu] = 1;
        in.domain_of[hu] = D == 0 ? 1 : 1 + (h * D) / H;
    }
    for (int k = 0; k < K; ++k) {
        std::vector<double> s2(static_cast<std::size_t>(H));
        std::vector<double> deff(static_cast<std::size_t>(H));
        std::vector<double> mean(static_cast<std::size_t>(H));
        for (int h = 0; h < H; ++h) {
            s2[static_cast<std::size_t>(h)] = rng.uniform(0.2, 5.0);
            deff[static_cast<std::size_t>(h)] = rng.uniform(1.0, 1.3);
            mean[static_cast<std::size_t>(h)] = rng.uniform(1.0, 4.0);
        }
        for (int d = 0; d <= D; ++d) {
            double total = 0.0;
            for (int h = 0; h < H; ++h) {
                const auto hu = static_cast<std::size_t>(h);
                if (d == 0 || in.domain_of[hu] == d) {
                    total += static_cast<double>(in.N[hu]) * mean[hu];
                    in.S2(h, d, k) = s2[hu];
                    in.DEFF(h, d, k) = deff[hu];
                }
            }
            in.totals[static_cast<std::size_t>(d * K + k)] = total;
        }
    }
    out.targets = PrecisionTargets::uniform(D, K, 1.0, 1.0);
    std::vector<std::int64_t> quarter(static_cast<std::size_t>(H));
    for (int h = 0; h < H; ++h) {
        quarter[static_cast<std::size_t>(h)] = std::max<std::int64_t>(1, in.N[static_cast<std::size_t>(h)] / 4);
    }
    for (int d = 0; d <= D; ++d) {
        for (int k = 0; k < K; ++k) {
            const double cv = std::sqrt(total_variance(quarter, in, d, k)) / in.Y(d, k);
            out.targets.at(d, k) = std::min(0.9, cv * rng.uniform(0.5, 1.5));
        }
    }
    return out;
}

/// Closed-form continuous optimum of a single national constraint:
/// n_h = (sum_j a_j) a_h / ((gY)^2 + sum_j DEFF_j N_j S_j^2), a_h = N_h S_h sqrt(DEFF_h).
inline std::vector<double> single_constraint_optimum(const VarianceInputs &in, int k, double g) {
    double sum_a = 0.0;
    double sum_b = 0.0;
    for (int h = 0; h < in.strata; ++h) {
        const double N = static_cast<double>(in.N[static_cast<std::size_t>(h)]);
        sum_a += N * std::sqrt(in.S2(h, 0, k) * in.DEFF(h, 0, k));
        sum_b += in.DEFF(h, 0, k) * N * in.S2(h, 0, k);
    }
    const double gy = g * in.Y(0, k);
    std::vector<double> n;
    for (int h = 0; h < in.strata; ++h) {
        const double N = static_cast<double>(in.N[static_cast<std::size_t>(h)]);
        n.push_back(sum_a * N * std::sqrt(in.S2(h, 0, k) * in.DEFF(h, 0, k)) / (gy * gy + sum_b));
    }
    return n;
}

} // namespace stratopt::oracle
