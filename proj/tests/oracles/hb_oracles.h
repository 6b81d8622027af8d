#pragma once

#include "stratopt/hb.h"

#include <Eigen/Dense>

#include <cmath>
#include <vector>

namespace stratopt::oracle {

/// Column h of every chain's stratum-mean draws, chain by chain.
inline std::vector<std::vector<double>> chains_of(const PosteriorDraws &draws, Eigen::Index h) {
    std::vector<std::vector<double>> out;
    for (const auto &c : draws.chains) {
        out.emplace_back(c.mean.col(h).data(), c.mean.col(h).data() + c.mean.rows());
    }
    return out;
}

struct MonteCarloEstimate {
    double mean{0.0};
    double sd{0.0};
    /// Batch-means standard error of the posterior mean estimate.
    double se_mean{0.0};
    /// Standard error of the posterior SD estimate, from the effective size.
    double se_sd{0.0};
};

/// Pooled mean and SD with batch-means Monte Carlo errors (25 batches per chain).
inline MonteCarloEstimate monte_carlo(const std::vector<std::vector<double>> &chains) {
    double sum = 0.0;
    double sum2 = 0.0;
    std::size_t count = 0;
    for (const auto &c : chains) {
        for (const double x : c) {
            sum += x;
            sum2 += x * x;
            ++count;
        }
    }
    MonteCarloEstimate out;
    out.mean = sum / static_cast<double>(count);
    out.sd = std::sqrt(std::max(0.0, sum2 / static_cast<double>(count) - out.mean * out.mean));
    const std::size_t batches = 25;
    std::vector<double> batch_means;
    for (const auto &c : chains) {
        const std::size_t len = c.size() / batches;
        for (std::size_t b = 0; b < batches; ++b) {
            double s = 0.0;
            for (std::size_t i = b * len; i < (b + 1) * len; ++i) {
                s += c[i];
            }
            batch_means.push_back(s / static_cast<double>(len));
        }
    }
    double var_b = 0.0;
    for (const double m : batch_means) {
        var_b += (m - out.mean) * (m - out.mean);
    }
    var_b /= static_cast<double>(batch_means.size() - 1);
    out.se_mean = std::sqrt(var_b / static_cast<double>(batch_means.size()));
    const double ess = out.sd > 0.0 ? std::min<double>(static_cast<double>(count),
                                                       out.sd * out.sd / (out.se_mean * out.se_mean))
                                    : static_cast<double>(count);
    out.se_sd = out.sd / std::sqrt(2.0 * ess);
    return out;
}

struct GaussianPosterior {
    Eigen::VectorXd mean;
    Eigen::VectorXd sd;
};

/// Exact posterior of theta in the area-level model with sigma2 fixed and
/// beta ~ N(0, tau2 I) integrated out: theta ~ N(0, tau2 Z Z' + sigma2 I)
/// a priori, so the posterior covariance is (Sigma_prior^-1 + Psi^-1)^-1.
inline GaussianPosterior fay_herriot_conjugate(const Eigen::MatrixXd &z, const Eigen::VectorXd &theta_hat,
                                               const Eigen::VectorXd &psi, double sigma2, double tau2) {
    const auto H = z.rows();
    const Eigen::MatrixXd prior = tau2 * z * z.transpose() + sigma2 * Eigen::MatrixXd::Identity(H, H);
    const Eigen::MatrixXd psi_inv = psi.cwiseInverse().asDiagonal();
    const Eigen::MatrixXd cov = (prior.inverse() + psi_inv).inverse();
    GaussianPosterior out;
    out.mean = cov * psi_inv * theta_hat;
    out.sd = cov.diagonal().cwiseSqrt();
    return out;
}

/// Posterior mean and SD of p = logistic(beta) for y ~ Bin(n, p) and
/// beta ~ N(0, tau2), by Simpson quadrature on the beta axis.
inline std::pair<double, double> binomial_quadrature(double y, double n, double tau2) {
    const double centre = std::log((y + 0.5) / (n - y + 0.5));
    const double half = 12.0 * std::sqrt(1.0 / (n * 0.05) + 1.0);
    const int steps = 200'000;
    const double h = 2.0 * half / steps;
    const auto log_post = [&](double b) {
        const double log_p = -std::log1p(std::exp(-b));
        const double log_q = -std::log1p(std::exp(b));
        return y * log_p + (n - y) * log_q - 0.5 * b * b / tau2;
    };
    const double ref = log_post(centre);
    double z0 = 0.0;
    double z1 = 0.0;
    double z2 = 0.0;
    for (int i = 0; i <= steps; ++i) {
        const double b = centre - half + i * h;
        const double w = (i == 0 || i == steps) ? 1.0 : (i % 2 == 1 ? 4.0 : 2.0);
        const double dens = w * std::exp(log_post(b) - ref);
        const double p = 1.0 / (1.0 + std::exp(-b));
        z0 += dens;
        z1 += dens * p;
        z2 += dens * p * p;
    }
    const double m = z1 / z0;
    return {m, std::sqrt(z2 / z0 - m * m)};
}

} // namespace stratopt::oracle
