#include "stratopt/allocation.h"

#include "stratopt/numeric.h"
#include "stratopt/text_io.h"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace stratopt {

void PrecisionTargets::validate() const {
    if (bounds.size() != static_cast<std::size_t>((domains + 1) * variables)) {
        throw std::invalid_argument("precision targets: expected " +
                                    std::to_string((domains + 1) * variables) + " bounds");
    }
    for (int d = 0; d <= domains; ++d) {
        for (int k = 0; k < variables; ++k) {
            const double g = (*this)(d, k);
            if (!(g > 0.0 && g < 1.0)) {
                throw std::invalid_argument("precision target g[" + std::to_string(d) + "][" +
                                            std::to_string(k) + "] must lie in (0, 1)");
            }
        }
    }
}

PrecisionTargets PrecisionTargets::uniform(int domains, int variables, double national, double domain) {
    PrecisionTargets t{domains, variables, {}};
    t.bounds.assign(static_cast<std::size_t>((domains + 1) * variables), domain);
    for (int k = 0; k < variables; ++k) {
        t.at(0, k) = national;
    }
    return t;
}

void VarianceInputs::resize(int H, int D, int K) {
    strata = H;
    domains = D;
    variables = K;
    variable_names.resize(static_cast<std::size_t>(K));
    N.assign(static_cast<std::size_t>(H), 0);
    cost.assign(static_cast<std::size_t>(H), 1.0);
    n_min.assign(static_cast<std::size_t>(H), 2);
    domain_of.assign(static_cast<std::size_t>(H), 1);
    totals.assign(static_cast<std::size_t>((D + 1) * K), 0.0);
    s2.assign(static_cast<std::size_t>((D + 1) * K * H), 0.0);
    deff.assign(static_cast<std::size_t>((D + 1) * K * H), 1.0);
}

void VarianceInputs::validate() const {
    const auto H = static_cast<std::size_t>(strata);
    const auto cells = static_cast<std::size_t>((domains + 1) * variables);
    if (N.size() != H || cost.size() != H || n_min.size() != H || domain_of.size() != H ||
        totals.size() != cells || s2.size() != cells * H || deff.size() != cells * H) {
        throw std::invalid_argument("variance inputs: inconsistent dimensions");
    }
    for (std::size_t h = 0; h < H; ++h) {
        if (N[h] < 1) {
            throw std::invalid_argument("variance inputs: N[" + std::to_string(h) + "] must be positive");
        }
        if (!(cost[h] > 0.0)) {
            throw std::invalid_argument("variance inputs: cost[" + std::to_string(h) + "] must be positive");
        }
        if (n_min[h] < 1) {
            throw std::invalid_argument("variance inputs: n_min[" + std::to_string(h) + "] must be at least 1");
        }
    }
    for (std::size_t i = 0; i < s2.size(); ++i) {
        if (!(s2[i] >= 0.0) || !(deff[i] >= 1.0)) {
            throw std::invalid_argument("variance inputs: S2 must be >= 0 and DEFF >= 1");
        }
    }
}

VarianceInputs build_variance_inputs(const BaselineSummary &baseline, std::span<const Variable> variables,
                                     const PrecisionTargets &targets, const VarianceInputOptions &options) {
    const int H = static_cast<int>(baseline.strata.size());
    const int D = baseline.domains;
    const int K = static_cast<int>(variables.size());
    if (H == 0) {
        throw std::invalid_argument("baseline summary covers no strata");
    }
    if (targets.domains != D || targets.variables != K) {
        throw std::invalid_argument("precision targets do not match the problem dimensions");
    }
    VarianceInputs in;
    in.resize(H, D, K);
    for (int k = 0; k < K; ++k) {
        in.variable_names[static_cast<std::size_t>(k)] = std::string{variable_name(variables[static_cast<std::size_t>(k)])};
    }
    for (int h = 0; h < H; ++h) {
        const auto &s = baseline.strata[static_cast<std::size_t>(h)];
        if (s.n < 2) {
            throw std::invalid_argument("baseline stratum " + std::to_string(h) + " has fewer than 2 units");
        }
        const auto hu = static_cast<std::size_t>(h);
        in.N[hu] = s.N;
        in.cost[hu] = options.unit_cost;
        in.n_min[hu] = std::min(options.n_min, s.N);
        in.domain_of[hu] = s.domain;
        for (int k = 0; k < K; ++k) {
            const auto v = variables[static_cast<std::size_t>(k)];
            const auto ki = static_cast<std::size_t>(index_of(v));
            double var = s.sd[ki] * s.sd[ki];
            if (is_binary(v) && var == 0.0) {
                const double n = static_cast<double>(s.n);
                const double p = 0.5 / n;
                var = p * (1.0 - p) * n / (n - 1.0);
                in.warnings.push_back("stratum " + std::to_string(h) + " " + std::string{variable_name(v)} +
                                      ": no variation in baseline, variance floored at " + format_double(var));
            }
            const double total = static_cast<double>(s.N) * s.mean[ki];
            for (int d : {0, s.domain}) {
                in.S2(h, d, k) = var;
                in.totals[static_cast<std::size_t>(d * K + k)] += total;
            }
            for (int d = 0; d <= D; ++d) {
                in.DEFF(h, d, k) = s.deff;
            }
        }
    }
    std::string zero_cells;
    for (int d = 0; d <= D; ++d) {
        for (int k = 0; k < K; ++k) {
            if (!(in.Y(d, k) > 0.0)) {
                zero_cells += " (" + std::to_string(d) + ", " + in.variable_names[static_cast<std::size_t>(k)] + ")";
            }
        }
    }
    if (!zero_cells.empty()) {
        throw std::invalid_argument("zero anticipated total in constrained cells:" + zero_cells);
    }
    return in;
}

double variance_of_total(std::span<const double> n, const VarianceInputs &inputs, int d, int k) {
    if (n.size() != static_cast<std::size_t>(inputs.strata)) {
        throw std::invalid_argument("allocation size does not match the number of strata");
    }
    double var = 0.0;
    for (int h = 0; h < inputs.strata; ++h) {
        const double s2 = inputs.S2(h, d, k);
        if (s2 == 0.0) {
            continue;
        }
        const double nh = n[static_cast<std::size_t>(h)];
        const double Nh = static_cast<double>(inputs.N[static_cast<std::size_t>(h)]);
        if (!(nh > 0.0)) {
            throw std::invalid_argument("stratum " + std::to_string(h) +
                                        " has no sample but contributes variance to area " + std::to_string(d));
        }
        var += inputs.DEFF(h, d, k) * (1.0 - nh / Nh) * Nh * Nh * s2 / nh;
    }
    return var;
}

namespace {

std::vector<double> as_real(const Allocation &allocation) {
    return {allocation.sizes.begin(), allocation.sizes.end()};
}

double ceil_count(double x) { return std::ceil(x * (1.0 - 1e-12)); }

} // namespace

double variance_of_total(const Allocation &allocation, const VarianceInputs &inputs, int d, int k) {
    return variance_of_total(as_real(allocation), inputs, d, k);
}

double cv_of(std::span<const double> n, const VarianceInputs &inputs, int d, int k) {
    const double var = variance_of_total(n, inputs, d, k);
    if (var == 0.0) {
        return 0.0;
    }
    return std::sqrt(var) / inputs.Y(d, k);
}

double cv_of(const Allocation &allocation, const VarianceInputs &inputs, int d, int k) {
    return cv_of(as_real(allocation), inputs, d, k);
}

double neyman_total(const VarianceInputs &inputs, int k, double g) {
    double sum_a = 0.0;
    double sum_fpc = 0.0;
    for (int h = 0; h < inputs.strata; ++h) {
        const double Nh = static_cast<double>(inputs.N[static_cast<std::size_t>(h)]);
        const double deff = inputs.DEFF(h, 0, k);
        const double s2 = inputs.S2(h, 0, k);
        sum_a += Nh * std::sqrt(s2 * deff);
        sum_fpc += deff * Nh * s2;
    }
    if (sum_a == 0.0) {
        throw std::invalid_argument("neyman allocation: every stratum has zero variance for variable " +
                                    inputs.variable_names.at(static_cast<std::size_t>(k)));
    }
    const double gy = g * inputs.Y(0, k);
    return sum_a * sum_a / (gy * gy + sum_fpc);
}

Allocation neyman_allocation(const VarianceInputs &inputs, int k, double g) {
    const double n = neyman_total(inputs, k, g);
    double sum_a = 0.0;
    for (int h = 0; h < inputs.strata; ++h) {
        sum_a += static_cast<double>(inputs.N[static_cast<std::size_t>(h)]) *
                 std::sqrt(inputs.S2(h, 0, k) * inputs.DEFF(h, 0, k));
    }
    Allocation out;
    out.provenance = {AllocationKind::neyman, k, 0.0};
    for (int h = 0; h < inputs.strata; ++h) {
        const auto hu = static_cast<std::size_t>(h);
        const double a = static_cast<double>(inputs.N[hu]) * std::sqrt(inputs.S2(h, 0, k) * inputs.DEFF(h, 0, k));
        const auto nh = static_cast<std::int64_t>(ceil_count(n * a / sum_a));
        out.sizes.push_back(std::clamp(nh, std::min(inputs.n_min[hu], inputs.N[hu]), inputs.N[hu]));
    }
    return out;
}

Allocation nso_max_allocation(std::span<const Allocation> allocations) {
    if (allocations.empty()) {
        throw std::invalid_argument("nso_max_allocation: no allocations given");
    }
    Allocation out;
    out.provenance.kind = AllocationKind::nso_max;
    out.sizes = allocations.front().sizes;
    for (const auto &a : allocations) {
        if (a.sizes.size() != out.sizes.size()) {
            throw std::invalid_argument("nso_max_allocation: allocations cover different strata");
        }
        for (std::size_t h = 0; h < out.sizes.size(); ++h) {
            out.sizes[h] = std::max(out.sizes[h], a.sizes[h]);
        }
    }
    return out;
}

namespace {

// Normalised problem: sum_h a[j][h] / n_h <= 1, lo <= n <= hi, where the
// finite population correction has been moved to the right-hand side:
// sum A/n - sum A/N <= (gY)^2  <=>  sum A/n <= (gY)^2 + sum A/N.
struct NormalisedProblem {
    int H{0};
    std::vector<ConstraintId> ids;
    std::vector<std::vector<double>> a;
    std::vector<double> cost;
    std::vector<double> lo;
    std::vector<double> hi;

    [[nodiscard]] std::size_t J() const { return ids.size(); }

    [[nodiscard]] double load(std::size_t j, const std::vector<double> &n) const {
        double g = 0.0;
        for (int h = 0; h < H; ++h) {
            const auto hu = static_cast<std::size_t>(h);
            g += a[j][hu] / n[hu];
        }
        return g;
    }
};

NormalisedProblem normalise(const VarianceInputs &in, const PrecisionTargets &targets) {
    NormalisedProblem p;
    p.H = in.strata;
    for (int h = 0; h < in.strata; ++h) {
        const auto hu = static_cast<std::size_t>(h);
        p.cost.push_back(in.cost[hu]);
        p.hi.push_back(static_cast<double>(in.N[hu]));
        p.lo.push_back(static_cast<double>(std::min(in.n_min[hu], in.N[hu])));
    }
    for (int d = 0; d <= in.domains; ++d) {
        for (int k = 0; k < in.variables; ++k) {
            std::vector<double> A(static_cast<std::size_t>(in.strata));
            double fpc = 0.0;
            bool any = false;
            for (int h = 0; h < in.strata; ++h) {
                const auto hu = static_cast<std::size_t>(h);
                const double Nh = static_cast<double>(in.N[hu]);
                A[hu] = in.DEFF(h, d, k) * Nh * Nh * in.S2(h, d, k);
                fpc += A[hu] / Nh;
                any = any || A[hu] > 0.0;
            }
            if (!any) {
                continue;
            }
            const double Y = in.Y(d, k);
            if (!(Y > 0.0)) {
                throw std::invalid_argument("bethel: constrained cell (" + std::to_string(d) + ", " +
                                            std::to_string(k) + ") has a non-positive anticipated total");
            }
            const double gy = targets(d, k) * Y;
            const double rhs = gy * gy + fpc;
            for (auto &x : A) {
                x /= rhs;
            }
            p.ids.push_back({d, k});
            p.a.push_back(std::move(A));
        }
    }
    return p;
}

// Minimum cost subject to the single combined constraint sum b_h / n_h <= 1.
void solve_combined(const NormalisedProblem &p, const std::vector<double> &b, std::vector<double> &n) {
    const auto H = static_cast<std::size_t>(p.H);
    n.assign(H, 0.0);
    std::vector<double> ratio(H, 0.0);
    double at_lo = 0.0;
    double t_lo = std::numeric_limits<double>::infinity();
    double t_hi = 0.0;
    for (std::size_t h = 0; h < H; ++h) {
        if (b[h] > 0.0) {
            ratio[h] = std::sqrt(b[h] / p.cost[h]);
            at_lo += b[h] / p.lo[h];
            t_lo = std::min(t_lo, p.lo[h] / ratio[h]);
            t_hi = std::max(t_hi, p.hi[h] / ratio[h]);
        }
    }
    if (at_lo <= 1.0) {
        n = p.lo;
        return;
    }
    auto place = [&](double t) {
        double f = 0.0;
        for (std::size_t h = 0; h < H; ++h) {
            n[h] = b[h] > 0.0 ? std::clamp(t * ratio[h], p.lo[h], p.hi[h]) : p.lo[h];
            f += b[h] / n[h];
        }
        return f;
    };
    double lo = std::log(t_lo);
    double hi = std::log(t_hi);
    for (int it = 0; it < 200 && hi - lo > 1e-15 * std::max(1.0, std::abs(hi)); ++it) {
        const double mid = 0.5 * (lo + hi);
        if (place(std::exp(mid)) > 1.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    const double t = std::exp(hi);
    place(t);
    // Exact solve for the multiplier scale given the clamped set.
    double free_sum = 0.0;
    double fixed_load = 0.0;
    std::vector<bool> is_free(H, false);
    for (std::size_t h = 0; h < H; ++h) {
        if (b[h] > 0.0 && t * ratio[h] > p.lo[h] && t * ratio[h] < p.hi[h]) {
            is_free[h] = true;
            free_sum += b[h] / ratio[h];
        } else {
            fixed_load += b[h] / n[h];
        }
    }
    if (free_sum > 0.0 && fixed_load < 1.0) {
        const double t_exact = free_sum / (1.0 - fixed_load);
        bool consistent = true;
        for (std::size_t h = 0; h < H && consistent; ++h) {
            if (is_free[h]) {
                const double x = t_exact * ratio[h];
                consistent = x >= p.lo[h] && x <= p.hi[h];
            }
        }
        if (consistent) {
            for (std::size_t h = 0; h < H; ++h) {
                if (is_free[h]) {
                    n[h] = t_exact * ratio[h];
                }
            }
        }
    }
}

void allocation_from_multipliers(const NormalisedProblem &p, const std::vector<double> &lambda,
                                 const std::vector<std::size_t> &set, std::vector<double> &n,
                                 std::vector<bool> &free) {
    const auto H = static_cast<std::size_t>(p.H);
    n.assign(H, 0.0);
    free.assign(H, false);
    for (std::size_t h = 0; h < H; ++h) {
        double s = 0.0;
        for (const auto j : set) {
            s += std::max(lambda[j], 0.0) * p.a[j][h];
        }
        const double x = std::sqrt(s / p.cost[h]);
        n[h] = std::clamp(x, p.lo[h], p.hi[h]);
        free[h] = x > p.lo[h] && x < p.hi[h];
    }
}

// Newton iteration on the multipliers of an active set, with set updates.
// Returns true when a KKT point has been reached.
bool polish(const NormalisedProblem &p, std::vector<double> &lambda, std::vector<double> &n) {
    const std::size_t J = p.J();
    std::vector<std::size_t> set;
    for (std::size_t j = 0; j < J; ++j) {
        if (lambda[j] > 0.0) {
            set.push_back(j);
        }
    }
    constexpr double tol = 1e-13;
    std::vector<bool> free;
    for (std::size_t changes = 0; changes < 2 * J + 10; ++changes) {
        if (set.empty()) {
            break;
        }
        const auto m = set.size();
        auto residual = [&](const std::vector<double> &lam, std::vector<double> &nn) {
            allocation_from_multipliers(p, lam, set, nn, free);
            double worst = 0.0;
            Eigen::VectorXd r(static_cast<Eigen::Index>(m));
            for (std::size_t i = 0; i < m; ++i) {
                r(static_cast<Eigen::Index>(i)) = p.load(set[i], nn) - 1.0;
                worst = std::max(worst, std::abs(r(static_cast<Eigen::Index>(i))));
            }
            return std::make_pair(r, worst);
        };
        auto [r, err] = residual(lambda, n);
        for (int it = 0; it < 100 && err > tol; ++it) {
            Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m));
            for (std::size_t h = 0; h < static_cast<std::size_t>(p.H); ++h) {
                if (!free[h]) {
                    continue;
                }
                const double w = 1.0 / (2.0 * p.cost[h] * n[h] * n[h] * n[h]);
                for (std::size_t i = 0; i < m; ++i) {
                    const double ai = p.a[set[i]][h];
                    if (ai == 0.0) {
                        continue;
                    }
                    for (std::size_t l = 0; l < m; ++l) {
                        jac(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(l)) -= ai * p.a[set[l]][h] * w;
                    }
                }
            }
            const Eigen::VectorXd step = jac.completeOrthogonalDecomposition().solve(-r);
            double s = 1.0;
            bool improved = false;
            std::vector<double> trial = lambda;
            std::vector<double> trial_n;
            for (int ls = 0; ls < 40; ++ls, s *= 0.5) {
                for (std::size_t i = 0; i < m; ++i) {
                    trial[set[i]] = lambda[set[i]] + s * step(static_cast<Eigen::Index>(i));
                }
                auto [tr, terr] = residual(trial, trial_n);
                if (terr < err) {
                    lambda = trial;
                    n = trial_n;
                    r = tr;
                    err = terr;
                    improved = true;
                    break;
                }
            }
            if (!improved) {
                break;
            }
        }
        // Drop the most negative multiplier, if any.
        std::size_t worst_neg = J;
        double most_neg = -1e-14;
        for (std::size_t i = 0; i < m; ++i) {
            if (lambda[set[i]] < most_neg) {
                most_neg = lambda[set[i]];
                worst_neg = i;
            }
        }
        if (worst_neg != J) {
            lambda[set[worst_neg]] = 0.0;
            set.erase(set.begin() + static_cast<std::ptrdiff_t>(worst_neg));
            continue;
        }
        if (err > 1e-11) {
            return false;
        }
        // Add the most violated inactive constraint, if any.
        allocation_from_multipliers(p, lambda, set, n, free);
        std::size_t worst_viol = J;
        double max_viol = 1e-12;
        for (std::size_t j = 0; j < J; ++j) {
            if (std::find(set.begin(), set.end(), j) != set.end()) {
                continue;
            }
            const double g = p.load(j, n) - 1.0;
            if (g > max_viol) {
                max_viol = g;
                worst_viol = j;
            }
        }
        if (worst_viol == J) {
            for (std::size_t j = 0; j < J; ++j) {
                if (std::find(set.begin(), set.end(), j) == set.end()) {
                    lambda[j] = 0.0;
                }
            }
            return true;
        }
        set.push_back(worst_viol);
        lambda[worst_viol] = 0.0;
    }
    return false;
}

bool feasible(const std::vector<double> &n, const VarianceInputs &in, const PrecisionTargets &targets,
              const std::vector<ConstraintId> &ids) {
    for (const auto &c : ids) {
        if (cv_of(n, in, c.domain, c.variable) > targets(c.domain, c.variable)) {
            return false;
        }
    }
    return true;
}

} // namespace

bool satisfies_all(const Allocation &allocation, const VarianceInputs &inputs, const PrecisionTargets &targets) {
    const auto n = as_real(allocation);
    for (int d = 0; d <= inputs.domains; ++d) {
        for (int k = 0; k < inputs.variables; ++k) {
            if (cv_of(n, inputs, d, k) > targets(d, k)) {
                return false;
            }
        }
    }
    return true;
}

BethelSolution bethel_solve(const VarianceInputs &inputs, const PrecisionTargets &targets,
                            const BethelOptions &options) {
    inputs.validate();
    targets.validate();
    if (targets.domains != inputs.domains || targets.variables != inputs.variables) {
        throw std::invalid_argument("bethel: targets do not match the problem dimensions");
    }
    const auto p = normalise(inputs, targets);
    const auto H = static_cast<std::size_t>(p.H);
    const std::size_t J = p.J();

    BethelSolution sol;
    sol.constraints = p.ids;
    std::vector<double> n(H);
    std::vector<double> alpha(J, J > 0 ? 1.0 / static_cast<double>(J) : 0.0);
    std::vector<double> lambda(J, 0.0);
    std::vector<double> b(H);
    std::vector<double> load(J);

    auto combined = [&](const std::vector<double> &weights) {
        std::fill(b.begin(), b.end(), 0.0);
        for (std::size_t j = 0; j < J; ++j) {
            for (std::size_t h = 0; h < H; ++h) {
                b[h] += weights[j] * p.a[j][h];
            }
        }
        solve_combined(p, b, n);
        for (std::size_t j = 0; j < J; ++j) {
            load[j] = p.load(j, n);
        }
    };
    auto scale_of = [&]() {
        // n_h = sqrt(L b_h / c_h) for any unclamped stratum gives L = sum of
        // the unnormalised multipliers.
        double best = 0.0;
        for (std::size_t h = 0; h < H; ++h) {
            if (b[h] > 0.0 && n[h] > p.lo[h] && n[h] < p.hi[h]) {
                best = std::max(best, n[h] * n[h] * p.cost[h] / b[h]);
            }
        }
        return best;
    };

    bool converged = J == 0;
    int iter = 0;
    if (J == 0) {
        n = p.lo;
    }
    while (!converged) {
        if (iter >= options.max_iterations) {
            double worst = 0.0;
            for (std::size_t j = 0; j < J; ++j) {
                worst = std::max(worst, load[j] - 1.0);
            }
            throw std::runtime_error("bethel: no convergence after " + std::to_string(iter) +
                                     " iterations (max relative constraint violation " + format_double(worst) + ")");
        }
        ++iter;
        combined(alpha);
        double violation = 0.0;
        double complementarity = 0.0;
        for (std::size_t j = 0; j < J; ++j) {
            violation = std::max(violation, load[j] - 1.0);
            complementarity = std::max(complementarity, alpha[j] * std::abs(load[j] - 1.0));
        }
        std::vector<double> next(J);
        double norm = 0.0;
        for (std::size_t j = 0; j < J; ++j) {
            next[j] = alpha[j] * std::pow(load[j], options.exponent);
            norm += next[j];
        }
        double change = 0.0;
        for (std::size_t j = 0; j < J; ++j) {
            next[j] = options.damping * alpha[j] + (1.0 - options.damping) * next[j] / norm;
            change = std::max(change, std::abs(next[j] - alpha[j]));
        }
        if (violation < options.residual_tolerance && complementarity < options.residual_tolerance &&
            change < options.multiplier_tolerance) {
            const double L = scale_of();
            for (std::size_t j = 0; j < J; ++j) {
                lambda[j] = L * alpha[j];
            }
            converged = true;
            break;
        }
        if (options.polish_interval > 0 && iter % options.polish_interval == 0) {
            const double L = scale_of();
            std::vector<double> trial(J);
            const double cutoff = 1e-6 * *std::max_element(alpha.begin(), alpha.end());
            for (std::size_t j = 0; j < J; ++j) {
                trial[j] = (alpha[j] > cutoff || load[j] > 1.0 - 1e-4) ? std::max(L, 1e-300) * alpha[j] : 0.0;
            }
            std::vector<double> trial_n;
            if (L > 0.0 && polish(p, trial, trial_n)) {
                lambda = trial;
                n = trial_n;
                converged = true;
                break;
            }
        }
        alpha = std::move(next);
    }

    sol.iterations = iter;
    sol.continuous = n;
    const double lambda_sum = std::accumulate(lambda.begin(), lambda.end(), 0.0);
    sol.multipliers.resize(J);
    for (std::size_t j = 0; j < J; ++j) {
        sol.multipliers[j] = lambda_sum > 0.0 ? lambda[j] / lambda_sum : alpha[j];
    }
    for (std::size_t h = 0; h < H; ++h) {
        sol.continuous_cost += p.cost[h] * n[h];
    }
    for (std::size_t j = 0; j < J; ++j) {
        const double slack = 1.0 - p.load(j, n);
        sol.continuous_slack.push_back(slack);
        if (slack < 1e-6) {
            sol.active.push_back(static_cast<int>(j));
        }
    }

    // Integer allocation: round up, try to give back one unit per stratum
    // (largest cost first), then repair any residual violation.
    std::vector<double> rounded(H);
    for (std::size_t h = 0; h < H; ++h) {
        rounded[h] = std::clamp(ceil_count(n[h]), p.lo[h], p.hi[h]);
    }
    std::vector<std::size_t> order(H);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
        if (p.cost[x] != p.cost[y]) {
            return p.cost[x] > p.cost[y];
        }
        return (rounded[x] - n[x]) > (rounded[y] - n[y]);
    });
    if (feasible(rounded, inputs, targets, p.ids)) {
        for (const auto h : order) {
            if (rounded[h] - 1.0 < p.lo[h]) {
                continue;
            }
            rounded[h] -= 1.0;
            if (!feasible(rounded, inputs, targets, p.ids)) {
                rounded[h] += 1.0;
            }
        }
    }
    while (!feasible(rounded, inputs, targets, p.ids)) {
        // Add a unit where it buys the largest normalised variance reduction
        // over the violated constraints per unit cost.
        std::size_t best = H;
        double best_gain = 0.0;
        for (std::size_t h = 0; h < H; ++h) {
            if (rounded[h] + 1.0 > p.hi[h]) {
                continue;
            }
            double gain = 0.0;
            for (std::size_t j = 0; j < J; ++j) {
                if (p.load(j, rounded) > 1.0) {
                    gain += p.a[j][h] * (1.0 / rounded[h] - 1.0 / (rounded[h] + 1.0));
                }
            }
            gain /= p.cost[h];
            if (gain > best_gain) {
                best_gain = gain;
                best = h;
            }
        }
        if (best == H) {
            throw std::runtime_error("bethel: rounded allocation cannot be made feasible");
        }
        rounded[best] += 1.0;
    }
    sol.rounded.provenance.kind = AllocationKind::bethel;
    for (std::size_t h = 0; h < H; ++h) {
        sol.rounded.sizes.push_back(static_cast<std::int64_t>(rounded[h]));
        sol.rounded_cost += p.cost[h] * rounded[h];
    }
    for (const auto &c : p.ids) {
        const double gy = targets(c.domain, c.variable) * inputs.Y(c.domain, c.variable);
        sol.slack.push_back(1.0 - variance_of_total(rounded, inputs, c.domain, c.variable) / (gy * gy));
    }
    return sol;
}

double deff_cluster(double take, double rho) { return 1.0 + (take - 1.0) * rho; }

ClusterDesign preserve_deff_reduction(std::int64_t psus, double take, double scale) {
    if (!(scale > 0.0 && scale <= 1.0)) {
        throw std::invalid_argument("preserve_deff_reduction: scale must lie in (0, 1]");
    }
    return {round_to_count(scale * static_cast<double>(psus)), take};
}

} // namespace stratopt
