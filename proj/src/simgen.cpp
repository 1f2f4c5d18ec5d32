#include "sbnet/simgen.hpp"

#include "sbnet/errors.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace sbnet {

SimCase parse_sim_case(std::string_view text) {
    if (text == "1" || text == "case1") return SimCase::case1;
    if (text == "2" || text == "case2") return SimCase::case2;
    if (text == "3" || text == "case3") return SimCase::case3;
    throw InvalidArgument("unknown simulation case '" + std::string(text) + "' (expected 1, 2 or 3)");
}

int case_number(SimCase c) noexcept { return static_cast<int>(c); }

double NoiseConfig::outcome_std() const noexcept {
    return noise_is_std ? outcome : std::sqrt(outcome);
}

double NoiseConfig::treatment_std(SimCase c) const noexcept {
    const double s = c == SimCase::case1 ? case1 : case23;
    return noise_is_std ? s : std::sqrt(s);
}

Matrix ar1_covariance(std::size_t k, double rho) {
    Matrix s(k, k);
    for (std::size_t j = 0; j < k; ++j)
        for (std::size_t l = 0; l < k; ++l)
            s(j, l) = std::pow(rho, std::abs(static_cast<double>(j) - static_cast<double>(l)));
    return s;
}

Matrix gen_latent_gaussian(std::size_t n, RngStream& rng) {
    static const Matrix chol = cholesky(ar1_covariance(kSimCovariates, 0.5));
    const Matrix z = gaussian_sample(rng, 0.0, 1.0, n, kSimCovariates);
    // Rows of W are L z_i, i.e. W = Z L^T.
    return matmul_nt(z, chol);
}

Matrix gen_covariates(std::size_t n, RngStream& rng) {
    if (n == 0) throw InvalidArgument("gen_covariates: n must be positive");
    Matrix x = gen_latent_gaussian(n, rng);
    for (double& v : x.data()) v = 2.0 * std_normal_cdf(v) - 1.0;
    return x;
}

std::vector<double> propensity(const Matrix& x, SimCase c, std::span<const double> eps) {
    if (x.cols() != kSimCovariates)
        throw DimensionError("propensity: X must have 7 columns, got " + std::to_string(x.cols()));
    if (eps.size() != x.rows()) throw DimensionError("propensity: |eps| must equal rows of X");
    std::vector<double> p(x.rows());
    for (std::size_t i = 0; i < x.rows(); ++i) {
        const double x1 = x(i, 0);
        const double x7 = x(i, 6);
        double index = 0.0;
        switch (c) {
            case SimCase::case1: index = x1 - x7 - 0.5 + eps[i]; break;
            case SimCase::case2: index = 4.0 * (x1 - 0.5) - x7 + eps[i]; break;
            case SimCase::case3: index = std::abs(4.0 * (x1 - 0.5) - x7) + eps[i]; break;
        }
        p[i] = 1.0 / (1.0 + std::exp(index));
    }
    return p;
}

std::vector<double> bernoulli(std::span<const double> p, RngStream& rng) {
    std::vector<double> t(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) t[i] = rng.uniform() < p[i] ? 1.0 : 0.0;
    return t;
}

std::vector<double> gen_treatment(const Matrix& x, SimCase c, RngStream& rng,
                                  const NoiseConfig& noise) {
    const auto eps = gaussian_vector(rng, 0.0, noise.treatment_std(c), x.rows());
    return bernoulli(propensity(x, c, eps), rng);
}

std::vector<double> outcome_mean(const Matrix& x, std::span<const double> t) {
    if (x.cols() < 6) throw DimensionError("outcome_mean: X needs at least 6 columns");
    if (t.size() != x.rows()) throw DimensionError("outcome_mean: |T| must equal rows of X");
    require_binary(t, "outcome_mean: treatment");
    std::vector<double> y(x.rows());
    for (std::size_t i = 0; i < x.rows(); ++i) {
        const auto r = x.row(i);
        const double d = r[0] - 0.3;
        y[i] = 8.0 + 2.0 * t[i] + d * d + 0.5 * r[1] * r[1] * r[1] + 0.6 * (r[2] * r[3]) +
               std::sin(-0.5 * (r[4] + r[5]));
    }
    return y;
}

std::vector<double> gen_outcome(const Matrix& x, std::span<const double> t, RngStream& rng,
                                const NoiseConfig& noise) {
    auto y = outcome_mean(x, t);
    const auto eps = gaussian_vector(rng, 0.0, noise.outcome_std(), y.size());
    for (std::size_t i = 0; i < y.size(); ++i) y[i] += eps[i];
    return y;
}

Dataset gen_dataset(SimCase c, std::size_t n, std::uint64_t seed, const NoiseConfig& noise) {
    if (n < 2) throw InvalidArgument("gen_dataset: n must be at least 2");
    Dataset d;
    RngStream cov_rng(derive_seed(seed, "covariates", 0));
    d.x = gen_covariates(n, cov_rng);
    RngStream treat_rng(derive_seed(seed, "treatment", 0));
    int attempts = 0;
    do {
        if (++attempts > 100)
            throw NumericalError("gen_dataset: treatment fell into a single arm 100 times");
        d.t = gen_treatment(d.x, c, treat_rng, noise);
    } while (std::count(d.t.begin(), d.t.end(), 1.0) == 0 ||
             std::count(d.t.begin(), d.t.end(), 0.0) == 0);
    RngStream out_rng(derive_seed(seed, "outcome", 0));
    d.y = gen_outcome(d.x, d.t, out_rng, noise);
    d.true_ate = kSimTrueAte;
    d.source = "simulation case " + std::to_string(case_number(c));
    for (std::size_t j = 1; j <= kSimCovariates; ++j) d.covariate_names.push_back("x" + std::to_string(j));
    return d;
}

}  // namespace sbnet
