#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "sbnet/dataset.hpp"
#include "sbnet/linalg.hpp"
#include "sbnet/rng.hpp"

namespace sbnet {

/// Treatment-assignment mechanisms of the synthetic benchmark.
enum class SimCase { case1 = 1, case2 = 2, case3 = 3 };

SimCase parse_sim_case(std::string_view text);
int case_number(SimCase c) noexcept;

inline constexpr std::size_t kSimCovariates = 7;
inline constexpr double kSimTrueAte = 2.0;

/// How the "N(0, s)" noise levels are read. The default treats s as a
/// variance; `noise_is_std` reads it as a standard deviation.
struct NoiseConfig {
    double outcome = 0.01;      // epsilon in the outcome model
    double case1 = 0.01;        // epsilon_1
    double case23 = 0.1;        // epsilon_2, epsilon_3
    bool noise_is_std = false;

    double outcome_std() const noexcept;
    double treatment_std(SimCase c) const noexcept;
};

/// AR(1) correlation matrix sigma_jl = rho^|j-l|.
Matrix ar1_covariance(std::size_t k, double rho);

/// X = 2 Phi(W) - 1 with W ~ N(0, Sigma), Sigma the 7x7 AR(1) matrix with
/// rho = 0.5. Columns are marginally Uniform(-1, 1).
Matrix gen_covariates(std::size_t n, RngStream& rng);
/// The latent Gaussian W behind gen_covariates (same draws for the same rng).
Matrix gen_latent_gaussian(std::size_t n, RngStream& rng);

/// Per-unit propensity e(X) for the case, given the logistic-index noise.
///   case 1: 1 / (1 + exp(X1 - X7 - 0.5 + e1))
///   case 2: 1 / (1 + exp(4 (X1 - 0.5) - X7 + e2))
///   case 3: 1 / (1 + exp(|4 (X1 - 0.5) - X7| + e3))
std::vector<double> propensity(const Matrix& x, SimCase c, std::span<const double> eps);

/// Bernoulli draws T_i ~ Bin(1, p_i).
std::vector<double> bernoulli(std::span<const double> p, RngStream& rng);

/// Fresh per-unit noise, then T ~ Bin(1, e(X)).
std::vector<double> gen_treatment(const Matrix& x, SimCase c, RngStream& rng,
                                  const NoiseConfig& noise = {});

/// Y = 8 + 2T + (X1 - 0.3)^2 + 0.5 X2^3 + 0.6 X3 X4 + sin(-0.5 (X5 + X6)) + eps.
std::vector<double> outcome_mean(const Matrix& x, std::span<const double> t);
std::vector<double> gen_outcome(const Matrix& x, std::span<const double> t, RngStream& rng,
                                const NoiseConfig& noise = {});

/// Covariates, treatment and outcome for one replication; true_ate = 2.
/// Redraws the treatment (up to 100 times) if it lands in a single arm.
Dataset gen_dataset(SimCase c, std::size_t n, std::uint64_t seed, const NoiseConfig& noise = {});

}  // namespace sbnet
