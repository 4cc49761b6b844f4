#pragma once

#include "coxpen/data.hpp"
#include "coxpen/random.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace coxpen {

enum class CovarianceKind { independent, ar_half, block_half };
enum class CoefScheme { constant_half, range_1_to_10 };

std::string to_string(CovarianceKind k);
std::string to_string(CoefScheme s);
CovarianceKind covariance_kind_from_string(const std::string& s);
CoefScheme coef_scheme_from_string(const std::string& s);

inline constexpr Index kBlockCount = 10;

/**
 * Covariance of the simulated covariates (unit variances):
 *   independent  identity
 *   ar_half      0.5^|i-j|
 *   block_half   0.5 when i != j share i mod 10, else 0
 * Sampling uses exact factorizations that never form the p x p matrix.
 */
class Covariance {
public:
    Covariance(CovarianceKind kind, Index p);

    CovarianceKind kind() const { return kind_; }
    Index p() const { return p_; }
    double entry(Index i, Index j) const;
    Eigen::MatrixXd dense() const;
    // b' Sigma b, summing over the nonzero entries of b.
    double quadratic_form(const Eigen::VectorXd& b) const;
    // n draws from N(0, Sigma), one per row.
    Eigen::MatrixXd sample(Index n, Rng& rng) const;

private:
    CovarianceKind kind_;
    Index p_;
};

Covariance make_covariance(CovarianceKind kind, Index p);

struct SimulationConfig {
    Index n = 400;
    Index p = 150;
    Index phi = 10;
    CoefScheme coef_scheme = CoefScheme::constant_half;
    CovarianceKind covariance = CovarianceKind::independent;
    double alpha = 1.0032;   // Weibull shape
    double rho = 320.7223;   // Weibull scale
    double theta = 0.0;      // target censoring proportion
    std::uint64_t seed = 0;
    std::optional<std::vector<Index>> support; // overrides default placement
    std::optional<double> nu;                  // skips calibration when set
    long calibration_draws = 1000000;
    std::uint64_t calibration_seed = 0;

    void validate() const;
};

// Evenly spaced positions floor(i * p / phi). For block covariance the i-th
// nonzero goes to block i mod 10, spread evenly inside the block, so
// phi = 30 puts 3 nonzeros in every block.
std::vector<Index> default_support(Index p, Index phi, CovarianceKind kind);
Eigen::VectorXd make_coefficients(const SimulationConfig& config);

// T_i = rho * (-log U_i / exp(b'x_i))^(1/alpha).
Eigen::VectorXd sample_survival_times(double alpha, double rho, const Eigen::MatrixXd& x, const Eigen::VectorXd& beta,
                                      const Eigen::VectorXd& uniforms);

struct Calibration {
    double nu = 0.0;               // +inf when theta == 0
    double expected_censoring = 0.0;
    int iterations = 0;
};

// Solves E[1 / (1 + (nu / lambda)^alpha)] = theta with log lambda ~
// N(log rho, b'Sigma b / alpha^2), the expectation taken over a fixed set of
// Monte-Carlo draws (closed form when b'Sigma b = 0).
Calibration calibrate_censoring(const SimulationConfig& config, const Eigen::VectorXd& beta);
Calibration calibrate_censoring(const SimulationConfig& config);

struct SimulatedDataset {
    SurvivalDataset dataset;
    Eigen::VectorXd beta_true;
    double nu = 0.0;
    double achieved_censoring = 0.0;
    Eigen::VectorXd latent_times;
    Eigen::VectorXd censoring_times;
};

SimulatedDataset generate(const SimulationConfig& config);

struct WeibullFit {
    double alpha = 0.0;
    double rho = 0.0;
    double log_likelihood = 0.0;
    double gradient = 0.0; // profile score in alpha at the optimum
    int iterations = 0;
    bool converged = false;
};

// Censored Weibull maximum likelihood, h(t) = (alpha / rho) (t / rho)^(alpha - 1).
WeibullFit fit_weibull_mle(const Eigen::VectorXd& time, const Eigen::VectorXi& status);

} // namespace coxpen
