#pragma once

#include "coxpen/coxph.hpp"
#include "coxpen/weight_vector.hpp"

#include <optional>
#include <vector>

namespace coxpen {

enum class PenaltyKind { lasso, adaptive_lasso };
std::string to_string(PenaltyKind k);
PenaltyKind penalty_kind_from_string(const std::string& s);

struct PathSpec {
    int count = 100;
    // Smallest lambda as a fraction of lambda_max; defaults to 0.01 when
    // p > n and 1e-4 otherwise.
    std::optional<double> min_ratio;
};

struct PenaltyConfig {
    PenaltyKind kind = PenaltyKind::lasso;
    WeightVector weights;          // unit weights for lasso
    std::optional<double> lambda;  // single-lambda fits
    PathSpec path;
};

enum class SweepOrder { forward, reverse };

// Curvature of the local quadratic model in the linear predictor: the exact
// Hessian (proximal Newton) or its diagonal (classic IRLS).
enum class InnerHessian { exact, diagonal };

struct L1Options {
    double tolerance = 1e-7;     // max coefficient change
    // Inner sweeps also stop once no coordinate lowers the local objective
    // by more than this fraction of the null objective.
    double inner_tolerance = 1e-12;
    long max_sweeps = 100000;    // inner coordinate sweeps per fit
    int max_outer = 500;         // quadratic re-expansions per fit
    SweepOrder order = SweepOrder::forward;
    InnerHessian hessian = InnerHessian::exact;
};

// Objective: -(1/n) l(beta) + lambda * sum_j w_j |beta_j|.
double penalized_objective(const SurvivalDataset& data, const Eigen::VectorXd& beta,
                           const WeightVector& weights, double lambda);

// Smallest lambda whose solution is identically zero.
double lambda_max(const SurvivalDataset& data, const WeightVector& weights);

// argmin_b  0.5 * a * b^2 - c * b + t * |b|  for a > 0, t >= 0.
inline double soft_threshold_update(double c, double a, double t) {
    if (c > t) return (c - t) / a;
    if (c < -t) return (c + t) / a;
    return 0.0;
}

/// Cyclic coordinate descent for the weighted-L1 Cox problem at one lambda.
class L1CoxSolver {
public:
    L1CoxSolver(const SurvivalDataset& data, L1Options opts = {});

    CoxFit fit(const WeightVector& weights, double lambda, const Eigen::VectorXd& warm_start = {}) const;
    const SurvivalDataset& data() const { return data_; }

private:
    const SurvivalDataset& data_;
    L1Options opts_;
    RiskSetIndex risk_;
};

CoxFit fit_l1(const SurvivalDataset& data, const PenaltyConfig& config, const L1Options& opts = {});

struct PathResult {
    std::vector<double> lambdas; // descending
    std::vector<CoxFit> fits;
    std::vector<Index> active_sizes;
};

std::vector<double> lambda_path(double lambda_max, Index n, Index p, const PathSpec& spec);

PathResult fit_path(const SurvivalDataset& data, const PenaltyConfig& config, const L1Options& opts = {});
// Path over an explicit descending lambda grid, with warm starts.
PathResult fit_path(const SurvivalDataset& data, const WeightVector& weights, const std::vector<double>& lambdas,
                    const L1Options& opts = {});

} // namespace coxpen
