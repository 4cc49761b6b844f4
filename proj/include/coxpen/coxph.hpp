#pragma once

#include "coxpen/data.hpp"

#include <Eigen/Core>

#include <string>
#include <vector>

namespace coxpen {

/**
 * Subjects sorted by observed time with tie groups.
 *
 * Group g holds the subjects whose time equals the g-th distinct time. The
 * Breslow risk set of group g is every subject in groups g, g+1, ...; risk
 * sets are nested by construction.
 */
class RiskSetIndex {
public:
    RiskSetIndex() = default;
    RiskSetIndex(const Eigen::VectorXd& time, const Eigen::VectorXi& status);

    Index n() const { return static_cast<Index>(order_.size()); }
    Index groups() const { return static_cast<Index>(group_events_.size()); }
    // Subjects in ascending time order.
    const std::vector<Index>& order() const { return order_; }
    // Position range [group_begin(g), group_begin(g+1)) in order().
    Index group_begin(Index g) const { return group_start_[static_cast<std::size_t>(g)]; }
    Index group_events(Index g) const { return group_events_[static_cast<std::size_t>(g)]; }
    Index group_of(Index subject) const { return group_of_[static_cast<std::size_t>(subject)]; }
    double group_time(Index g) const { return group_time_[static_cast<std::size_t>(g)]; }
    // Members of the risk set for group g: order()[group_begin(g)] .. end.
    Index risk_set_size(Index g) const { return n() - group_begin(g); }

private:
    std::vector<Index> order_;
    std::vector<Index> group_start_; // size groups()+1
    std::vector<Index> group_events_;
    std::vector<double> group_time_;
    std::vector<Index> group_of_;
};

/// Partial-likelihood quantities on the linear-predictor scale.
struct EtaDerivatives {
    double loglik = 0.0;
    Eigen::VectorXd grad; // dl/d eta
    Eigen::VectorXd diag; // -d2l/d eta_k^2
};

// Breslow log partial likelihood and its first/diagonal-second derivatives
// with respect to the linear predictor eta. Risk-set sums are accumulated
// in the log domain, so extreme predictors neither overflow nor underflow.
EtaDerivatives eta_derivatives(const RiskSetIndex& risk, const Eigen::VectorXi& status,
                               const Eigen::VectorXd& eta, bool with_derivatives = true);

// Log partial likelihood at a line-search trial point: -inf where the
// likelihood overflows, so the caller shortens the step instead of failing.
double trial_loglik(const RiskSetIndex& risk, const Eigen::VectorXi& status, const Eigen::VectorXd& eta);

/**
 * Exact -d2l/d eta2 at a fixed eta as an operator. The matrix is
 * diag(w_i A_i) - sum_g c_g (w 1_{R_g})(w 1_{R_g})' with w = exp(eta), A_i
 * the cumulative sum of d_g / S_g over groups up to subject i and
 * c_g = d_g / S_g^2, so a product costs O(n) and the n x n matrix is never
 * formed. Everything is held relative to S_g of the subject's own group.
 */
class EtaHessian {
public:
    EtaHessian(const RiskSetIndex& risk, const Eigen::VectorXd& eta);

    // H v for an n-vector v (subject order).
    Eigen::VectorXd apply(const Eigen::VectorXd& v) const;
    Eigen::VectorXd diagonal() const;

private:
    const RiskSetIndex* risk_;
    Eigen::VectorXd eta_;
    std::vector<double> log_s_; // log S_g per group
    Eigen::VectorXd ratio_;     // w_i / S_g(i)
    Eigen::VectorXd q1_;        // S_g(i) A_i
    Eigen::VectorXd q2_;        // S_g(i)^2 sum_{g' <= g(i)} c_g'

};

/// Estimated coefficients plus solver diagnostics.
enum class WeightSource { none, unit, ridge, pca, uni, rsf };
std::string to_string(WeightSource s);
WeightSource weight_source_from_string(const std::string& s);

struct CoxFit {
    Eigen::VectorXd beta;
    double log_partial_likelihood = 0.0;
    int n_iterations = 0;
    bool converged = false;
    double lambda = 0.0; // 0 for unpenalized fits
    WeightSource weights_id = WeightSource::none;
    std::vector<std::string> warnings;
};

double log_partial_likelihood(const SurvivalDataset& data, const Eigen::VectorXd& beta);
Eigen::VectorXd gradient(const SurvivalDataset& data, const Eigen::VectorXd& beta);
// Observed information -d2l/dbeta2 (p x p, positive semidefinite).
Eigen::MatrixXd information(const SurvivalDataset& data, const Eigen::VectorXd& beta);

Eigen::VectorXd risk_scores(const SurvivalDataset& data, const Eigen::VectorXd& beta);
Eigen::VectorXd hazard_ratios(const CoxFit& fit);

struct NewtonOptions {
    int max_iterations = 100;
    double step_tolerance = 1e-8;       // max |update|
    double objective_tolerance = 1e-10; // relative change of the objective
    int max_halvings = 40;
};

/**
 * Maximizes l(beta) - ridge_lambda * ||beta||^2 by damped Newton.
 *
 * With ridge_lambda == 0 the fit is refused (IllPosedError) unless p is
 * below the number of events. When p > n the problem is solved in the
 * row space of X (thin SVD), where the ridge solution lives.
 */
CoxFit newton_fit(const SurvivalDataset& data, double ridge_lambda, const NewtonOptions& opts = {});

/// Reusable ridge Newton solver; precomputes the risk sets and, for p > n,
/// the row-space reduction so repeated fits over a lambda grid are cheap.
class RidgeCoxSolver {
public:
    explicit RidgeCoxSolver(const SurvivalDataset& data, NewtonOptions opts = {});

    // Warm start is given on the original coefficient scale (may be empty).
    CoxFit fit(double ridge_lambda, const Eigen::VectorXd& warm_start = {}) const;
    bool reduced() const { return reduced_; }
    Index dimension() const { return z_.cols(); }

private:
    const SurvivalDataset& data_;
    NewtonOptions opts_;
    RiskSetIndex risk_;
    bool reduced_ = false;
    Eigen::MatrixXd z_;     // design used by Newton: X or U*D
    Eigen::MatrixXd basis_; // p x r; beta = basis * gamma when reduced
};

} // namespace coxpen
