#pragma once

#include "coxpen/data.hpp"

#include <Eigen/Core>

#include <vector>

namespace coxpen {

/**
 * Product-limit survival curve. `survival[k]` holds S(t) for
 * times[k] <= t < times[k+1] (right-continuous); S(t) = 1 before times[0].
 * The risk set at t is {T >= t}.
 */
struct KaplanMeier {
    std::vector<double> times;    // distinct times with at least one "event"
    std::vector<double> survival;

    double at(double t) const;          // S(t)
    double left_limit(double t) const;  // S(t-)
};

// Kaplan-Meier for the indicator `event`.
KaplanMeier kaplan_meier(const Eigen::VectorXd& time, const Eigen::VectorXi& event);
// Censoring distribution G(t) = P(C > t): censorings (status 0) are the events.
KaplanMeier km_censoring(const Eigen::VectorXd& time, const Eigen::VectorXi& status);
KaplanMeier km_censoring(const SurvivalDataset& data);

// How a pair with equal scores is scored.
enum class ScoreTies { zero, half };

// Harrell's C: usable pairs are (i, j) with delta_i = 1 and T_i < T_j;
// concordant when score_i > score_j. Throws UndefinedError without usable pairs.
double harrell_c(const Eigen::VectorXd& time, const Eigen::VectorXi& status, const Eigen::VectorXd& scores,
                 ScoreTies ties = ScoreTies::zero);

struct UnoOptions {
    bool left_limit = true;     // weight by G(T_i-) rather than G(T_i)
    bool unit_weights = false;  // G = 1: truncated (Pencina) estimator
    ScoreTies ties = ScoreTies::zero;
};

// IPCW truncated C with weights G(T_i)^-2 over pairs T_i < T_j, T_i < tau.
double uno_c(const Eigen::VectorXd& time, const Eigen::VectorXi& status, const Eigen::VectorXd& scores, double tau,
             const KaplanMeier& censoring, const UnoOptions& opts = {});

// Truncated C without censoring weights.
double truncated_c(const Eigen::VectorXd& time, const Eigen::VectorXi& status, const Eigen::VectorXd& scores,
                   double tau);

// Gonen-Heller concordance probability estimate; uses the scores only.
double cpe_k_index(const Eigen::VectorXd& scores);

struct SelectionMetrics {
    double tpr = 0.0;
    double fpr = 0.0;
    double fnr = 0.0;
    double f1 = 0.0;
    double l2_error = 0.0;
    double median_risk_ratio = 1.0; // median of exp(b_hat'x) / exp(b'x) over test rows
    Index selected = 0;
    Index true_positives = 0;
    Index false_positives = 0;
};

// F1 = TPR / (TPR + (FPR + FNR) / 2), FNR = 1 - TPR. Throws UndefinedError
// when beta_true has no nonzero entry.
SelectionMetrics selection_metrics(const Eigen::VectorXd& beta_true, const Eigen::VectorXd& beta_hat,
                                   const Eigen::MatrixXd& test_x);

} // namespace coxpen
