#pragma once

#include "coxpen/penalized.hpp"

#include <cstdint>
#include <vector>

namespace coxpen {

// vvh:   CVE = -2 sum_k [ l(b_-k) - l_-k(b_-k) ]   (all data minus training part)
// basic: CVE = -2 sum_k l_k(b_-k)                  (held-out fold only)
enum class CvMode { vvh, basic };
std::string to_string(CvMode m);
CvMode cv_mode_from_string(const std::string& s);

struct CvOptions {
    int folds = 10;
    CvMode mode = CvMode::vvh;
    std::uint64_t seed = 0;
    bool stratify_events = false;
    unsigned threads = 1;
    L1Options solver;
};

struct CvResult {
    std::vector<double> lambdas;
    std::vector<double> cve;
    std::vector<double> se;        // standard error of the fold sum
    std::vector<bool> converged;   // every fold fit converged at this lambda
    double lambda_min = 0.0;
    Index index_min = 0;
    int folds = 0;
    CvMode mode = CvMode::vvh;
    std::vector<int> fold_of;      // fold label per subject
};

inline constexpr int kFoldRetries = 100;

// Random equal-size fold labels; every fold's complement holds an event.
std::vector<int> assign_folds(const SurvivalDataset& data, int folds, std::uint64_t seed, bool stratify = false);

// Contribution of one fold at coefficients beta, before the -2 factor.
double cv_fold_term(const SurvivalDataset& data, const std::vector<int>& fold_of, int fold,
                    const Eigen::VectorXd& beta, CvMode mode);

// Reduces per-fold contributions (folds x lambdas) into a CvResult.
void finalize_cv(CvResult& result, const std::vector<std::vector<double>>& fold_terms);

// Cross-validated weighted-L1 path; the lambda grid comes from the full data.
CvResult cv_path(const SurvivalDataset& data, const PenaltyConfig& config, const CvOptions& opts);
CvResult cv_path(const SurvivalDataset& data, const WeightVector& weights, const std::vector<double>& lambdas,
                 const CvOptions& opts);

// Cross-validated ridge Cox over a descending ridge-lambda grid (objective
// l - lambda ||b||^2), using the same CVE definitions.
CvResult cv_ridge(const SurvivalDataset& data, const std::vector<double>& lambdas, const CvOptions& opts);

} // namespace coxpen
