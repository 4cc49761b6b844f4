#pragma once

#include "coxpen/crossval.hpp"
#include "coxpen/rsf.hpp"
#include "coxpen/weight_vector.hpp"

#include <vector>

namespace coxpen {

// Univariate estimates beyond this magnitude are treated as diverging.
inline constexpr double kUniCap = 15.0;
inline constexpr double kPcaVariance = 0.95;
// Ridge penalty used for the score-matrix fit when it is not identifiable.
inline constexpr double kPcaFallbackRidge = 1e-2;

struct RidgeWeightSpec {
    std::vector<double> lambdas;  // descending; empty -> default grid
    CvOptions cv;
};

// Default ridge grid: 13 values events * 10^k, k = 3, 2.5, ..., -3.
std::vector<double> default_ridge_grid(const SurvivalDataset& data);

struct BaseEstimate {
    Eigen::VectorXd values;
    std::vector<std::string> notes;
    double ridge_lambda = 0.0; // ridge only
    Index components = 0;      // PCA only
};

BaseEstimate ridge_base(const SurvivalDataset& data, const RidgeWeightSpec& spec);
BaseEstimate pca_base(const SurvivalDataset& data, double variance = kPcaVariance);
BaseEstimate uni_base(const SurvivalDataset& data, unsigned threads = 1);
BaseEstimate rsf_base(const SurvivalDataset& data, const ForestConfig& forest);

WeightVector ridge_weights(const SurvivalDataset& data, double gamma, const RidgeWeightSpec& spec);
WeightVector pca_weights(const SurvivalDataset& data, double gamma);
WeightVector uni_weights(const SurvivalDataset& data, double gamma, unsigned threads = 1);
WeightVector rsf_weights(const SurvivalDataset& data, double gamma, const ForestConfig& forest);

WeightVector weights_from(const BaseEstimate& base, double gamma, WeightSource source);

// {0.2, 0.4, ..., 2.0}
std::vector<double> gamma_grid();

struct GammaChoice {
    double gamma = 1.0;
    std::vector<double> grid;
    std::vector<double> min_cve; // best CVE over the lambda path, per gamma
};

// Picks gamma by the minimum cross-validated error of the adaptive-lasso path.
GammaChoice select_gamma(const SurvivalDataset& data, const BaseEstimate& base, WeightSource source,
                         const std::vector<double>& grid, const CvOptions& cv, const PathSpec& path = {});

} // namespace coxpen
