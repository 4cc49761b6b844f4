#pragma once

#include "coxpen/crossval.hpp"
#include "coxpen/penalized.hpp"
#include "coxpen/rsf.hpp"
#include "coxpen/weights.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace coxpen {

/// Everything needed to go from raw data to a cross-validated penalized fit.
struct ModelSpec {
    PenaltyKind penalty = PenaltyKind::lasso;
    WeightSource weights = WeightSource::unit; // ridge | pca | uni | rsf for alasso
    std::optional<double> gamma;               // empty: chosen on gamma_grid() by CVE
    int folds = 10;
    CvMode cv_mode = CvMode::vvh;
    bool stratify_folds = false;
    PathSpec path;
    L1Options solver;
    ForestConfig forest;
    std::vector<double> ridge_lambdas;         // empty: default_ridge_grid
    unsigned threads = 1;

    void validate() const;
    // Short display label: Lasso, Ridge, PCA, Uni, RSF.
    std::string label() const;
};

ModelSpec model_spec_from_label(const std::string& label); // "lasso", "ridge", ...

struct FittedModel {
    CoxFit fit;                    // beta on the original covariate scale
    Eigen::VectorXd beta_standardized;
    Standardization transform;
    WeightVector weights;
    CvResult cv;
    double lambda = 0.0;           // for the -(1/n) l + penalty objective
    double lambda_unscaled = 0.0;  // n * lambda, for the -l + penalty objective
    std::optional<GammaChoice> gamma_search;
    std::uint64_t seed = 0;
    Index nonzero = 0;
};

// standardize -> weights (adaptive lasso) -> CV over the lambda path ->
// refit on all of `data` at lambda_min -> map back to the original scale.
FittedModel fit_model(const SurvivalDataset& data, const ModelSpec& spec, std::uint64_t seed);

} // namespace coxpen
