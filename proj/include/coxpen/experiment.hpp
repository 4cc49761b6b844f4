#pragma once

#include "coxpen/model.hpp"
#include "coxpen/simulate.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace coxpen {

struct DesignCase {
    std::string name;
    CovarianceKind covariance = CovarianceKind::independent;
    Index p = 600;
    Index phi = 30;
    CoefScheme coef = CoefScheme::constant_half;
};

struct ExperimentPreset {
    std::string name;
    std::vector<DesignCase> cases;
    std::vector<double> thetas;
    std::vector<std::string> models;  // Lasso, Ridge, PCA, Uni, RSF
    // RSF weights are fitted only for the first case at the first theta; the
    // other design points drop them.
    bool rsf_first_point_only = true;
    int replicates = 20;
    Index n = 400;
    Index train_size = 200;
    std::optional<double> gamma = 1.0; // empty: chosen per fit on gamma_grid()
    int folds = 10;
    ForestConfig forest;
    std::uint64_t seed = 0;

    void validate() const;
    std::vector<std::string> models_at(std::size_t case_index, std::size_t theta_index) const;
};

// "desk", "desk_block", "full". `scale` in (0, 1] multiplies p and the
// replicate count (p never drops below 10 * phi; at least 2 replicates).
ExperimentPreset experiment_preset(const std::string& name, double scale = 1.0);
std::vector<std::string> preset_names();

struct ReplicateRecord {
    int replicate = 0;
    std::uint64_t seed = 0;
    double censoring = 0.0;
    double tpr = 0.0, fpr = 0.0, f1 = 0.0, median_risk = 0.0, l2 = 0.0;
    Index selected = 0;
    double gamma = 1.0;
    double lambda = 0.0;
    std::vector<Index> block_selected;  // per block b = j mod 10
    std::vector<Index> block_correct;   // true nonzeros selected, per block
    std::vector<Index> block_truth;     // true nonzeros, per block
};

struct DesignPointResult {
    std::string case_name;
    double theta = 0.0;
    double nu = 0.0;
    std::vector<std::string> models;
    std::vector<std::vector<ReplicateRecord>> records; // [model][replicate]
};

struct ExperimentResult {
    ExperimentPreset preset;
    std::vector<DesignPointResult> points;
};

struct ExperimentRunOptions {
    unsigned threads = 1;
    std::string checkpoint_dir;   // empty: no checkpoints
    bool verbose = false;
};

ExperimentResult run_experiment(const ExperimentPreset& preset, const ExperimentRunOptions& opts = {});

// One replicate of one design point: all models share the dataset and split.
std::vector<ReplicateRecord> run_replicate(const ExperimentPreset& preset, const DesignCase& design, double theta,
                                           double nu, int replicate, const std::vector<std::string>& models);

struct Summary {
    double mean = 0.0;
    double sd = 0.0; // sample sd; 0 with fewer than two values
};
Summary summarize(const std::vector<double>& values);
double median_of(std::vector<double> values);

// Writes table_<case>.csv/.md and, for block covariance, the per-block
// selected/correct tables. Returns the written paths.
std::vector<std::string> write_tables(const ExperimentResult& result, const std::string& out_dir);

// Censoring calibration check: for each theta, nu is calibrated once, then
// `datasets` samples of size n are drawn and their censoring proportions
// summarized.
struct CensoringRow {
    std::string label;
    double theta = 0.0;
    double nu = 0.0;
    double mean = 0.0;
    double sd = 0.0;
    std::vector<double> proportions;
};

struct CensoringStudy {
    Index p = 4000;
    Index phi = 10;
    Index n = 400;
    int datasets = 100;
    std::vector<double> thetas{0.2, 0.4, 0.6, 0.8};
    std::vector<CovarianceKind> covariances{CovarianceKind::independent, CovarianceKind::ar_half};
    std::uint64_t seed = 0;
    unsigned threads = 1;
};

std::vector<CensoringRow> censoring_table(const CensoringStudy& study);
void write_censoring_table(const std::vector<CensoringRow>& rows, const std::string& out_dir);

} // namespace coxpen
