#pragma once

#include "coxpen/data.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <optional>
#include <vector>

namespace coxpen {

struct ForestConfig {
    int n_trees = 500;
    std::optional<int> mtry;   // defaults to ceil(sqrt(p))
    int min_node_events = 3;   // per child of every split
    std::uint64_t seed = 0;
    unsigned threads = 1;
    // Concordance used for the OOB error counts tied mortality as 1/2.
    bool half_credit_ties = true;

    int resolved_mtry(Index p) const;
};

/**
 * One survival tree. Internal nodes send x[variable] <= threshold left.
 * Leaves carry a Nelson-Aalen cumulative hazard over the forest's event-time
 * grid, stored as (grid index, value) steps.
 */
struct SurvivalTree {
    struct Node {
        int variable = -1; // -1 for leaves
        double threshold = 0.0;
        int left = -1;
        int right = -1;
        int leaf = -1;     // index into leaves when terminal
    };
    struct Leaf {
        std::vector<int> step_at;     // grid positions where the CHF jumps
        std::vector<double> value;    // CHF value from that position on
        double mortality = 0.0;       // sum of the CHF over the grid
    };

    std::vector<Node> nodes;
    std::vector<Leaf> leaves;
    std::vector<char> in_bag;         // per subject of the training data
    std::vector<char> uses_variable;  // per covariate

    int leaf_of(const Eigen::MatrixXd& x, Index i) const;
};

class SurvivalForest {
public:
    SurvivalForest() = default;

    const std::vector<SurvivalTree>& trees() const { return trees_; }
    const std::vector<double>& event_grid() const { return grid_; }
    Index n_train() const { return n_train_; }
    Index p() const { return p_; }
    const ForestConfig& config() const { return config_; }

    // CHF of one leaf on the full grid.
    Eigen::VectorXd leaf_chf(const SurvivalTree::Leaf& leaf) const;
    // Ensemble CHF (grid length) for a covariate row.
    Eigen::VectorXd ensemble_chf(const Eigen::MatrixXd& x, Index row) const;
    // Ensemble mortality (sum of CHF over the grid) for every row of x.
    Eigen::VectorXd mortality(const Eigen::MatrixXd& x) const;
    // Out-of-bag ensemble mortality on the training data; NaN when a subject
    // was in bag for every tree.
    Eigen::VectorXd oob_mortality(const Eigen::MatrixXd& x) const;

private:
    friend SurvivalForest grow_forest(const SurvivalDataset&, const ForestConfig&);
    std::vector<SurvivalTree> trees_;
    std::vector<double> grid_;
    Index n_train_ = 0;
    Index p_ = 0;
    ForestConfig config_;
};

SurvivalForest grow_forest(const SurvivalDataset& data, const ForestConfig& config);

struct VimpResult {
    Eigen::VectorXd importance; // permuted OOB error minus baseline
    double oob_error = 0.0;     // 1 - C on OOB ensemble mortality
};

// `data` must be the training data the forest was grown on.
VimpResult vimp(const SurvivalForest& forest, const SurvivalDataset& data);

// Log-rank chi-square statistic (score^2 / variance) for a two-group split
// (left = true); 0 when the variance vanishes.
double logrank_statistic(const Eigen::VectorXd& time, const Eigen::VectorXi& status, const std::vector<char>& left);

struct SplitChoice {
    bool found = false;
    double threshold = 0.0; // x <= threshold goes left
    double statistic = 0.0;
};

// Best log-rank split of one covariate over all observed thresholds, each
// side keeping at least `min_events` events. Incremental O(n log n) search.
SplitChoice best_logrank_split(const Eigen::VectorXd& time, const Eigen::VectorXi& status, const Eigen::VectorXd& x,
                               int min_events);

} // namespace coxpen
