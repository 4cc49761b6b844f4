#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace coxpen {

using Index = Eigen::Index;

/**
 * Right-censored survival data: an n x p covariate matrix, observed times
 * and event indicators (1 = event, 0 = censored).
 *
 * Instances are validated on construction through `make()` / `load_csv()`
 * and are treated as immutable afterwards.
 */
struct SurvivalDataset {
    Eigen::MatrixXd x;              // n x p, column-major
    Eigen::VectorXd time;           // n, observed time T* = min(T, C)
    Eigen::VectorXi status;         // n, 1 = event observed
    std::vector<std::string> names; // p column labels

    Index n() const { return x.rows(); }
    Index p() const { return x.cols(); }
    Index events() const { return status.sum(); }

    // Throws ValidationError when an invariant does not hold. The event
    // requirement can be waived for subsets evaluated only for likelihoods.
    void validate(bool require_event = true) const;

    // Rows `rows` (in the given order) as a new dataset; no validation.
    SurvivalDataset subset(std::span<const Index> rows) const;

    // Column subset, keeping names.
    SurvivalDataset columns(std::span<const Index> cols) const;

    static SurvivalDataset make(Eigen::MatrixXd x, Eigen::VectorXd time, Eigen::VectorXi status,
                                std::vector<std::string> names = {});
};

// CSV layout: header row, then `time,status,<covariates...>`.
SurvivalDataset load_csv(const std::string& path);
void save_csv(const SurvivalDataset& data, const std::string& path);

// Shortest decimal representation that parses back to the same double.
std::string format_double(double value);

/// Column centring/scaling used before penalized fits.
struct Standardization {
    Eigen::VectorXd means;
    Eigen::VectorXd scales;    // population sd; 1 for constant columns
    std::vector<bool> constant;

    // beta on the standardized scale -> beta on the original scale.
    Eigen::VectorXd to_original(const Eigen::VectorXd& beta_std) const;
    Eigen::VectorXd to_standardized(const Eigen::VectorXd& beta_orig) const;
    // Applies the stored transform to new data (e.g. a test set).
    Eigen::MatrixXd apply(const Eigen::MatrixXd& x) const;
};

struct StandardizedData {
    SurvivalDataset data;
    Standardization transform;
};

StandardizedData standardize(const SurvivalDataset& data);

/// Train/test split of row indices.
struct Partition {
    std::vector<Index> train;
    std::vector<Index> test;
    std::uint64_t seed = 0;
};

inline constexpr int kSplitRetries = 100;

// Uniform random split without replacement; redraws (bounded) until the
// train side carries at least one event.
Partition split(const SurvivalDataset& data, Index train_size, std::uint64_t seed);

} // namespace coxpen
