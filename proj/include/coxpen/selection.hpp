#pragma once

#include "coxpen/model.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace coxpen {

struct SelectionSpec {
    ModelSpec model;
    int partitions = 100;
    Index train_size = 0;        // 0: half of the subjects
    std::uint64_t seed = 0;
    unsigned threads = 1;
    // Sum the power index over {j : I_j <= I_(K)} as the formula is printed,
    // instead of the top-K set {j : I_j >= I_(K)}.
    bool literal_power_index = false;
};

struct SelectionIteration {
    std::uint64_t seed = 0;
    Eigen::VectorXd beta;        // original scale
    double k_index = 0.0;        // on the test part
    double power = 0.0;
    double lambda = 0.0;
    Index support_size = 0;
};

struct SelectionRun {
    std::vector<SelectionIteration> iterations;
    Eigen::VectorXd importance;
    Index k_top = 0;
    Index best = 0;              // 0-based iteration index
    std::vector<Index> final_support;
    CoxFit final_fit;            // all data, restricted to final_support
    std::string final_method;    // "unpenalized" or "ridge"
    std::vector<std::string> notes;
};

// ceil(sqrt(n / 2)), with integer arithmetic.
Index top_k_count(Index n);

// I_j = sum_k |b_jk| K_k / max_j sum_k |b_jk| K_k. Throws when every
// coefficient of every iteration is zero.
Eigen::VectorXd importance_index(const std::vector<Eigen::VectorXd>& betas, const std::vector<double>& k_index);

// p_k per iteration; 0 for an empty model.
std::vector<double> power_indexes(const std::vector<Eigen::VectorXd>& betas, const Eigen::VectorXd& importance,
                                  Index k_top, bool literal = false);

// argmax_k (K_k + p_k); ties go to the smallest k.
Index best_model(const std::vector<double>& k_index, const std::vector<double>& power);

// Variables by importance descending, ties by column ascending.
std::vector<Index> importance_ranking(const Eigen::VectorXd& importance);
std::vector<Index> importance_ranking(const SelectionRun& run);

struct FinalFit {
    CoxFit fit;
    std::string method;
};

// Unpenalized refit when |support| < events / 2, else ridge with its
// penalty chosen by cross-validation. Coefficients outside support are 0.
FinalFit refit_on_support(const SurvivalDataset& data, const std::vector<Index>& support, std::uint64_t seed,
                          unsigned threads = 1);

SelectionRun run_selection(const SurvivalDataset& data, const SelectionSpec& spec);

} // namespace coxpen
