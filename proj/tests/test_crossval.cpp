#include "coxpen/crossval.hpp"
#include "coxpen/errors.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>

using namespace coxpen;
using testing_support::brute_loglik;
using testing_support::random_data;
using testing_support::random_vector;

namespace {

SurvivalDataset signal_data(Index n, Index p, std::uint64_t seed) {
    auto d = random_data(n, p, seed, 0.3);
    std::mt19937_64 rng(seed + 5);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (Index i = 0; i < n; ++i)
        d.time[i] = -std::log(unif(rng)) * std::exp(-(0.9 * d.x(i, 0) - 0.7 * d.x(i, 1)));
    return d;
}

std::vector<Index> rows_in(const std::vector<int>& fold_of, int fold, bool in) {
    std::vector<Index> rows;
    for (std::size_t i = 0; i < fold_of.size(); ++i)
        if ((fold_of[i] == fold) == in) rows.push_back(static_cast<Index>(i));
    return rows;
}

} // namespace

TEST(AssignFolds, BalancedAndDeterministic) {
    const auto d = random_data(53, 1, 1);
    const auto folds = assign_folds(d, 10, 7);
    std::map<int, int> size;
    for (int f : folds) ++size[f];
    ASSERT_EQ(size.size(), 10u);
    for (const auto& [f, c] : size) EXPECT_TRUE(c == 5 || c == 6) << f;
    EXPECT_EQ(folds, assign_folds(d, 10, 7));
    EXPECT_NE(folds, assign_folds(d, 10, 8));
}

TEST(AssignFolds, StratifiedSpreadsEvents) {
    const auto d = random_data(60, 1, 2, 0.5);
    const auto folds = assign_folds(d, 6, 3, true);
    std::vector<int> events(6, 0);
    for (Index i = 0; i < d.n(); ++i) events[static_cast<std::size_t>(folds[static_cast<std::size_t>(i)])] += d.status[i];
    EXPECT_LE(*std::max_element(events.begin(), events.end()) - *std::min_element(events.begin(), events.end()), 1);
}

TEST(AssignFolds, RejectsBadCounts) {
    const auto d = random_data(5, 1, 2);
    EXPECT_THROW(assign_folds(d, 1, 0), ValidationError);
    EXPECT_THROW(assign_folds(d, 6, 0), ValidationError);
}

TEST(FoldTerm, MatchesBruteForceLikelihoods) {
    const auto d = random_data(8, 2, 3, 0.3, 0.5);
    const std::vector<int> fold_of{0, 1, 0, 1, 1, 0, 0, 1};
    const Eigen::VectorXd beta = random_vector(2, 4);
    for (int k = 0; k < 2; ++k) {
        const auto train = d.subset(rows_in(fold_of, k, false));
        const auto held = d.subset(rows_in(fold_of, k, true));
        const double vvh = static_cast<double>(brute_loglik(d, beta) - brute_loglik(train, beta));
        EXPECT_NEAR(cv_fold_term(d, fold_of, k, beta, CvMode::vvh), vvh, 1e-10);
        EXPECT_NEAR(cv_fold_term(d, fold_of, k, beta, CvMode::basic), static_cast<double>(brute_loglik(held, beta)),
                    1e-10);
    }
}

TEST(FoldTerm, EmptyFoldContributesNothing) {
    const auto d = random_data(10, 2, 5);
    const std::vector<int> fold_of(10, 0);
    const Eigen::VectorXd beta = random_vector(2, 6);
    EXPECT_EQ(cv_fold_term(d, fold_of, 1, beta, CvMode::vvh), 0.0);
    EXPECT_EQ(cv_fold_term(d, fold_of, 1, beta, CvMode::basic), 0.0);
    // A single fold holding everything: l(all) - l(empty) = l(all).
    EXPECT_NEAR(cv_fold_term(d, fold_of, 0, beta, CvMode::vvh), static_cast<double>(brute_loglik(d, beta)), 1e-10);
}

TEST(FinalizeCv, HandComputedSumAndStandardError) {
    CvResult r;
    r.lambdas = {0.3, 0.2, 0.1};
    // Fold terms (before the -2 factor), 3 folds x 3 lambdas.
    const std::vector<std::vector<double>> terms{{-1.0, -0.5, -2.0}, {-2.0, -0.5, -1.0}, {-3.0, -0.5, -1.5}};
    finalize_cv(r, terms);
    EXPECT_DOUBLE_EQ(r.cve[0], 12.0);
    EXPECT_DOUBLE_EQ(r.cve[1], 3.0);
    EXPECT_DOUBLE_EQ(r.cve[2], 9.0);
    // Per-fold values 2, 4, 6: sample sd 2, se of the sum sqrt(3) * 2.
    EXPECT_NEAR(r.se[0], 2.0 * std::sqrt(3.0), 1e-12);
    EXPECT_EQ(r.se[1], 0.0);
    EXPECT_EQ(r.index_min, 1);
    EXPECT_EQ(r.lambda_min, 0.2);
}

TEST(FinalizeCv, FirstMinimumWinsAndFoldOrderIsIrrelevant) {
    CvResult a, b;
    a.lambdas = b.lambdas = {3, 2, 1};
    std::vector<std::vector<double>> terms{{-1, -0.5, -0.5}, {-1, -0.25, -0.25}};
    finalize_cv(a, terms);
    EXPECT_EQ(a.index_min, 1);
    std::reverse(terms.begin(), terms.end());
    finalize_cv(b, terms);
    EXPECT_EQ(a.cve, b.cve);
    EXPECT_EQ(a.se, b.se);
}

TEST(CvPath, AssemblesFoldTermsFromTrainingPaths) {
    const auto d = signal_data(40, 5, 7);
    const auto w = WeightVector::unit(5);
    const auto grid = lambda_path(lambda_max(d, w), d.n(), d.p(), {.count = 8, .min_ratio = {}});
    CvOptions opts;
    opts.folds = 2;
    opts.seed = 11;
    const auto cv = cv_path(d, w, grid, opts);
    ASSERT_EQ(cv.cve.size(), grid.size());
    for (std::size_t l = 0; l < grid.size(); ++l) {
        double manual = 0.0;
        for (int k = 0; k < 2; ++k) {
            const auto train = d.subset(rows_in(cv.fold_of, k, false));
            const auto beta = fit_path(train, w, grid).fits[l].beta;
            manual += -2.0 * static_cast<double>(brute_loglik(d, beta) - brute_loglik(train, beta));
        }
        EXPECT_NEAR(cv.cve[l], manual, 1e-10) << l;
    }
    // Far above every fold's lambda_max each fold fit is zero, so
    // CVE = -2 sum (l(0) - l_-k(0)).
    const auto null_cv = cv_path(d, w, {1e3 * grid[0]}, opts);
    double null_cve = 0.0;
    const Eigen::VectorXd zero = Eigen::VectorXd::Zero(5);
    for (int k = 0; k < 2; ++k)
        null_cve += -2.0 * static_cast<double>(brute_loglik(d, zero) - brute_loglik(d.subset(rows_in(cv.fold_of, k, false)), zero));
    EXPECT_NEAR(null_cv.cve[0], null_cve, 1e-10);
}

TEST(CvPath, DeterministicAndFoldLabelInvariant) {
    const auto d = signal_data(80, 10, 8);
    PenaltyConfig cfg;
    cfg.weights = WeightVector::unit(10);
    cfg.path.count = 20;
    CvOptions opts;
    opts.folds = 5;
    opts.seed = 3;
    const auto a = cv_path(d, cfg, opts);
    const auto b = cv_path(d, cfg, opts);
    EXPECT_EQ(a.cve, b.cve);
    EXPECT_EQ(a.index_min, b.index_min);

    // Relabel folds k -> 4 - k: same partition, same CVE up to summation order.
    std::vector<int> relabeled = a.fold_of;
    for (int& f : relabeled) f = 4 - f;
    for (std::size_t l = 0; l < a.lambdas.size(); l += 5) {
        double total = 0.0;
        for (int k = 0; k < 5; ++k) {
            const auto train = d.subset(rows_in(relabeled, k, false));
            const auto beta = fit_path(train, cfg.weights, a.lambdas).fits[l].beta;
            total += -2.0 * cv_fold_term(d, relabeled, k, beta, CvMode::vvh);
        }
        EXPECT_NEAR(total, a.cve[l], 1e-9 * std::abs(a.cve[l]));
    }
}

TEST(CvPath, VvhAndBasicAgreeOnTheMinimum) {
    const auto d = signal_data(200, 20, 9);
    PenaltyConfig cfg;
    cfg.weights = WeightVector::unit(20);
    cfg.path.count = 30;
    CvOptions opts;
    opts.folds = 5;
    opts.seed = 4;
    const auto vvh = cv_path(d, cfg, opts);
    opts.mode = CvMode::basic;
    const auto basic = cv_path(d, cfg, opts);
    EXPECT_EQ(vvh.fold_of, basic.fold_of);
    EXPECT_LE(std::abs(vvh.index_min - basic.index_min), 3);
    EXPECT_GT(vvh.index_min, 0);
}

TEST(CvRidge, PicksInteriorPenalty) {
    const auto d = signal_data(100, 8, 10);
    std::vector<double> grid;
    for (int k = 0; k < 13; ++k) grid.push_back(1e3 * std::pow(10.0, -0.5 * k));
    CvOptions opts;
    opts.folds = 5;
    opts.seed = 2;
    const auto cv = cv_ridge(d, grid, opts);
    ASSERT_EQ(cv.cve.size(), grid.size());
    for (double v : cv.cve) EXPECT_TRUE(std::isfinite(v));
    // Signal is present, so the heaviest penalty is not the best.
    EXPECT_GT(cv.index_min, 0);
    EXPECT_LT(cv.cve[static_cast<std::size_t>(cv.index_min)], cv.cve[0]);
}
