#include "coxpen/errors.hpp"
#include "coxpen/metrics.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

using namespace coxpen;
using testing_support::random_data;
using testing_support::random_vector;

namespace {

Eigen::VectorXd vec(std::initializer_list<double> v) {
    Eigen::VectorXd out(static_cast<Index>(v.size()));
    std::copy(v.begin(), v.end(), out.data());
    return out;
}

Eigen::VectorXi ivec(std::initializer_list<int> v) {
    Eigen::VectorXi out(static_cast<Index>(v.size()));
    std::copy(v.begin(), v.end(), out.data());
    return out;
}

} // namespace

TEST(KaplanMeier, HandCase) {
    const auto km = kaplan_meier(vec({1, 2, 2, 3, 4}), ivec({1, 1, 0, 1, 0}));
    ASSERT_EQ(km.times, (std::vector<double>{1, 2, 3}));
    EXPECT_DOUBLE_EQ(km.at(0.5), 1.0);
    EXPECT_DOUBLE_EQ(km.at(1.0), 0.8);
    EXPECT_DOUBLE_EQ(km.left_limit(1.0), 1.0);
    EXPECT_DOUBLE_EQ(km.at(2.5), 0.6);
    EXPECT_DOUBLE_EQ(km.left_limit(3.0), 0.6);
    EXPECT_DOUBLE_EQ(km.at(3.0), 0.3);
    EXPECT_DOUBLE_EQ(km.at(100.0), 0.3);
}

TEST(KaplanMeier, CensoringDistribution) {
    // Censorings at 2 (4 at risk) and 4 (1 at risk).
    const auto g = km_censoring(vec({1, 2, 2, 3, 4}), ivec({1, 1, 0, 1, 0}));
    ASSERT_EQ(g.times, (std::vector<double>{2, 4}));
    EXPECT_DOUBLE_EQ(g.at(2.0), 0.75);
    EXPECT_DOUBLE_EQ(g.at(4.0), 0.0);
    EXPECT_DOUBLE_EQ(g.left_limit(4.0), 0.75);
}

TEST(KaplanMeier, NoEventsMeansNoDrop) {
    const auto km = kaplan_meier(vec({1, 2, 3}), ivec({0, 0, 0}));
    EXPECT_TRUE(km.times.empty());
    EXPECT_EQ(km.at(10.0), 1.0);
}

TEST(KaplanMeier, MatchesEnumeratedProductLimit) {
    const auto d = random_data(40, 1, 3, 0.4, 0.2);
    const auto g = km_censoring(d);
    for (Index i = 0; i < d.n(); ++i)
        EXPECT_NEAR(g.left_limit(d.time[i]),
                    static_cast<double>(testing_support::enum_censor_survival_before(d.time, d.status, d.time[i])), 1e-14);
}

TEST(HarrellC, HandCaseWithTies) {
    // Usable pairs: (0,1), (0,2), (0,3), (2,3); subject 1 is censored.
    const auto t = vec({1, 2, 3, 4});
    const auto d = ivec({1, 0, 1, 0});
    const auto s = vec({3, 3, 1, 2});
    EXPECT_DOUBLE_EQ(harrell_c(t, d, s), 2.0 / 4.0);
    EXPECT_DOUBLE_EQ(harrell_c(t, d, s, ScoreTies::half), 2.5 / 4.0);
}

TEST(HarrellC, MatchesEnumerationAndIsRankBased) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto d = random_data(50, 1, seed, 0.3, seed % 2 ? 0.3 : 0.0);
        const Eigen::VectorXd s = random_vector(50, seed + 100);
        const double c = harrell_c(d.time, d.status, s);
        EXPECT_NEAR(c, static_cast<double>(testing_support::enum_harrell(d.time, d.status, s)), 1e-14);
        const Eigen::VectorXd monotone = (s.array() * 3.0).exp().matrix();
        EXPECT_EQ(harrell_c(d.time, d.status, monotone), c);
        EXPECT_NEAR(harrell_c(d.time, d.status, (-s).eval()), 1.0 - c, 1e-14); // no score ties
    }
}

TEST(HarrellC, UndefinedWithoutPairs) {
    EXPECT_THROW(harrell_c(vec({1, 2}), ivec({0, 0}), vec({1, 2})), UndefinedError);
    EXPECT_THROW(harrell_c(vec({1, 1}), ivec({1, 1}), vec({1, 2})), UndefinedError);
}

TEST(UnoC, MatchesEnumerationWithLeftLimitWeights) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto d = random_data(60, 1, 20 + seed, 0.4, seed % 2 ? 0.25 : 0.0);
        const Eigen::VectorXd s = random_vector(60, seed + 200);
        std::vector<double> sorted(d.time.data(), d.time.data() + 60);
        std::sort(sorted.begin(), sorted.end());
        const double tau = sorted[45];
        const auto g = km_censoring(d);
        EXPECT_NEAR(uno_c(d.time, d.status, s, tau, g),
                    static_cast<double>(testing_support::enum_uno(d.time, d.status, s, tau)), 1e-13);
    }
}

TEST(UnoC, UnitWeightsReduceToTruncatedHarrell) {
    const auto d = random_data(50, 1, 7, 0.3);
    const Eigen::VectorXd s = random_vector(50, 8);
    const double inf = std::numeric_limits<double>::infinity();
    EXPECT_NEAR(truncated_c(d.time, d.status, s, inf), harrell_c(d.time, d.status, s), 1e-14);
    // Without censoring G = 1, so Uno equals the truncated estimator.
    auto full = d;
    full.status.setOnes();
    const double tau = full.time.maxCoeff();
    EXPECT_NEAR(uno_c(full.time, full.status, s, tau, km_censoring(full)), truncated_c(full.time, full.status, s, tau),
                1e-14);
}

TEST(UnoC, UndefinedCases) {
    const auto t = vec({1, 2, 3});
    const auto d = ivec({1, 0, 1});
    const auto s = vec({3, 2, 1});
    EXPECT_THROW(uno_c(t, d, s, 0.5, km_censoring(t, d)), UndefinedError);
    // Left-limit weights stay positive at every event time, even after the
    // censoring curve has dropped.
    const auto t2 = vec({1, 2, 3, 4});
    const auto d2 = ivec({1, 0, 1, 1});
    EXPECT_NO_THROW(uno_c(t2, d2, vec({4, 3, 2, 1}), 5.0, km_censoring(t2, d2)));
}

TEST(KIndex, MatchesEnumeration) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        Eigen::VectorXd s = random_vector(40, seed, 0.7);
        if (seed % 2) s = (s.array() * 4).round().matrix() / 4; // score ties
        EXPECT_NEAR(cpe_k_index(s), static_cast<double>(testing_support::enum_cpe(s)), 1e-14);
    }
}

TEST(KIndex, Invariances) {
    const Eigen::VectorXd s = random_vector(30, 4);
    const double k = cpe_k_index(s);
    EXPECT_NEAR(cpe_k_index((s.array() + 10.0).matrix()), k, 1e-13);
    EXPECT_NEAR(cpe_k_index((-s).eval()), k, 1e-14);
    Eigen::VectorXd rev = s.reverse();
    EXPECT_NEAR(cpe_k_index(rev), k, 1e-14);
    EXPECT_GT(k, 0.5);
    EXPECT_LT(k, 1.0);
    EXPECT_GT(cpe_k_index((3.0 * s).eval()), k);
    EXPECT_EQ(cpe_k_index(Eigen::VectorXd::Zero(5)), 0.0);
    EXPECT_THROW(cpe_k_index(Eigen::VectorXd::Zero(1)), ValidationError);
}

TEST(KIndex, TwoPointClosedForm) {
    EXPECT_NEAR(cpe_k_index(vec({0.0, 1.0})), 1.0 / (1.0 + std::exp(-1.0)), 1e-15);
}

TEST(SelectionMetrics, HandCase) {
    const auto truth = vec({1, 0, 2, 0, 0, 0.5});
    const auto hat = vec({0.8, 0.1, 0, 0, 0, 0.4});
    Eigen::MatrixXd x(4, 6);
    x.setZero();
    x(0, 0) = 1;   // log ratio -0.2
    x(1, 1) = 1;   // +0.1
    x(2, 2) = 1;   // -2
    x(3, 5) = 2;   // -0.2
    const auto m = selection_metrics(truth, hat, x);
    EXPECT_EQ(m.selected, 3);
    EXPECT_EQ(m.true_positives, 2);
    EXPECT_EQ(m.false_positives, 1);
    EXPECT_DOUBLE_EQ(m.tpr, 2.0 / 3.0);
    EXPECT_DOUBLE_EQ(m.fpr, 1.0 / 3.0);
    EXPECT_DOUBLE_EQ(m.fnr, 1.0 / 3.0);
    EXPECT_DOUBLE_EQ(m.f1, (2.0 / 3.0) / (2.0 / 3.0 + 1.0 / 3.0));
    EXPECT_NEAR(m.l2_error, std::sqrt(0.04 + 0.01 + 4 + 0.01), 1e-15);
    // Sorted log ratios -2, -0.2, -0.2, 0.1: median of the ratios is exp(-0.2).
    EXPECT_NEAR(m.median_risk_ratio, std::exp(-0.2), 1e-15);
}

TEST(SelectionMetrics, PerfectAndEmptyModels) {
    const auto truth = vec({1, 0, -1, 0});
    const auto perfect = selection_metrics(truth, truth, Eigen::MatrixXd::Ones(3, 4));
    EXPECT_EQ(perfect.f1, 1.0);
    EXPECT_EQ(perfect.median_risk_ratio, 1.0);
    const auto empty = selection_metrics(truth, Eigen::VectorXd::Zero(4), Eigen::MatrixXd(0, 4));
    EXPECT_EQ(empty.tpr, 0.0);
    EXPECT_EQ(empty.f1, 0.0);
    EXPECT_THROW(selection_metrics(Eigen::VectorXd::Zero(4), truth, Eigen::MatrixXd(0, 4)), UndefinedError);
}
