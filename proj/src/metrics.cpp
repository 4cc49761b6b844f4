#include "coxpen/metrics.hpp"

#include "coxpen/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace coxpen {

double KaplanMeier::at(double t) const {
    const auto it = std::upper_bound(times.begin(), times.end(), t);
    if (it == times.begin()) return 1.0;
    return survival[static_cast<std::size_t>(it - times.begin() - 1)];
}

double KaplanMeier::left_limit(double t) const {
    const auto it = std::lower_bound(times.begin(), times.end(), t);
    if (it == times.begin()) return 1.0;
    return survival[static_cast<std::size_t>(it - times.begin() - 1)];
}

KaplanMeier kaplan_meier(const Eigen::VectorXd& time, const Eigen::VectorXi& event) {
    if (time.size() != event.size()) throw ValidationError("time and indicator lengths differ");
    const auto n = static_cast<std::size_t>(time.size());
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return time[static_cast<Index>(a)] < time[static_cast<Index>(b)]; });

    KaplanMeier km;
    double s = 1.0;
    std::size_t pos = 0;
    while (pos < n) {
        const double t = time[static_cast<Index>(order[pos])];
        const auto at_risk = static_cast<double>(n - pos);
        int d = 0;
        std::size_t end = pos;
        while (end < n && time[static_cast<Index>(order[end])] == t) {
            d += event[static_cast<Index>(order[end])] != 0 ? 1 : 0;
            ++end;
        }
        if (d > 0) {
            s *= 1.0 - d / at_risk;
            km.times.push_back(t);
            km.survival.push_back(s);
        }
        pos = end;
    }
    return km;
}

KaplanMeier km_censoring(const Eigen::VectorXd& time, const Eigen::VectorXi& status) {
    const Eigen::VectorXi censored = (status.array() == 0).cast<int>();
    return kaplan_meier(time, censored);
}

KaplanMeier km_censoring(const SurvivalDataset& data) { return km_censoring(data.time, data.status); }

namespace {

void check_lengths(const Eigen::VectorXd& time, const Eigen::VectorXi& status, const Eigen::VectorXd& scores) {
    if (time.size() != status.size() || time.size() != scores.size())
        throw ValidationError("time, status and scores must have equal length");
}

double pair_credit(double si, double sj, ScoreTies ties) {
    if (si > sj) return 1.0;
    if (si == sj && ties == ScoreTies::half) return 0.5;
    return 0.0;
}

} // namespace

double harrell_c(const Eigen::VectorXd& time, const Eigen::VectorXi& status, const Eigen::VectorXd& scores,
                 ScoreTies ties) {
    check_lengths(time, status, scores);
    const Index n = time.size();
    double num = 0.0;
    double den = 0.0;
    for (Index i = 0; i < n; ++i) {
        if (status[i] != 1) continue;
        for (Index j = 0; j < n; ++j) {
            if (!(time[i] < time[j])) continue;
            den += 1.0;
            num += pair_credit(scores[i], scores[j], ties);
        }
    }
    if (den == 0.0) throw UndefinedError("Harrell C has no usable pairs");
    return num / den;
}

double uno_c(const Eigen::VectorXd& time, const Eigen::VectorXi& status, const Eigen::VectorXd& scores, double tau,
             const KaplanMeier& censoring, const UnoOptions& opts) {
    check_lengths(time, status, scores);
    const Index n = time.size();
    double num = 0.0;
    double den = 0.0;
    for (Index i = 0; i < n; ++i) {
        if (status[i] != 1 || !(time[i] < tau)) continue;
        double weight = 1.0;
        bool weight_ready = opts.unit_weights;
        for (Index j = 0; j < n; ++j) {
            if (!(time[i] < time[j])) continue;
            if (!weight_ready) {
                const double g = opts.left_limit ? censoring.left_limit(time[i]) : censoring.at(time[i]);
                if (!(g > 0.0))
                    throw UndefinedError("censoring survival is zero at a contributing time; tau is too large");
                weight = 1.0 / (g * g);
                weight_ready = true;
            }
            den += weight;
            num += weight * pair_credit(scores[i], scores[j], opts.ties);
        }
    }
    if (den == 0.0) throw UndefinedError("truncated C has no usable pairs below tau");
    return num / den;
}

double truncated_c(const Eigen::VectorXd& time, const Eigen::VectorXi& status, const Eigen::VectorXd& scores,
                   double tau) {
    UnoOptions opts;
    opts.unit_weights = true;
    return uno_c(time, status, scores, tau, KaplanMeier{}, opts);
}

double cpe_k_index(const Eigen::VectorXd& scores) {
    const Index n = scores.size();
    if (n < 2) throw ValidationError("K-index needs at least two scores");
    double total = 0.0;
    for (Index i = 0; i < n; ++i) {
        double row = 0.0;
        for (Index j = i + 1; j < n; ++j) {
            const double diff = scores[i] - scores[j];
            if (diff == 0.0) continue;
            row += 1.0 / (1.0 + std::exp(-std::abs(diff)));
        }
        total += row;
    }
    return 2.0 * total / (static_cast<double>(n) * static_cast<double>(n - 1));
}

SelectionMetrics selection_metrics(const Eigen::VectorXd& beta_true, const Eigen::VectorXd& beta_hat,
                                   const Eigen::MatrixXd& test_x) {
    if (beta_true.size() != beta_hat.size()) throw ValidationError("coefficient vectors differ in length");
    if (test_x.rows() > 0 && test_x.cols() != beta_true.size())
        throw ValidationError("test covariates do not match coefficient length");
    SelectionMetrics m;
    Index positives = 0;
    Index negatives = 0;
    for (Index j = 0; j < beta_true.size(); ++j) {
        const bool truth = beta_true[j] != 0.0;
        const bool chosen = beta_hat[j] != 0.0;
        positives += truth;
        negatives += !truth;
        m.selected += chosen;
        m.true_positives += truth && chosen;
        m.false_positives += !truth && chosen;
    }
    if (positives == 0) throw UndefinedError("true coefficient vector has no nonzero entry; TPR is undefined");
    m.tpr = static_cast<double>(m.true_positives) / static_cast<double>(positives);
    m.fpr = negatives > 0 ? static_cast<double>(m.false_positives) / static_cast<double>(negatives) : 0.0;
    m.fnr = 1.0 - m.tpr;
    m.f1 = m.tpr / (m.tpr + 0.5 * (m.fpr + m.fnr));
    m.l2_error = (beta_hat - beta_true).norm();
    if (test_x.rows() > 0) {
        Eigen::VectorXd log_ratio = test_x * (beta_hat - beta_true);
        std::vector<double> v(log_ratio.data(), log_ratio.data() + log_ratio.size());
        const std::size_t mid = v.size() / 2;
        std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
        m.median_risk_ratio = std::exp(v[mid]);
        if (v.size() % 2 == 0) {
            const double lower = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
            m.median_risk_ratio = 0.5 * (std::exp(lower) + m.median_risk_ratio);
        }
    }
    return m;
}

} // namespace coxpen
