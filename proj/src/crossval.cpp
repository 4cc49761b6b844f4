#include "coxpen/crossval.hpp"

#include "coxpen/errors.hpp"
#include "coxpen/parallel.hpp"
#include "coxpen/random.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace coxpen {

std::string to_string(CvMode m) { return m == CvMode::vvh ? "vvh" : "basic"; }

CvMode cv_mode_from_string(const std::string& s) {
    if (s == "vvh") return CvMode::vvh;
    if (s == "basic") return CvMode::basic;
    throw ConfigError("unknown cv mode '" + s + "'");
}

std::vector<int> assign_folds(const SurvivalDataset& data, int folds, std::uint64_t seed, bool stratify) {
    const Index n = data.n();
    if (folds < 2) throw ValidationError("cross-validation needs at least 2 folds");
    if (folds > n) throw ValidationError("more folds than subjects");
    const Index total_events = data.events();
    std::vector<int> fold_of(static_cast<std::size_t>(n));
    for (int attempt = 0; attempt < kFoldRetries; ++attempt) {
        Rng rng = make_rng(seed, 0x5eedf01dULL + static_cast<std::uint64_t>(attempt));
        std::vector<Index> order(static_cast<std::size_t>(n));
        std::iota(order.begin(), order.end(), Index{0});
        if (stratify) {
            std::stable_partition(order.begin(), order.end(), [&](Index i) { return data.status[i] == 1; });
            auto mid = order.begin() + total_events;
            std::shuffle(order.begin(), mid, rng);
            std::shuffle(mid, order.end(), rng);
        } else {
            std::shuffle(order.begin(), order.end(), rng);
        }
        for (Index pos = 0; pos < n; ++pos)
            fold_of[static_cast<std::size_t>(order[static_cast<std::size_t>(pos)])] = static_cast<int>(pos % folds);

        std::vector<Index> fold_events(static_cast<std::size_t>(folds), 0);
        for (Index i = 0; i < n; ++i) fold_events[static_cast<std::size_t>(fold_of[static_cast<std::size_t>(i)])] += data.status[i];
        const bool ok = std::all_of(fold_events.begin(), fold_events.end(),
                                    [&](Index e) { return total_events - e >= 1; });
        if (ok) return fold_of;
    }
    throw ValidationError("could not assign folds with an event in every training complement");
}

namespace {

std::vector<Index> rows_where(const std::vector<int>& fold_of, int fold, bool in_fold) {
    std::vector<Index> rows;
    for (std::size_t i = 0; i < fold_of.size(); ++i)
        if ((fold_of[i] == fold) == in_fold) rows.push_back(static_cast<Index>(i));
    return rows;
}

} // namespace

double cv_fold_term(const SurvivalDataset& data, const std::vector<int>& fold_of, int fold,
                    const Eigen::VectorXd& beta, CvMode mode) {
    if (mode == CvMode::basic) {
        const auto held = rows_where(fold_of, fold, true);
        if (held.empty()) return 0.0;
        return log_partial_likelihood(data.subset(held), beta);
    }
    const auto train = rows_where(fold_of, fold, false);
    if (static_cast<Index>(train.size()) == data.n()) return 0.0;
    return log_partial_likelihood(data, beta) - log_partial_likelihood(data.subset(train), beta);
}

void finalize_cv(CvResult& result, const std::vector<std::vector<double>>& fold_terms) {
    const std::size_t m = result.lambdas.size();
    const auto k = static_cast<double>(fold_terms.size());
    result.cve.assign(m, 0.0);
    result.se.assign(m, 0.0);
    for (std::size_t l = 0; l < m; ++l) {
        double sum = 0.0;
        for (const auto& fold : fold_terms) sum += -2.0 * fold[l];
        const double mean = sum / k;
        double ss = 0.0;
        for (const auto& fold : fold_terms) ss += (-2.0 * fold[l] - mean) * (-2.0 * fold[l] - mean);
        result.cve[l] = sum;
        result.se[l] = k > 1 ? std::sqrt(k * ss / (k - 1.0)) : 0.0;
    }
    Index best = 0;
    for (std::size_t l = 1; l < m; ++l) {
        if (std::isfinite(result.cve[l]) &&
            (!std::isfinite(result.cve[static_cast<std::size_t>(best)]) || result.cve[l] < result.cve[static_cast<std::size_t>(best)])) {
            best = static_cast<Index>(l);
        }
    }
    result.index_min = best;
    result.lambda_min = result.lambdas[static_cast<std::size_t>(best)];
}

CvResult cv_path(const SurvivalDataset& data, const WeightVector& weights, const std::vector<double>& lambdas,
                 const CvOptions& opts) {
    CvResult result;
    result.lambdas = lambdas;
    result.folds = opts.folds;
    result.mode = opts.mode;
    result.fold_of = assign_folds(data, opts.folds, opts.seed, opts.stratify_events);

    const auto m = lambdas.size();
    std::vector<std::vector<double>> terms(static_cast<std::size_t>(opts.folds), std::vector<double>(m));
    std::vector<std::vector<char>> ok(static_cast<std::size_t>(opts.folds), std::vector<char>(m));
    parallel_for(static_cast<std::size_t>(opts.folds), opts.threads, [&](std::size_t k) {
        const int fold = static_cast<int>(k);
        const auto train_rows = rows_where(result.fold_of, fold, false);
        const auto held_rows = rows_where(result.fold_of, fold, true);
        const SurvivalDataset train = data.subset(train_rows);
        const SurvivalDataset held = data.subset(held_rows);
        const RiskSetIndex all_risk(data.time, data.status);
        const RiskSetIndex train_risk(train.time, train.status);
        const RiskSetIndex held_risk(held.time, held.status);
        const auto path = fit_path(train, weights, lambdas, opts.solver);
        for (std::size_t l = 0; l < m; ++l) {
            const auto& beta = path.fits[l].beta;
            double term = 0.0;
            if (opts.mode == CvMode::vvh) {
                term = eta_derivatives(all_risk, data.status, data.x * beta, false).loglik -
                       eta_derivatives(train_risk, train.status, train.x * beta, false).loglik;
            } else {
                term = eta_derivatives(held_risk, held.status, held.x * beta, false).loglik;
            }
            terms[k][l] = term;
            ok[k][l] = path.fits[l].converged;
        }
    });
    result.converged.assign(m, true);
    for (std::size_t l = 0; l < m; ++l)
        for (const auto& f : ok) result.converged[l] = result.converged[l] && f[l];
    finalize_cv(result, terms);
    return result;
}

CvResult cv_path(const SurvivalDataset& data, const PenaltyConfig& config, const CvOptions& opts) {
    const WeightVector weights =
        config.kind == PenaltyKind::lasso ? WeightVector::unit(data.p()) : config.weights;
    const double lmax = lambda_max(data, weights);
    return cv_path(data, weights, lambda_path(lmax, data.n(), data.p(), config.path), opts);
}

CvResult cv_ridge(const SurvivalDataset& data, const std::vector<double>& lambdas, const CvOptions& opts) {
    CvResult result;
    result.lambdas = lambdas;
    result.folds = opts.folds;
    result.mode = opts.mode;
    result.fold_of = assign_folds(data, opts.folds, opts.seed, opts.stratify_events);
    const auto m = lambdas.size();
    std::vector<std::vector<double>> terms(static_cast<std::size_t>(opts.folds), std::vector<double>(m));
    std::vector<std::vector<char>> ok(static_cast<std::size_t>(opts.folds), std::vector<char>(m));
    parallel_for(static_cast<std::size_t>(opts.folds), opts.threads, [&](std::size_t k) {
        const int fold = static_cast<int>(k);
        const SurvivalDataset train = data.subset(rows_where(result.fold_of, fold, false));
        const RidgeCoxSolver solver(train);
        Eigen::VectorXd warm;
        for (std::size_t l = 0; l < m; ++l) {
            const auto fit = solver.fit(lambdas[l], warm);
            warm = fit.beta;
            terms[k][l] = cv_fold_term(data, result.fold_of, fold, fit.beta, opts.mode);
            ok[k][l] = fit.converged;
        }
    });
    result.converged.assign(m, true);
    for (std::size_t l = 0; l < m; ++l)
        for (const auto& f : ok) result.converged[l] = result.converged[l] && f[l];
    finalize_cv(result, terms);
    return result;
}

} // namespace coxpen
