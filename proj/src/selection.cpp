#include "coxpen/selection.hpp"

#include "coxpen/errors.hpp"
#include "coxpen/metrics.hpp"
#include "coxpen/parallel.hpp"
#include "coxpen/random.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace coxpen {

Index top_k_count(Index n) {
    if (n < 1) throw ValidationError("top-K count needs n >= 1");
    // smallest k with 2 k^2 >= n
    Index k = static_cast<Index>(std::ceil(std::sqrt(static_cast<double>(n) / 2.0)));
    while (k > 1 && 2 * (k - 1) * (k - 1) >= n) --k;
    while (2 * k * k < n) ++k;
    return k;
}

Eigen::VectorXd importance_index(const std::vector<Eigen::VectorXd>& betas, const std::vector<double>& k_index) {
    if (betas.empty() || betas.size() != k_index.size()) throw ValidationError("importance needs one K-index per model");
    Eigen::VectorXd total = Eigen::VectorXd::Zero(betas.front().size());
    for (std::size_t k = 0; k < betas.size(); ++k) total += betas[k].cwiseAbs() * k_index[k];
    const double top = total.maxCoeff();
    if (!(top > 0.0)) throw ValidationError("every iteration selected zero variables");
    return total / top;
}

std::vector<double> power_indexes(const std::vector<Eigen::VectorXd>& betas, const Eigen::VectorXd& importance,
                                  Index k_top, bool literal) {
    const Index p = importance.size();
    if (k_top < 1) throw ValidationError("top-K count must be positive");
    std::vector<double> sorted(importance.data(), importance.data() + p);
    std::sort(sorted.begin(), sorted.end(), std::greater<>());
    const Index k = std::min(k_top, p);
    const double cutoff = sorted[static_cast<std::size_t>(k - 1)];
    const double top_sum = std::accumulate(sorted.begin(), sorted.begin() + k, 0.0);

    std::vector<double> out;
    out.reserve(betas.size());
    for (const auto& beta : betas) {
        const double mass = beta.cwiseAbs().sum();
        if (mass == 0.0) {
            out.push_back(0.0);
            continue;
        }
        double weighted = 0.0;
        for (Index j = 0; j < p; ++j) {
            const bool member = literal ? importance[j] <= cutoff : importance[j] >= cutoff;
            if (member) weighted += importance[j] * std::abs(beta[j]);
        }
        out.push_back(weighted / mass / top_sum);
    }
    return out;
}

Index best_model(const std::vector<double>& k_index, const std::vector<double>& power) {
    if (k_index.empty() || k_index.size() != power.size()) throw ValidationError("best model needs matching scores");
    Index best = 0;
    for (std::size_t k = 1; k < k_index.size(); ++k)
        if (k_index[k] + power[k] > k_index[static_cast<std::size_t>(best)] + power[static_cast<std::size_t>(best)])
            best = static_cast<Index>(k);
    return best;
}

std::vector<Index> importance_ranking(const Eigen::VectorXd& importance) {
    std::vector<Index> order(static_cast<std::size_t>(importance.size()));
    std::iota(order.begin(), order.end(), Index{0});
    std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return importance[a] > importance[b]; });
    return order;
}

std::vector<Index> importance_ranking(const SelectionRun& run) { return importance_ranking(run.importance); }

FinalFit refit_on_support(const SurvivalDataset& data, const std::vector<Index>& support, std::uint64_t seed,
                          unsigned threads) {
    FinalFit out;
    out.fit.beta = Eigen::VectorXd::Zero(data.p());
    if (support.empty()) {
        out.method = "empty";
        out.fit.converged = true;
        out.fit.log_partial_likelihood = log_partial_likelihood(data, out.fit.beta);
        return out;
    }
    const SurvivalDataset sub = data.columns(support);
    CoxFit fit;
    if (2 * static_cast<Index>(support.size()) < data.events()) {
        fit = newton_fit(sub, 0.0);
        out.method = "unpenalized";
    } else {
        const StandardizedData s = standardize(sub);
        CvOptions cv;
        cv.seed = derive_seed(seed, 0x7e417ULL);
        cv.threads = threads;
        const CvResult chosen = cv_ridge(s.data, default_ridge_grid(s.data), cv);
        fit = newton_fit(s.data, chosen.lambda_min);
        fit.beta = s.transform.to_original(fit.beta);
        fit.log_partial_likelihood = log_partial_likelihood(sub, fit.beta);
        out.method = "ridge";
    }
    for (std::size_t k = 0; k < support.size(); ++k) out.fit.beta[support[k]] = fit.beta[static_cast<Index>(k)];
    out.fit.log_partial_likelihood = fit.log_partial_likelihood;
    out.fit.n_iterations = fit.n_iterations;
    out.fit.converged = fit.converged;
    out.fit.lambda = fit.lambda;
    out.fit.warnings = fit.warnings;
    return out;
}

SelectionRun run_selection(const SurvivalDataset& data, const SelectionSpec& spec) {
    data.validate();
    if (spec.partitions < 1) throw ConfigError("selection needs at least one partition");
    const Index train_size = spec.train_size > 0 ? spec.train_size : data.n() / 2;

    SelectionRun run;
    run.iterations.resize(static_cast<std::size_t>(spec.partitions));
    ModelSpec model = spec.model;
    model.threads = 1;
    parallel_for(run.iterations.size(), spec.threads, [&](std::size_t k) {
        auto& it = run.iterations[k];
        it.seed = derive_seed(spec.seed, k);
        const Partition part = split(data, train_size, it.seed);
        const SurvivalDataset train = data.subset(part.train);
        const SurvivalDataset test = data.subset(part.test);
        const FittedModel fitted = fit_model(train, model, it.seed);
        it.beta = fitted.fit.beta;
        it.lambda = fitted.lambda;
        it.support_size = fitted.nonzero;
        it.k_index = cpe_k_index(risk_scores(test, it.beta));
    });

    std::vector<Eigen::VectorXd> betas;
    std::vector<double> k_values;
    for (const auto& it : run.iterations) {
        betas.push_back(it.beta);
        k_values.push_back(it.k_index);
        if (it.support_size == 0) run.notes.push_back("iteration with seed " + std::to_string(it.seed) + " selected no variables");
    }
    run.importance = importance_index(betas, k_values);
    run.k_top = top_k_count(data.n());
    const auto power = power_indexes(betas, run.importance, run.k_top, spec.literal_power_index);
    for (std::size_t k = 0; k < power.size(); ++k) run.iterations[k].power = power[k];
    run.best = best_model(k_values, power);

    const auto& chosen = run.iterations[static_cast<std::size_t>(run.best)].beta;
    for (Index j = 0; j < chosen.size(); ++j)
        if (chosen[j] != 0.0) run.final_support.push_back(j);
    FinalFit final_fit = refit_on_support(data, run.final_support, spec.seed, spec.threads);
    run.final_fit = std::move(final_fit.fit);
    run.final_method = final_fit.method;
    return run;
}

} // namespace coxpen
