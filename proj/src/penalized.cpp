#include "coxpen/penalized.hpp"

#include "coxpen/errors.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <limits>

namespace coxpen {

std::string to_string(PenaltyKind k) {
    return k == PenaltyKind::lasso ? "lasso" : "alasso";
}

PenaltyKind penalty_kind_from_string(const std::string& s) {
    if (s == "lasso") return PenaltyKind::lasso;
    if (s == "alasso" || s == "adaptive_lasso") return PenaltyKind::adaptive_lasso;
    throw ConfigError("unknown penalty '" + s + "' (expected lasso or alasso)");
}

namespace {

constexpr int kPolishRounds = 50;
constexpr int kCdRounds = 3;
constexpr int kActiveSweeps = 25;

void check_weights(const WeightVector& weights, Index p) {
    if (weights.size() != p) throw ValidationError("weight vector length does not match covariates");
    for (Index j = 0; j < p; ++j) {
        if (!(weights.w[j] > 0.0)) throw ValidationError("penalty weights must be positive or +inf");
    }
}

double penalty_sum(const Eigen::VectorXd& beta, const WeightVector& weights) {
    double total = 0.0;
    for (Index j = 0; j < beta.size(); ++j) {
        if (beta[j] == 0.0) continue;
        if (weights.excluded(j)) return std::numeric_limits<double>::infinity();
        total += weights.w[j] * std::abs(beta[j]);
    }
    return total;
}

double lambda_max_from_gradient(const Eigen::VectorXd& grad, const WeightVector& weights, Index n) {
    double best = 0.0;
    bool any_finite = false;
    for (Index j = 0; j < grad.size(); ++j) {
        if (weights.excluded(j)) continue;
        any_finite = true;
        best = std::max(best, std::abs(grad[j]) / (static_cast<double>(n) * weights.w[j]));
    }
    if (!any_finite) throw ValidationError("all penalty weights are infinite; nothing can enter the model");
    return best;
}

bool looks_standardized(const SurvivalDataset& data) {
    const auto n = static_cast<double>(data.n());
    for (Index j = 0; j < data.p(); ++j) {
        const auto col = data.x.col(j);
        const double mean = col.mean();
        const double var = (col.array() - mean).square().sum() / n;
        if (std::abs(mean) > 1e-6) return false;
        if (var > 0.0 && std::abs(var - 1.0) > 1e-6) return false;
    }
    return true;
}

} // namespace

double penalized_objective(const SurvivalDataset& data, const Eigen::VectorXd& beta, const WeightVector& weights,
                           double lambda) {
    return -log_partial_likelihood(data, beta) / static_cast<double>(data.n()) + lambda * penalty_sum(beta, weights);
}

double lambda_max(const SurvivalDataset& data, const WeightVector& weights) {
    check_weights(weights, data.p());
    return lambda_max_from_gradient(gradient(data, Eigen::VectorXd::Zero(data.p())), weights, data.n());
}

L1CoxSolver::L1CoxSolver(const SurvivalDataset& data, L1Options opts)
    : data_(data), opts_(opts), risk_(data.time, data.status) {}

CoxFit L1CoxSolver::fit(const WeightVector& weights, double lambda, const Eigen::VectorXd& warm_start) const {
    const Index n = data_.n();
    const Index p = data_.p();
    const auto nd = static_cast<double>(n);
    check_weights(weights, p);
    if (!(lambda > 0.0) || !std::isfinite(lambda)) throw ValidationError("lambda must be positive and finite");

    CoxFit fit;
    fit.lambda = lambda;
    fit.weights_id = weights.source;
    fit.beta = Eigen::VectorXd::Zero(p);

    // KKT at zero: lambda >= lambda_max means beta = 0 is the solution.
    {
        const auto d0 = eta_derivatives(risk_, data_.status, Eigen::VectorXd::Zero(n));
        const Eigen::VectorXd g0 = data_.x.transpose() * d0.grad;
        if (lambda >= lambda_max_from_gradient(g0, weights, n)) {
            fit.log_partial_likelihood = d0.loglik;
            fit.converged = true;
            return fit;
        }
    }

    Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
    if (warm_start.size() == p) beta = warm_start;
    for (Index j = 0; j < p; ++j)
        if (weights.excluded(j)) beta[j] = 0.0;

    Eigen::VectorXd eta = data_.x * beta;
    auto objective_at = [&](const Eigen::VectorXd& e, const Eigen::VectorXd& b) {
        return -trial_loglik(risk_, data_.status, e) / nd + lambda * penalty_sum(b, weights);
    };
    double objective = objective_at(eta, beta);
    if (!std::isfinite(objective)) throw NumericError("log partial likelihood is not finite at the starting point");
    const double null_objective = objective_at(Eigen::VectorXd::Zero(n), Eigen::VectorXd::Zero(p));
    const double inner_threshold = opts_.inner_tolerance * std::max(null_objective, 1e-300);

    std::vector<Index> coords;
    coords.reserve(static_cast<std::size_t>(p));
    for (Index j = 0; j < p; ++j)
        if (!weights.excluded(j)) coords.push_back(j);
    if (opts_.order == SweepOrder::reverse) std::reverse(coords.begin(), coords.end());

    Eigen::VectorXd curvature(p);
    Eigen::MatrixXd hx(n, p); // H x_j, filled lazily per outer iteration
    std::vector<char> have_hx(static_cast<std::size_t>(p));
    long sweeps = 0;
    bool exhausted = false;
    int outer = 0;

    for (; outer < opts_.max_outer && !exhausted; ++outer) {
        const auto d = eta_derivatives(risk_, data_.status, eta);
        // Local model in eta: l(eta + e) ~ l + grad'e - e'He/2; resid = grad - H e.
        Eigen::VectorXd resid = d.grad;
        const bool exact = opts_.hessian == InnerHessian::exact;
        const EtaHessian hessian(risk_, eta);
        std::fill(have_hx.begin(), have_hx.end(), 0);
        Eigen::VectorXd next = beta;

        auto ensure_hx = [&](Index j) {
            auto& have = have_hx[static_cast<std::size_t>(j)];
            if (have) return;
            const auto xj = data_.x.col(j);
            if (exact)
                hx.col(j) = hessian.apply(xj);
            else
                hx.col(j) = d.diag.cwiseProduct(xj);
            curvature[j] = xj.dot(hx.col(j)) / nd;
            have = 1;
        };

        struct SweepStats {
            double change = 0.0; // largest coefficient move
            double gain = 0.0;   // largest a_j * move^2
        };
        auto sweep = [&](const std::vector<Index>& set) {
            SweepStats st;
            for (Index j : set) {
                const double threshold = lambda * weights.w[j];
                const double slope = data_.x.col(j).dot(resid) / nd;
                if (next[j] == 0.0 && std::abs(slope) <= threshold) continue;
                ensure_hx(j);
                const double a = curvature[j];
                if (!(a > 0.0)) continue;
                const double updated = soft_threshold_update(slope + a * next[j], a, threshold);
                const double diff = updated - next[j];
                if (diff != 0.0) {
                    resid.noalias() -= diff * hx.col(j);
                    next[j] = updated;
                    st.change = std::max(st.change, std::abs(diff));
                    st.gain = std::max(st.gain, a * diff * diff);
                }
            }
            ++sweeps;
            return st;
        };
        auto loose = [&](const SweepStats& st) { return st.change < opts_.tolerance || st.gain < inner_threshold; };

        // Coordinate descent with active-set cycling until the local
        // objective stops moving appreciably.
        // The rounds are capped: the direct solve below finishes the job
        // once the active set is roughly right.
        std::vector<Index> active;
        for (int round = 0; round < kCdRounds; ++round) {
            if (loose(sweep(coords)) || sweeps >= opts_.max_sweeps) break;
            active.clear();
            for (Index j : coords)
                if (next[j] != 0.0) active.push_back(j);
            for (int k = 0; k < kActiveSweeps && sweeps < opts_.max_sweeps; ++k)
                if (loose(sweep(active))) break;
        }

        // Finish the local problem exactly: with the signs of the active set
        // fixed it is a linear system. Steps stop at the first sign change;
        // a full sweep then checks the inactive coordinates.
        bool solved = false;
        for (int round = 0; round < kPolishRounds && !solved && sweeps < opts_.max_sweeps; ++round) {
            active.clear();
            for (Index j : coords)
                if (next[j] != 0.0) active.push_back(j);
            if (!active.empty()) {
                const auto m = static_cast<Index>(active.size());
                Eigen::MatrixXd xa(n, m), ha(n, m);
                Eigen::VectorXd rhs(m);
                for (Index k = 0; k < m; ++k) {
                    const Index j = active[static_cast<std::size_t>(k)];
                    ensure_hx(j);
                    xa.col(k) = data_.x.col(j);
                    ha.col(k) = hx.col(j);
                    rhs[k] = xa.col(k).dot(resid) / nd - lambda * weights.w[j] * (next[j] > 0.0 ? 1.0 : -1.0);
                }
                Eigen::MatrixXd local = xa.transpose() * ha / nd;
                local = 0.5 * (local + local.transpose()).eval();
                const double jitter = 1e-12 * std::max(local.diagonal().mean(), 1e-300);
                local.diagonal().array() += jitter;
                const Eigen::VectorXd delta = local.ldlt().solve(rhs);
                if (!delta.allFinite()) break;
                double t = 1.0;
                Index hit = -1;
                for (Index k = 0; k < m; ++k) {
                    const double b = next[active[static_cast<std::size_t>(k)]];
                    if ((b > 0.0 && b + delta[k] < 0.0) || (b < 0.0 && b + delta[k] > 0.0)) {
                        const double tk = -b / delta[k];
                        if (tk < t) {
                            t = tk;
                            hit = k;
                        }
                    }
                }
                Eigen::VectorXd change(m);
                for (Index k = 0; k < m; ++k) {
                    const Index j = active[static_cast<std::size_t>(k)];
                    const double updated = k == hit ? 0.0 : next[j] + t * delta[k];
                    change[k] = updated - next[j];
                    next[j] = updated;
                }
                resid.noalias() -= ha * change;
                if (hit >= 0) continue;
            }
            solved = sweep(coords).change < opts_.tolerance;
        }
        // Fall back to plain sweeps when the direct solve did not settle.
        while (!solved && sweeps < opts_.max_sweeps) solved = sweep(coords).change < opts_.tolerance;
        if (!solved) exhausted = true;

        // Step control on the exact objective.
        const Eigen::VectorXd step = next - beta;
        Eigen::VectorXd step_eta = Eigen::VectorXd::Zero(n);
        for (Index j = 0; j < p; ++j)
            if (step[j] != 0.0) step_eta.noalias() += step[j] * data_.x.col(j);
        if (!step_eta.allFinite()) throw NumericError("non-finite working response in coordinate descent");

        double t = 1.0;
        Eigen::VectorXd trial = next;
        Eigen::VectorXd trial_eta = eta + step_eta;
        double value = objective_at(trial_eta, trial);
        int halvings = 0;
        while (!(value <= objective + 1e-13 * std::abs(objective)) && halvings < 50) {
            t *= 0.5;
            trial = beta + t * step;
            trial_eta = eta + t * step_eta;
            value = objective_at(trial_eta, trial);
            ++halvings;
        }
        if (!(value <= objective + 1e-13 * std::abs(objective))) {
            // No descent along the proposed step: the current point is as
            // good as the local model can certify.
            fit.converged = step.cwiseAbs().maxCoeff() < opts_.tolerance;
            break;
        }
        const double moved = t * step.cwiseAbs().maxCoeff();
        beta = std::move(trial);
        eta = std::move(trial_eta);
        objective = value;
        if (moved < opts_.tolerance) {
            fit.converged = true;
            ++outer;
            break;
        }
    }

    fit.beta = beta;
    fit.n_iterations = outer;
    fit.log_partial_likelihood = eta_derivatives(risk_, data_.status, eta, false).loglik;
    if (exhausted) {
        fit.converged = false;
        fit.warnings.push_back("coordinate descent sweep limit reached");
    } else if (!fit.converged) {
        fit.warnings.push_back("coordinate descent did not converge");
    }
    return fit;
}

CoxFit fit_l1(const SurvivalDataset& data, const PenaltyConfig& config, const L1Options& opts) {
    if (!config.lambda) throw ValidationError("fit_l1 needs a lambda value");
    const WeightVector weights =
        config.kind == PenaltyKind::lasso ? WeightVector::unit(data.p()) : config.weights;
    L1CoxSolver solver(data, opts);
    auto fit = solver.fit(weights, *config.lambda);
    if (!looks_standardized(data)) fit.warnings.push_back("input covariates are not standardized");
    return fit;
}

std::vector<double> lambda_path(double lmax, Index n, Index p, const PathSpec& spec) {
    if (spec.count < 1) throw ValidationError("path needs at least one lambda");
    const double ratio = spec.min_ratio.value_or(p > n ? 0.01 : 1e-4);
    if (!(ratio > 0.0 && ratio < 1.0)) throw ValidationError("path min_ratio must lie in (0, 1)");
    if (!(lmax > 0.0)) throw ValidationError("lambda_max is zero; the null model is already optimal");
    std::vector<double> out(static_cast<std::size_t>(spec.count));
    for (int k = 0; k < spec.count; ++k) {
        const double frac = spec.count == 1 ? 0.0 : static_cast<double>(k) / (spec.count - 1);
        out[static_cast<std::size_t>(k)] = lmax * std::pow(ratio, frac);
    }
    out.front() = lmax;
    return out;
}

PathResult fit_path(const SurvivalDataset& data, const WeightVector& weights, const std::vector<double>& lambdas,
                    const L1Options& opts) {
    for (std::size_t k = 1; k < lambdas.size(); ++k) {
        if (!(lambdas[k] < lambdas[k - 1])) throw ValidationError("lambda path must be strictly descending");
    }
    L1CoxSolver solver(data, opts);
    const bool standardized = looks_standardized(data);
    PathResult out;
    out.lambdas = lambdas;
    Eigen::VectorXd warm;
    for (double lambda : lambdas) {
        auto fit = solver.fit(weights, lambda, warm);
        if (!standardized) fit.warnings.push_back("input covariates are not standardized");
        warm = fit.beta;
        out.active_sizes.push_back(static_cast<Index>((fit.beta.array() != 0.0).count()));
        out.fits.push_back(std::move(fit));
    }
    return out;
}

PathResult fit_path(const SurvivalDataset& data, const PenaltyConfig& config, const L1Options& opts) {
    const WeightVector weights =
        config.kind == PenaltyKind::lasso ? WeightVector::unit(data.p()) : config.weights;
    const double lmax = lambda_max(data, weights);
    return fit_path(data, weights, lambda_path(lmax, data.n(), data.p(), config.path), opts);
}

} // namespace coxpen
