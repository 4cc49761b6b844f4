#include "coxpen/coxph.hpp"

#include "coxpen/errors.hpp"

#include <Eigen/Cholesky>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace coxpen {

RiskSetIndex::RiskSetIndex(const Eigen::VectorXd& time, const Eigen::VectorXi& status) {
    const Index n = time.size();
    order_.resize(static_cast<std::size_t>(n));
    std::iota(order_.begin(), order_.end(), Index{0});
    std::stable_sort(order_.begin(), order_.end(), [&](Index a, Index b) { return time[a] < time[b]; });
    group_of_.assign(static_cast<std::size_t>(n), 0);
    for (Index pos = 0; pos < n; ++pos) {
        const Index i = order_[static_cast<std::size_t>(pos)];
        if (pos == 0 || time[i] != group_time_.back()) {
            group_start_.push_back(pos);
            group_events_.push_back(0);
            group_time_.push_back(time[i]);
        }
        group_events_.back() += status[i];
        group_of_[static_cast<std::size_t>(i)] = static_cast<Index>(group_events_.size()) - 1;
    }
    group_start_.push_back(n);
}

namespace {

// log S_g for every group, S_g = sum of exp(eta) over the risk set of g,
// accumulated backwards with a running maximum so no term under- or
// overflows.
std::vector<double> log_risk_sums(const RiskSetIndex& risk, const Eigen::VectorXd& eta) {
    const Index G = risk.groups();
    const auto& order = risk.order();
    std::vector<double> out(static_cast<std::size_t>(G));
    double m = -std::numeric_limits<double>::infinity();
    double s = 0.0;
    for (Index g = G - 1; g >= 0; --g) {
        for (Index pos = risk.group_begin(g); pos < risk.group_begin(g + 1); ++pos) {
            const double e = eta[order[static_cast<std::size_t>(pos)]];
            if (e > m) {
                s = s * std::exp(m - e) + 1.0;
                m = e;
            } else {
                s += std::exp(e - m);
            }
        }
        out[static_cast<std::size_t>(g)] = m + std::log(s);
    }
    return out;
}

// Scale carried from group g-1 to g by the forward recurrences below;
// log S is nonincreasing in g so the factor is at most 1.
double carry(const std::vector<double>& log_s, Index g, double power) {
    if (g == 0) return 0.0;
    return std::exp(power * (log_s[static_cast<std::size_t>(g)] - log_s[static_cast<std::size_t>(g - 1)]));
}

} // namespace

EtaDerivatives eta_derivatives(const RiskSetIndex& risk, const Eigen::VectorXi& status,
                               const Eigen::VectorXd& eta, bool with_derivatives) {
    const Index n = risk.n();
    const Index G = risk.groups();
    EtaDerivatives out;
    if (n == 0) return out;
    if (!eta.allFinite()) throw NumericError("non-finite linear predictor");

    const auto& order = risk.order();
    const std::vector<double> log_s = log_risk_sums(risk, eta);

    double ll = 0.0;
    for (Index i = 0; i < n; ++i)
        if (status[i]) ll += eta[i];
    for (Index g = 0; g < G; ++g) {
        const Index d = risk.group_events(g);
        if (d > 0) ll -= static_cast<double>(d) * log_s[static_cast<std::size_t>(g)];
    }
    if (!std::isfinite(ll)) throw NumericError("log partial likelihood is not finite");
    out.loglik = ll;
    if (!with_derivatives) return out;

    out.grad.resize(n);
    out.diag.resize(n);
    // q1 = S_g * sum_{g' <= g} d/S_g', q2 = S_g^2 * sum d/S_g'^2.
    double q1 = 0.0, q2 = 0.0;
    for (Index g = 0; g < G; ++g) {
        const double d = static_cast<double>(risk.group_events(g));
        q1 = q1 * carry(log_s, g, 1.0) + d;
        q2 = q2 * carry(log_s, g, 2.0) + d;
        for (Index pos = risk.group_begin(g); pos < risk.group_begin(g + 1); ++pos) {
            const Index i = order[static_cast<std::size_t>(pos)];
            const double r = std::exp(eta[i] - log_s[static_cast<std::size_t>(g)]);
            const double wa = r * q1;
            out.grad[i] = static_cast<double>(status[i]) - wa;
            out.diag[i] = std::max(0.0, wa - r * r * q2);
        }
    }
    return out;
}

EtaHessian::EtaHessian(const RiskSetIndex& risk, const Eigen::VectorXd& eta) : risk_(&risk) {
    const Index n = risk.n();
    const Index G = risk.groups();
    if (!eta.allFinite()) throw NumericError("non-finite linear predictor");
    const auto& order = risk.order();
    eta_ = eta;
    log_s_ = log_risk_sums(risk, eta);
    ratio_.resize(n);
    q1_.resize(n);
    q2_.resize(n);
    double q1 = 0.0, q2 = 0.0;
    for (Index g = 0; g < G; ++g) {
        const double d = static_cast<double>(risk.group_events(g));
        q1 = q1 * carry(log_s_, g, 1.0) + d;
        q2 = q2 * carry(log_s_, g, 2.0) + d;
        for (Index pos = risk.group_begin(g); pos < risk.group_begin(g + 1); ++pos) {
            const Index i = order[static_cast<std::size_t>(pos)];
            ratio_[i] = std::exp(eta[i] - log_s_[static_cast<std::size_t>(g)]);
            q1_[i] = q1;
            q2_[i] = q2;
        }
    }
}

Eigen::VectorXd EtaHessian::apply(const Eigen::VectorXd& v) const {
    const RiskSetIndex& risk = *risk_;
    const Index G = risk.groups();
    const auto& order = risk.order();
    // t_g = sum_{k in R_g} exp(eta_k) v_k / S_g.
    std::vector<double> t(static_cast<std::size_t>(G));
    double m = -std::numeric_limits<double>::infinity();
    double s = 0.0;
    for (Index g = G - 1; g >= 0; --g) {
        for (Index pos = risk.group_begin(g); pos < risk.group_begin(g + 1); ++pos) {
            const Index i = order[static_cast<std::size_t>(pos)];
            const double e = eta_[i];
            if (e > m) {
                s = s * std::exp(m - e) + v[i];
                m = e;
            } else {
                s += std::exp(e - m) * v[i];
            }
        }
        t[static_cast<std::size_t>(g)] = s * std::exp(m - log_s_[static_cast<std::size_t>(g)]);
    }
    Eigen::VectorXd out(v.size());
    double cum = 0.0;
    for (Index g = 0; g < G; ++g) {
        cum = cum * carry(log_s_, g, 1.0) + static_cast<double>(risk.group_events(g)) * t[static_cast<std::size_t>(g)];
        for (Index pos = risk.group_begin(g); pos < risk.group_begin(g + 1); ++pos) {
            const Index i = order[static_cast<std::size_t>(pos)];
            out[i] = ratio_[i] * (q1_[i] * v[i] - cum);
        }
    }
    return out;
}

Eigen::VectorXd EtaHessian::diagonal() const {
    return (ratio_.array() * q1_.array() - ratio_.array().square() * q2_.array()).matrix();
}

namespace {

// -d2l/dbeta2 for design z at linear predictor eta.
Eigen::MatrixXd information_matrix(const RiskSetIndex& risk,
                                   const Eigen::MatrixXd& z, const Eigen::VectorXd& eta) {
    const Index n = risk.n();
    const Index G = risk.groups();
    const Index r = z.cols();
    const auto& order = risk.order();
    const std::vector<double> log_s = log_risk_sums(risk, eta);

    Index event_groups = 0;
    for (Index g = 0; g < G; ++g) event_groups += risk.group_events(g) > 0;

    // Row k of c is sqrt(d_g) times the exp(eta)-weighted covariate mean of
    // the k-th event group's risk set.
    Eigen::MatrixXd c(event_groups, r);
    Eigen::RowVectorXd m1 = Eigen::RowVectorXd::Zero(r);
    double m = -std::numeric_limits<double>::infinity();
    Index row = event_groups;
    for (Index g = G - 1; g >= 0; --g) {
        for (Index pos = risk.group_begin(g); pos < risk.group_begin(g + 1); ++pos) {
            const Index i = order[static_cast<std::size_t>(pos)];
            if (eta[i] > m) {
                m1 *= std::exp(m - eta[i]);
                m = eta[i];
            }
            m1.noalias() += std::exp(eta[i] - m) * z.row(i);
        }
        const Index d = risk.group_events(g);
        if (d > 0) {
            --row;
            c.row(row) = m1 * (std::sqrt(static_cast<double>(d)) * std::exp(m - log_s[static_cast<std::size_t>(g)]));
        }
    }
    Eigen::VectorXd wa(n);
    double q1 = 0.0;
    for (Index g = 0; g < G; ++g) {
        q1 = q1 * carry(log_s, g, 1.0) + static_cast<double>(risk.group_events(g));
        for (Index pos = risk.group_begin(g); pos < risk.group_begin(g + 1); ++pos) {
            const Index i = order[static_cast<std::size_t>(pos)];
            wa[i] = std::exp(eta[i] - log_s[static_cast<std::size_t>(g)]) * q1;
        }
    }
    Eigen::MatrixXd zw = z.array().colwise() * wa.array().sqrt();
    Eigen::MatrixXd info = Eigen::MatrixXd::Zero(r, r);
    info.selfadjointView<Eigen::Lower>().rankUpdate(zw.transpose(), 1.0);
    info.selfadjointView<Eigen::Lower>().rankUpdate(c.transpose(), -1.0);
    return info.selfadjointView<Eigen::Lower>();
}

} // namespace

std::string to_string(WeightSource s) {
    switch (s) {
        case WeightSource::none: return "none";
        case WeightSource::unit: return "unit";
        case WeightSource::ridge: return "ridge";
        case WeightSource::pca: return "pca";
        case WeightSource::uni: return "uni";
        case WeightSource::rsf: return "rsf";
    }
    return "none";
}

WeightSource weight_source_from_string(const std::string& s) {
    if (s == "none") return WeightSource::none;
    if (s == "unit") return WeightSource::unit;
    if (s == "ridge") return WeightSource::ridge;
    if (s == "pca") return WeightSource::pca;
    if (s == "uni") return WeightSource::uni;
    if (s == "rsf") return WeightSource::rsf;
    throw ConfigError("unknown weight source '" + s + "'");
}

double log_partial_likelihood(const SurvivalDataset& data, const Eigen::VectorXd& beta) {
    if (!beta.allFinite()) throw NumericError("beta must be finite");
    const RiskSetIndex risk(data.time, data.status);
    return eta_derivatives(risk, data.status, data.x * beta, false).loglik;
}

Eigen::VectorXd gradient(const SurvivalDataset& data, const Eigen::VectorXd& beta) {
    if (!beta.allFinite()) throw NumericError("beta must be finite");
    const RiskSetIndex risk(data.time, data.status);
    const auto d = eta_derivatives(risk, data.status, data.x * beta);
    return data.x.transpose() * d.grad;
}

Eigen::MatrixXd information(const SurvivalDataset& data, const Eigen::VectorXd& beta) {
    const RiskSetIndex risk(data.time, data.status);
    return information_matrix(risk, data.x, data.x * beta);
}

Eigen::VectorXd risk_scores(const SurvivalDataset& data, const Eigen::VectorXd& beta) {
    return data.x * beta;
}

Eigen::VectorXd hazard_ratios(const CoxFit& fit) {
    return fit.beta.array().exp().matrix();
}

RidgeCoxSolver::RidgeCoxSolver(const SurvivalDataset& data, NewtonOptions opts)
    : data_(data), opts_(opts), risk_(data.time, data.status) {
    if (data.p() > data.n()) {
        reduced_ = true;
        Eigen::BDCSVD<Eigen::MatrixXd> svd(data.x, Eigen::ComputeThinU | Eigen::ComputeThinV);
        const auto& sv = svd.singularValues();
        const double tol = sv.size() > 0 ? sv[0] * 1e-10 * static_cast<double>(data.p()) : 0.0;
        Index rank = 0;
        while (rank < sv.size() && sv[rank] > tol) ++rank;
        z_ = svd.matrixU().leftCols(rank) * sv.head(rank).asDiagonal();
        basis_ = svd.matrixV().leftCols(rank);
    } else {
        z_ = data.x;
    }
}

double trial_loglik(const RiskSetIndex& risk, const Eigen::VectorXi& status, const Eigen::VectorXd& eta) {
    if (!eta.allFinite()) return -std::numeric_limits<double>::infinity();
    try {
        return eta_derivatives(risk, status, eta, false).loglik;
    } catch (const NumericError&) {
        return -std::numeric_limits<double>::infinity();
    }
}

CoxFit RidgeCoxSolver::fit(double ridge_lambda, const Eigen::VectorXd& warm_start) const {
    if (!(ridge_lambda >= 0.0) || !std::isfinite(ridge_lambda)) {
        throw ValidationError("ridge_lambda must be finite and nonnegative");
    }
    if (ridge_lambda == 0.0 && data_.p() >= data_.events()) {
        throw IllPosedError("unpenalized Cox fit needs p < number of events (p=" + std::to_string(data_.p()) +
                            ", events=" + std::to_string(data_.events()) + ")");
    }
    const Index r = z_.cols();
    Eigen::VectorXd coef = Eigen::VectorXd::Zero(r);
    if (warm_start.size() == data_.p()) coef = reduced_ ? Eigen::VectorXd(basis_.transpose() * warm_start) : warm_start;

    auto objective = [&](const Eigen::VectorXd& eta, const Eigen::VectorXd& c) {
        return trial_loglik(risk_, data_.status, eta) - ridge_lambda * c.squaredNorm();
    };

    CoxFit fit;
    fit.lambda = ridge_lambda;
    Eigen::VectorXd eta = z_ * coef;
    double current = objective(eta, coef);
    if (!std::isfinite(current)) throw NumericError("log partial likelihood is not finite at the starting point");
    int it = 0;
    for (; it < opts_.max_iterations; ++it) {
        const auto d = eta_derivatives(risk_, data_.status, eta);
        Eigen::VectorXd score = z_.transpose() * d.grad - 2.0 * ridge_lambda * coef;
        Eigen::MatrixXd info = information_matrix(risk_, z_, eta);
        info.diagonal().array() += 2.0 * ridge_lambda;
        Eigen::LDLT<Eigen::MatrixXd> ldlt(info);
        Eigen::VectorXd step = ldlt.solve(score);
        if (ldlt.info() != Eigen::Success || !step.allFinite()) {
            // Singular information: regularize slightly and retry once.
            info.diagonal().array() += 1e-8 * std::max(1.0, info.diagonal().maxCoeff());
            step = info.ldlt().solve(score);
            if (!step.allFinite()) {
                fit.warnings.push_back("newton step not finite; stopped early");
                break;
            }
        }

        double t = 1.0;
        Eigen::VectorXd trial = coef + step;
        Eigen::VectorXd trial_eta = z_ * trial;
        double value = objective(trial_eta, trial);
        int halvings = 0;
        while (!(value >= current - 1e-12 * std::abs(current)) && halvings < opts_.max_halvings) {
            t *= 0.5;
            trial = coef + t * step;
            trial_eta = z_ * trial;
            value = objective(trial_eta, trial);
            ++halvings;
        }
        if (!(value >= current - 1e-12 * std::abs(current))) {
            fit.warnings.push_back("step halving failed to improve the objective");
            break;
        }
        const double max_update = (t * step).cwiseAbs().maxCoeff();
        const double change = std::abs(value - current);
        coef = std::move(trial);
        eta = std::move(trial_eta);
        current = value;
        if (max_update < opts_.step_tolerance ||
            change < opts_.objective_tolerance * std::max(1.0, std::abs(current))) {
            fit.converged = true;
            ++it;
            break;
        }
    }
    fit.n_iterations = it;
    fit.beta = reduced_ ? Eigen::VectorXd(basis_ * coef) : coef;
    fit.log_partial_likelihood = eta_derivatives(risk_, data_.status, eta, false).loglik;
    if (!fit.converged && fit.warnings.empty()) fit.warnings.push_back("newton iteration limit reached");
    return fit;
}

CoxFit newton_fit(const SurvivalDataset& data, double ridge_lambda, const NewtonOptions& opts) {
    if (ridge_lambda == 0.0 && data.p() >= data.events()) {
        throw IllPosedError("unpenalized Cox fit needs p < number of events (p=" + std::to_string(data.p()) +
                            ", events=" + std::to_string(data.events()) + ")");
    }
    return RidgeCoxSolver(data, opts).fit(ridge_lambda);
}

} // namespace coxpen
