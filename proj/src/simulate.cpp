#include "coxpen/simulate.hpp"

#include "coxpen/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace coxpen {

std::string to_string(CovarianceKind k) {
    switch (k) {
    case CovarianceKind::independent: return "independent";
    case CovarianceKind::ar_half: return "ar_half";
    case CovarianceKind::block_half: return "block_half";
    }
    return "independent";
}

std::string to_string(CoefScheme s) {
    return s == CoefScheme::constant_half ? "constant_half" : "range_1_to_10";
}

CovarianceKind covariance_kind_from_string(const std::string& s) {
    if (s == "independent") return CovarianceKind::independent;
    if (s == "ar_half") return CovarianceKind::ar_half;
    if (s == "block_half") return CovarianceKind::block_half;
    throw ConfigError("unknown covariance '" + s + "' (expected independent, ar_half or block_half)");
}

CoefScheme coef_scheme_from_string(const std::string& s) {
    if (s == "constant_half") return CoefScheme::constant_half;
    if (s == "range_1_to_10") return CoefScheme::range_1_to_10;
    throw ConfigError("unknown coefficient scheme '" + s + "' (expected constant_half or range_1_to_10)");
}

Covariance::Covariance(CovarianceKind kind, Index p) : kind_(kind), p_(p) {
    if (p < 1) throw ValidationError("covariance needs p >= 1");
}

Covariance make_covariance(CovarianceKind kind, Index p) { return Covariance(kind, p); }

double Covariance::entry(Index i, Index j) const {
    if (i == j) return 1.0;
    switch (kind_) {
    case CovarianceKind::independent: return 0.0;
    case CovarianceKind::ar_half: return std::pow(0.5, static_cast<double>(std::abs(i - j)));
    case CovarianceKind::block_half: return i % kBlockCount == j % kBlockCount ? 0.5 : 0.0;
    }
    return 0.0;
}

Eigen::MatrixXd Covariance::dense() const {
    Eigen::MatrixXd s(p_, p_);
    for (Index j = 0; j < p_; ++j)
        for (Index i = 0; i < p_; ++i) s(i, j) = entry(i, j);
    return s;
}

double Covariance::quadratic_form(const Eigen::VectorXd& b) const {
    if (b.size() != p_) throw ValidationError("coefficient length does not match covariance");
    std::vector<Index> nz;
    for (Index j = 0; j < p_; ++j)
        if (b[j] != 0.0) nz.push_back(j);
    double total = 0.0;
    for (Index i : nz)
        for (Index j : nz) total += b[i] * b[j] * entry(i, j);
    return total;
}

Eigen::MatrixXd Covariance::sample(Index n, Rng& rng) const {
    std::normal_distribution<double> normal;
    Eigen::MatrixXd x(n, p_);
    switch (kind_) {
    case CovarianceKind::independent:
        for (Index i = 0; i < n; ++i)
            for (Index j = 0; j < p_; ++j) x(i, j) = normal(rng);
        break;
    case CovarianceKind::ar_half: {
        // Exact Cholesky factor of 0.5^|i-j| applied as a recursion.
        const double innovation = std::sqrt(0.75);
        for (Index i = 0; i < n; ++i) {
            x(i, 0) = normal(rng);
            for (Index j = 1; j < p_; ++j) x(i, j) = 0.5 * x(i, j - 1) + innovation * normal(rng);
        }
        break;
    }
    case CovarianceKind::block_half: {
        // Shared factor per block plus independent noise, both of variance 1/2.
        const double half = std::sqrt(0.5);
        std::vector<double> common(static_cast<std::size_t>(kBlockCount));
        for (Index i = 0; i < n; ++i) {
            for (auto& c : common) c = normal(rng);
            for (Index j = 0; j < p_; ++j)
                x(i, j) = half * common[static_cast<std::size_t>(j % kBlockCount)] + half * normal(rng);
        }
        break;
    }
    }
    return x;
}

void SimulationConfig::validate() const {
    if (n < 2) throw ConfigError("simulation needs n >= 2");
    if (p < 1) throw ConfigError("simulation needs p >= 1");
    if (phi < 0 || phi > p) throw ConfigError("phi must lie in [0, p]");
    if (!(alpha > 0.0) || !(rho > 0.0)) throw ConfigError("Weibull shape and scale must be positive");
    if (!(theta >= 0.0 && theta < 1.0)) throw ConfigError("target censoring must lie in [0, 1)");
    if (calibration_draws < 1) throw ConfigError("calibration_draws must be positive");
    if (support) {
        if (static_cast<Index>(support->size()) != phi) throw ConfigError("support size must equal phi");
        std::vector<Index> s = *support;
        std::sort(s.begin(), s.end());
        if (std::adjacent_find(s.begin(), s.end()) != s.end()) throw ConfigError("support has duplicates");
        if (!s.empty() && (s.front() < 0 || s.back() >= p)) throw ConfigError("support index out of range");
    }
    if (nu && !(*nu > 0.0)) throw ConfigError("nu must be positive");
}

std::vector<Index> default_support(Index p, Index phi, CovarianceKind kind) {
    std::vector<Index> out;
    if (phi <= 0) return out;
    if (kind == CovarianceKind::block_half && p >= kBlockCount) {
        bool fits = true;
        std::vector<Index> per_block(static_cast<std::size_t>(kBlockCount), 0);
        for (Index i = 0; i < phi; ++i) ++per_block[static_cast<std::size_t>(i % kBlockCount)];
        for (Index b = 0; b < kBlockCount; ++b) {
            const Index members = (p - b + kBlockCount - 1) / kBlockCount;
            fits = fits && per_block[static_cast<std::size_t>(b)] <= members;
        }
        if (fits) {
            for (Index i = 0; i < phi; ++i) {
                const Index b = i % kBlockCount;
                const Index q = i / kBlockCount;
                const Index members = (p - b + kBlockCount - 1) / kBlockCount;
                const Index k = per_block[static_cast<std::size_t>(b)];
                out.push_back(b + kBlockCount * ((q * members) / k));
            }
            std::sort(out.begin(), out.end());
            return out;
        }
    }
    for (Index i = 0; i < phi; ++i) out.push_back((i * p) / phi);
    return out;
}

Eigen::VectorXd make_coefficients(const SimulationConfig& config) {
    const auto support = config.support ? *config.support : default_support(config.p, config.phi, config.covariance);
    Eigen::VectorXd beta = Eigen::VectorXd::Zero(config.p);
    for (std::size_t i = 0; i < support.size(); ++i) {
        beta[support[i]] = config.coef_scheme == CoefScheme::constant_half ? 0.5 : static_cast<double>(i % 10 + 1);
    }
    return beta;
}

Eigen::VectorXd sample_survival_times(double alpha, double rho, const Eigen::MatrixXd& x, const Eigen::VectorXd& beta,
                                      const Eigen::VectorXd& uniforms) {
    if (x.rows() != uniforms.size() || x.cols() != beta.size()) throw ValidationError("dimension mismatch");
    const Eigen::VectorXd eta = x * beta;
    Eigen::VectorXd t(uniforms.size());
    for (Index i = 0; i < t.size(); ++i) {
        const double u = uniforms[i];
        if (!(u > 0.0 && u < 1.0)) throw ValidationError("uniform draws must lie in (0, 1)");
        t[i] = rho * std::exp((std::log(-std::log(u)) - eta[i]) / alpha);
    }
    return t;
}

namespace {

// Mean censoring probability 1 / (1 + exp(alpha log(nu / rho) + s z)) over the draws z.
double mean_censoring(const std::vector<double>& z, double alpha, double log_ratio, double s) {
    double total = 0.0;
    const double base = alpha * log_ratio;
    for (double v : z) {
        const double a = base + s * v;
        total += a > 0 ? std::exp(-a) / (1.0 + std::exp(-a)) : 1.0 / (1.0 + std::exp(a));
    }
    return total / static_cast<double>(z.size());
}

} // namespace

Calibration calibrate_censoring(const SimulationConfig& config, const Eigen::VectorXd& beta) {
    config.validate();
    Calibration out;
    const double theta = config.theta;
    if (theta == 0.0) {
        out.nu = std::numeric_limits<double>::infinity();
        return out;
    }
    const double variance = make_covariance(config.covariance, config.p).quadratic_form(beta);
    const double s = std::sqrt(variance);
    if (s == 0.0) {
        out.nu = config.rho * std::pow((1.0 - theta) / theta, 1.0 / config.alpha);
        out.expected_censoring = theta;
        return out;
    }

    Rng rng = make_rng(config.calibration_seed, 0xca11b7a7eULL);
    std::normal_distribution<double> normal;
    std::vector<double> z(static_cast<std::size_t>(config.calibration_draws));
    for (auto& v : z) v = normal(rng);

    auto f = [&](double log_ratio) { return mean_censoring(z, config.alpha, log_ratio, s); };
    double lo = -1.0, hi = 1.0;
    int expand = 0;
    while (f(lo) < theta && expand < 200) lo -= 2.0 * (1 + expand++);
    while (f(hi) > theta && expand < 200) hi += 2.0 * (1 + expand++);
    if (!(f(lo) >= theta && f(hi) <= theta))
        throw NumericError("censoring calibration could not bracket theta=" + format_double(theta));

    double mid = 0.5 * (lo + hi);
    double value = f(mid);
    int it = 0;
    while (std::abs(value - theta) > 1e-6 && hi - lo > 1e-13 && it < 200) {
        if (value > theta)
            lo = mid;
        else
            hi = mid;
        mid = 0.5 * (lo + hi);
        value = f(mid);
        ++it;
    }
    out.nu = config.rho * std::exp(mid);
    out.expected_censoring = value;
    out.iterations = it;
    return out;
}

Calibration calibrate_censoring(const SimulationConfig& config) {
    return calibrate_censoring(config, make_coefficients(config));
}

SimulatedDataset generate(const SimulationConfig& config) {
    config.validate();
    SimulatedDataset out;
    out.beta_true = make_coefficients(config);
    out.nu = config.nu ? *config.nu : calibrate_censoring(config, out.beta_true).nu;
    if (config.theta == 0.0) out.nu = std::numeric_limits<double>::infinity();

    Rng x_rng = make_rng(config.seed, 1);
    Rng t_rng = make_rng(config.seed, 2);
    Rng c_rng = make_rng(config.seed, 3);
    Eigen::MatrixXd x = make_covariance(config.covariance, config.p).sample(config.n, x_rng);
    Eigen::VectorXd u(config.n);
    for (Index i = 0; i < config.n; ++i) u[i] = open_uniform(t_rng);
    out.latent_times = sample_survival_times(config.alpha, config.rho, x, out.beta_true, u);

    out.censoring_times.resize(config.n);
    for (Index i = 0; i < config.n; ++i) {
        const double v = open_uniform(c_rng);
        out.censoring_times[i] = std::isinf(out.nu) ? std::numeric_limits<double>::infinity()
                                                    : out.nu * std::pow(-std::log(v), 1.0 / config.alpha);
    }
    Eigen::VectorXd time(config.n);
    Eigen::VectorXi status(config.n);
    for (Index i = 0; i < config.n; ++i) {
        const bool event = out.latent_times[i] <= out.censoring_times[i];
        status[i] = event ? 1 : 0;
        time[i] = event ? out.latent_times[i] : out.censoring_times[i];
    }
    out.achieved_censoring = 1.0 - status.cast<double>().mean();
    out.dataset = SurvivalDataset{std::move(x), std::move(time), std::move(status), {}};
    for (Index j = 0; j < config.p; ++j) out.dataset.names.push_back("x" + std::to_string(j + 1));
    return out;
}

WeibullFit fit_weibull_mle(const Eigen::VectorXd& time, const Eigen::VectorXi& status) {
    if (time.size() != status.size()) throw ValidationError("time and status lengths differ");
    const double d = status.cast<double>().sum();
    if (d < 2) throw ValidationError("Weibull fit needs at least two events");
    for (Index i = 0; i < time.size(); ++i)
        if (!(time[i] > 0.0) || !std::isfinite(time[i])) throw ValidationError("Weibull fit needs positive finite times");

    // Work with log times centred at their mean; alpha is scale free.
    Eigen::VectorXd logt = time.array().log().matrix();
    const double centre = logt.mean();
    logt.array() -= centre;
    double event_log_sum = 0.0;
    for (Index i = 0; i < time.size(); ++i) event_log_sum += status[i] * logt[i];

    struct Sums { double a0, a1, a2; };
    auto sums = [&](double alpha) {
        const double shift = alpha * logt.maxCoeff();
        Sums s{0, 0, 0};
        for (Index i = 0; i < logt.size(); ++i) {
            const double w = std::exp(alpha * logt[i] - shift);
            s.a0 += w;
            s.a1 += w * logt[i];
            s.a2 += w * logt[i] * logt[i];
        }
        return s; // common factor exp(shift) cancels in every ratio used
    };
    auto score = [&](double alpha, const Sums& s) { return d / alpha + event_log_sum - d * s.a1 / s.a0; };

    WeibullFit fit;
    double alpha = 1.0;
    for (int it = 0; it < 200; ++it) {
        const Sums s = sums(alpha);
        const double g = score(alpha, s);
        fit.iterations = it;
        if (std::abs(g) < 1e-10) {
            fit.converged = true;
            break;
        }
        const double m1 = s.a1 / s.a0;
        const double curvature = -d / (alpha * alpha) - d * (s.a2 / s.a0 - m1 * m1);
        double next = alpha - g / curvature;
        if (!(next > 0.0)) next = 0.5 * alpha;
        alpha = next;
    }
    const Sums s = sums(alpha);
    fit.alpha = alpha;
    fit.gradient = score(alpha, s);
    fit.converged = fit.converged || std::abs(fit.gradient) < 1e-8;
    // rho^alpha = sum t^alpha / d on the centred scale.
    const double shift = alpha * logt.maxCoeff();
    const double log_rho_centred = (std::log(s.a0) + shift - std::log(d)) / alpha;
    fit.rho = std::exp(log_rho_centred + centre);
    double ll = 0.0;
    for (Index i = 0; i < time.size(); ++i) {
        const double z = std::log(time[i]) - std::log(fit.rho);
        if (status[i] == 1) ll += std::log(alpha) - std::log(fit.rho) + (alpha - 1.0) * z;
        ll -= std::exp(alpha * z);
    }
    fit.log_likelihood = ll;
    return fit;
}

} // namespace coxpen
