#pragma once

// Random instances and brute-force reference computations shared by the
// unit tests. The references follow the textbook definitions directly and
// do not reuse library code.

#include "coxpen/data.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <vector>

namespace testing_support {

using coxpen::Index;
using coxpen::SurvivalDataset;

// n subjects, p standard-normal covariates, exponential times rounded to
// `tie_grid` (0: continuous) and roughly `censor` of them censored. At
// least one event is guaranteed.
inline SurvivalDataset random_data(Index n, Index p, std::uint64_t seed, double censor = 0.3, double tie_grid = 0.0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal;
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    Eigen::MatrixXd x(n, p);
    for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < p; ++j) x(i, j) = normal(rng);
    Eigen::VectorXd time(n);
    Eigen::VectorXi status(n);
    for (Index i = 0; i < n; ++i) {
        double t = -std::log(unif(rng)) * std::exp(-0.3 * x(i, 0));
        if (tie_grid > 0.0) t = tie_grid * std::ceil(t / tie_grid);
        time[i] = t;
        status[i] = unif(rng) < censor ? 0 : 1;
    }
    if (status.sum() == 0) status[0] = 1;
    return SurvivalDataset::make(std::move(x), std::move(time), std::move(status));
}

inline Eigen::VectorXd random_vector(Index p, std::uint64_t seed, double scale = 1.0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, scale);
    Eigen::VectorXd v(p);
    for (Index j = 0; j < p; ++j) v[j] = normal(rng);
    return v;
}

// log of prod_{events j} exp(eta_j) / sum_{k : t_k >= t_j} exp(eta_k), in
// extended precision, with no shift; tied events share their risk set.
inline long double brute_loglik(const SurvivalDataset& d, const Eigen::VectorXd& beta) {
    const Index n = d.n();
    std::vector<long double> eta(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) {
        long double s = 0.0L;
        for (Index k = 0; k < d.p(); ++k) s += static_cast<long double>(d.x(i, k)) * beta[k];
        eta[static_cast<std::size_t>(i)] = s;
    }
    long double product = 1.0L;
    for (Index j = 0; j < n; ++j) {
        if (!d.status[j]) continue;
        long double den = 0.0L;
        for (Index k = 0; k < n; ++k)
            if (d.time[k] >= d.time[j]) den += std::exp(eta[static_cast<std::size_t>(k)]);
        product *= std::exp(eta[static_cast<std::size_t>(j)]) / den;
    }
    return std::log(product);
}

inline Eigen::VectorXd central_difference(const std::function<double(const Eigen::VectorXd&)>& f,
                                          const Eigen::VectorXd& at, double h) {
    Eigen::VectorXd g(at.size());
    for (Index j = 0; j < at.size(); ++j) {
        Eigen::VectorXd up = at, down = at;
        up[j] += h;
        down[j] -= h;
        g[j] = (f(up) - f(down)) / (2.0 * h);
    }
    return g;
}

// Golden-section search for the minimum of a unimodal f on [a, b].
inline double golden_section(const std::function<double(double)>& f, double a, double b, double tol = 1e-12) {
    const double r = (std::sqrt(5.0) - 1.0) / 2.0;
    double c = b - r * (b - a), d = a + r * (b - a);
    double fc = f(c), fd = f(d);
    while (b - a > tol) {
        if (fc < fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    return 0.5 * (a + b);
}

// Pair enumeration, straight from the estimator definitions.
inline long double enum_harrell(const Eigen::VectorXd& t, const Eigen::VectorXi& d, const Eigen::VectorXd& s) {
    long double num = 0, den = 0;
    for (Index i = 0; i < t.size(); ++i)
        for (Index j = 0; j < t.size(); ++j) {
            if (i == j) continue;
            const long double usable = d[i] == 1 && t[i] < t[j];
            den += usable;
            num += usable * (s[i] > s[j]);
        }
    return num / den;
}

// Uno's estimator with weights G(T_i-)^-2, where G is recomputed here as a
// product limit over censoring times strictly before t.
inline long double enum_censor_survival_before(const Eigen::VectorXd& t, const Eigen::VectorXi& d, double at) {
    std::vector<double> times;
    for (Index i = 0; i < t.size(); ++i)
        if (d[i] == 0 && t[i] < at) times.push_back(t[i]);
    std::sort(times.begin(), times.end());
    times.erase(std::unique(times.begin(), times.end()), times.end());
    long double g = 1.0L;
    for (double c : times) {
        long double at_risk = 0, censored = 0;
        for (Index i = 0; i < t.size(); ++i) {
            at_risk += t[i] >= c;
            censored += t[i] == c && d[i] == 0;
        }
        g *= 1.0L - censored / at_risk;
    }
    return g;
}

inline long double enum_uno(const Eigen::VectorXd& t, const Eigen::VectorXi& d, const Eigen::VectorXd& s, double tau) {
    long double num = 0, den = 0;
    for (Index i = 0; i < t.size(); ++i)
        for (Index j = 0; j < t.size(); ++j) {
            if (i == j || d[i] != 1 || !(t[i] < t[j]) || !(t[i] < tau)) continue;
            const long double g = enum_censor_survival_before(t, d, t[i]);
            const long double w = 1.0L / (g * g);
            den += w;
            num += w * (s[i] > s[j]);
        }
    return num / den;
}

inline long double enum_cpe(const Eigen::VectorXd& s) {
    const Index n = s.size();
    long double sum = 0;
    for (Index i = 0; i < n; ++i)
        for (Index j = i + 1; j < n; ++j) {
            const long double ei = s[i], ej = s[j];
            if (ej < ei) sum += 1.0L / (1.0L + std::exp(ej - ei));
            if (ei < ej) sum += 1.0L / (1.0L + std::exp(ei - ej));
        }
    return 2.0L * sum / (static_cast<long double>(n) * (n - 1));
}

} // namespace testing_support
