#include "coxpen/weights.hpp"

#include "coxpen/errors.hpp"
#include "coxpen/parallel.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <limits>

namespace coxpen {

WeightVector WeightVector::unit(Index p) {
    WeightVector v;
    v.w = Eigen::VectorXd::Ones(p);
    v.gamma = 1.0;
    v.source = WeightSource::unit;
    return v;
}

WeightVector WeightVector::from_base(const Eigen::VectorXd& base, double gamma, WeightSource source) {
    if (!(gamma >= kMinGamma && gamma <= kMaxGamma))
        throw ValidationError("gamma must lie in [0.2, 2]");
    WeightVector v;
    v.gamma = gamma;
    v.source = source;
    v.base = base;
    v.w.resize(base.size());
    for (Index j = 0; j < base.size(); ++j) {
        if (!std::isfinite(base[j])) throw NumericError("non-finite base estimate for weights");
        const double magnitude = std::abs(base[j]);
        v.w[j] = magnitude < kZeroBase ? std::numeric_limits<double>::infinity() : std::pow(magnitude, -gamma);
    }
    return v;
}

std::vector<double> default_ridge_grid(const SurvivalDataset& data) {
    const auto scale = static_cast<double>(std::max<Index>(data.events(), 1));
    std::vector<double> grid;
    for (int k = 6; k >= -6; --k) grid.push_back(scale * std::pow(10.0, 0.5 * k));
    return grid;
}

BaseEstimate ridge_base(const SurvivalDataset& data, const RidgeWeightSpec& spec) {
    const auto lambdas = spec.lambdas.empty() ? default_ridge_grid(data) : spec.lambdas;
    BaseEstimate out;
    const CvResult cv = cv_ridge(data, lambdas, spec.cv);
    out.ridge_lambda = cv.lambda_min;
    const CoxFit fit = newton_fit(data, cv.lambda_min);
    if (!fit.converged) out.notes.push_back("ridge fit for weights did not converge");
    out.values = fit.beta;
    return out;
}

BaseEstimate pca_base(const SurvivalDataset& data, double variance) {
    if (!(variance > 0.0 && variance <= 1.0)) throw ValidationError("PCA variance share must lie in (0, 1]");
    Eigen::BDCSVD<Eigen::MatrixXd> svd(data.x, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Eigen::VectorXd& sv = svd.singularValues();
    const double tol = sv.size() > 0 ? sv[0] * 1e-10 * static_cast<double>(std::max(data.n(), data.p())) : 0.0;
    Index rank = 0;
    while (rank < sv.size() && sv[rank] > tol) ++rank;
    if (rank < 2) throw ValidationError("covariate matrix has rank below 2; PCA weights need r < rank");

    const double total = sv.head(rank).squaredNorm();
    Index r = 0;
    double acc = 0.0;
    while (r < rank && acc < variance * total) acc += sv[r] * sv[r], ++r;
    BaseEstimate out;
    if (r >= rank) {
        r = rank - 1;
        out.notes.push_back("component count reduced to rank - 1");
    }
    out.components = r;

    const Eigen::MatrixXd scores = svd.matrixU().leftCols(r) * sv.head(r).asDiagonal();
    const SurvivalDataset score_data{scores, data.time, data.status, {}};
    CoxFit fit;
    if (r < data.events()) {
        fit = newton_fit(score_data, 0.0);
        if (!fit.converged) {
            out.notes.push_back("unpenalized fit on scores did not converge; used ridge " +
                                format_double(kPcaFallbackRidge));
            fit = newton_fit(score_data, kPcaFallbackRidge);
        }
    } else {
        out.notes.push_back("components exceed events; used ridge " + format_double(kPcaFallbackRidge));
        fit = newton_fit(score_data, kPcaFallbackRidge);
    }
    if (!fit.converged) out.notes.push_back("fit on principal component scores did not converge");
    out.values = svd.matrixV().leftCols(r) * fit.beta;
    return out;
}

BaseEstimate uni_base(const SurvivalDataset& data, unsigned threads) {
    const Index p = data.p();
    BaseEstimate out;
    out.values = Eigen::VectorXd::Zero(p);
    std::vector<char> capped(static_cast<std::size_t>(p), 0);
    parallel_for(static_cast<std::size_t>(p), threads, [&](std::size_t jj) {
        const auto j = static_cast<Index>(jj);
        const auto col = data.x.col(j);
        if (col.maxCoeff() == col.minCoeff()) return; // no information: exact zero
        const std::vector<Index> one{j};
        const SurvivalDataset single = data.columns(one);
        double b = 0.0;
        bool ok = true;
        try {
            const CoxFit fit = newton_fit(single, 0.0);
            b = fit.beta[0];
            ok = fit.converged && std::abs(b) <= kUniCap;
        } catch (const NumericError&) {
            ok = false;
            b = gradient(single, Eigen::VectorXd::Zero(1))[0];
        }
        if (!ok) {
            b = std::copysign(kUniCap, b);
            capped[jj] = 1;
        }
        out.values[j] = b;
    });
    for (Index j = 0; j < p; ++j)
        if (capped[static_cast<std::size_t>(j)])
            out.notes.push_back("univariate estimate for " + data.names[static_cast<std::size_t>(j)] +
                                " diverged; capped at " + format_double(kUniCap));
    return out;
}

BaseEstimate rsf_base(const SurvivalDataset& data, const ForestConfig& forest_config) {
    const SurvivalForest forest = grow_forest(data, forest_config);
    const VimpResult v = vimp(forest, data);
    BaseEstimate out;
    out.values = v.importance;
    Index negative = 0;
    for (Index j = 0; j < v.importance.size(); ++j) negative += v.importance[j] < 0.0;
    if (negative > 0)
        out.notes.push_back(std::to_string(negative) + " negative VIMP values; absolute values used");
    out.notes.push_back("forest OOB error " + format_double(v.oob_error));
    return out;
}

WeightVector weights_from(const BaseEstimate& base, double gamma, WeightSource source) {
    WeightVector w = WeightVector::from_base(base.values, gamma, source);
    w.notes = base.notes;
    return w;
}

WeightVector ridge_weights(const SurvivalDataset& data, double gamma, const RidgeWeightSpec& spec) {
    return weights_from(ridge_base(data, spec), gamma, WeightSource::ridge);
}

WeightVector pca_weights(const SurvivalDataset& data, double gamma) {
    return weights_from(pca_base(data), gamma, WeightSource::pca);
}

WeightVector uni_weights(const SurvivalDataset& data, double gamma, unsigned threads) {
    return weights_from(uni_base(data, threads), gamma, WeightSource::uni);
}

WeightVector rsf_weights(const SurvivalDataset& data, double gamma, const ForestConfig& forest) {
    return weights_from(rsf_base(data, forest), gamma, WeightSource::rsf);
}

std::vector<double> gamma_grid() {
    std::vector<double> grid;
    for (int k = 1; k <= 10; ++k) grid.push_back(0.2 * k);
    return grid;
}

GammaChoice select_gamma(const SurvivalDataset& data, const BaseEstimate& base, WeightSource source,
                         const std::vector<double>& grid, const CvOptions& cv, const PathSpec& path) {
    if (grid.empty()) throw ValidationError("gamma grid is empty");
    GammaChoice choice;
    choice.grid = grid;
    double best = std::numeric_limits<double>::infinity();
    for (double gamma : grid) {
        const WeightVector w = WeightVector::from_base(base.values, gamma, source);
        const auto lambdas = lambda_path(lambda_max(data, w), data.n(), data.p(), path);
        const CvResult result = cv_path(data, w, lambdas, cv);
        const double value = result.cve[static_cast<std::size_t>(result.index_min)];
        choice.min_cve.push_back(value);
        if (value < best) {
            best = value;
            choice.gamma = gamma;
        }
    }
    return choice;
}

} // namespace coxpen
