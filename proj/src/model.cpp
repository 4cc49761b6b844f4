#include "coxpen/model.hpp"

#include "coxpen/errors.hpp"
#include "coxpen/random.hpp"

#include <algorithm>
#include <cctype>

namespace coxpen {

void ModelSpec::validate() const {
    if (folds < 2) throw ConfigError("folds must be at least 2");
    if (penalty == PenaltyKind::adaptive_lasso &&
        (weights == WeightSource::none || weights == WeightSource::unit))
        throw ConfigError("adaptive lasso needs weights ridge, pca, uni or rsf");
    if (gamma && !(*gamma >= kMinGamma && *gamma <= kMaxGamma)) throw ConfigError("gamma must lie in [0.2, 2]");
}

std::string ModelSpec::label() const {
    if (penalty == PenaltyKind::lasso) return "Lasso";
    switch (weights) {
    case WeightSource::ridge: return "Ridge";
    case WeightSource::pca: return "PCA";
    case WeightSource::uni: return "Uni";
    case WeightSource::rsf: return "RSF";
    default: return "ALasso";
    }
}

ModelSpec model_spec_from_label(const std::string& label) {
    std::string key = label;
    std::transform(key.begin(), key.end(), key.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    ModelSpec spec;
    if (key == "lasso") return spec;
    spec.penalty = PenaltyKind::adaptive_lasso;
    spec.weights = weight_source_from_string(key);
    spec.validate();
    return spec;
}

FittedModel fit_model(const SurvivalDataset& data, const ModelSpec& spec, std::uint64_t seed) {
    spec.validate();
    data.validate();
    FittedModel out;
    out.seed = seed;

    StandardizedData std_data = standardize(data);
    const SurvivalDataset& x = std_data.data;
    out.transform = std_data.transform;

    CvOptions cv;
    cv.folds = spec.folds;
    cv.mode = spec.cv_mode;
    cv.seed = derive_seed(seed, 0xf01d5ULL);
    cv.stratify_events = spec.stratify_folds;
    cv.threads = spec.threads;
    cv.solver = spec.solver;

    if (spec.penalty == PenaltyKind::lasso) {
        out.weights = WeightVector::unit(x.p());
    } else {
        BaseEstimate base;
        switch (spec.weights) {
        case WeightSource::ridge: {
            RidgeWeightSpec ridge;
            ridge.lambdas = spec.ridge_lambdas;
            ridge.cv = cv;
            ridge.cv.seed = derive_seed(seed, 0x121d6eULL);
            base = ridge_base(x, ridge);
            break;
        }
        case WeightSource::pca: base = pca_base(x); break;
        case WeightSource::uni: base = uni_base(x, spec.threads); break;
        case WeightSource::rsf: {
            ForestConfig forest = spec.forest;
            forest.seed = derive_seed(seed, 0x125fULL);
            forest.threads = spec.threads;
            base = rsf_base(x, forest);
            break;
        }
        default: throw ConfigError("unsupported weight source");
        }
        double gamma = 1.0;
        if (spec.gamma) {
            gamma = *spec.gamma;
        } else {
            out.gamma_search = select_gamma(x, base, spec.weights, gamma_grid(), cv, spec.path);
            gamma = out.gamma_search->gamma;
        }
        out.weights = weights_from(base, gamma, spec.weights);
    }

    const double lmax = lambda_max(x, out.weights);
    const auto lambdas = lambda_path(lmax, x.n(), x.p(), spec.path);
    out.cv = cv_path(x, out.weights, lambdas, cv);

    // Refit along the path on all data so the warm starts match the folds.
    std::vector<double> head(lambdas.begin(), lambdas.begin() + out.cv.index_min + 1);
    PathResult path = fit_path(x, out.weights, head, spec.solver);
    CoxFit fit = std::move(path.fits.back());
    out.beta_standardized = fit.beta;
    out.lambda = fit.lambda;
    out.lambda_unscaled = fit.lambda * static_cast<double>(x.n());
    fit.beta = out.transform.to_original(out.beta_standardized);
    fit.weights_id = out.weights.source;
    for (const auto& note : out.weights.notes) fit.warnings.push_back(note);
    out.nonzero = static_cast<Index>((fit.beta.array() != 0.0).count());
    out.fit = std::move(fit);
    return out;
}

} // namespace coxpen
