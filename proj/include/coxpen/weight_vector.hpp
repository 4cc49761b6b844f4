#pragma once

#include "coxpen/coxph.hpp"

#include <Eigen/Core>

#include <cmath>
#include <limits>
#include <string>
#include <vector>

namespace coxpen {

inline constexpr double kMinGamma = 0.2;
inline constexpr double kMaxGamma = 2.0;
// |base_j| below this counts as an exact zero (infinite weight, excluded).
inline constexpr double kZeroBase = 1e-10;

/**
 * Per-covariate adaptive-lasso penalty weights, w_j = 1 / |base_j|^gamma.
 * An infinite weight removes the covariate from the model.
 */
struct WeightVector {
    Eigen::VectorXd w;
    double gamma = 1.0;
    WeightSource source = WeightSource::unit;
    Eigen::VectorXd base; // estimates before inversion (empty for unit weights)
    std::vector<std::string> notes;

    Index size() const { return w.size(); }
    bool excluded(Index j) const { return std::isinf(w[j]); }

    static WeightVector unit(Index p);
    // Inverts |base|^gamma; gamma must lie in [0.2, 2].
    static WeightVector from_base(const Eigen::VectorXd& base, double gamma, WeightSource source);
};

} // namespace coxpen
