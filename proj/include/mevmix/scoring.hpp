#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "mevmix/stats.hpp"

namespace mevmix {

/// Weighting function for tail-focused forecast verification.  Two flavors:
/// a hard indicator that all components exceed fixed per-margin quantiles,
/// and a smooth multivariate normal CDF whose location and spread come from
/// fitted residual moments.
struct WeightScheme {
    enum class Kind { HardQuantile, GaussianCdf };

    Kind kind = Kind::HardQuantile;
    std::string label;               // column tag in score tables
    Eigen::VectorXd q;               // HardQuantile payload
    std::optional<MvnParams> gauss;  // GaussianCdf payload

    static WeightScheme hard_quantile(Eigen::VectorXd thresholds,
                                      std::string label = "w1");
    static WeightScheme gaussian_cdf(MvnParams moments, std::string label = "w2");

    Eigen::Index dim() const;
};

/// Sample energy score of an ensemble forecast against one observation,
/// with the unbiased pair normalization 1 / (M (M - 1)) over ordered pairs
/// so the mean score does not depend on the ensemble size.
double energy_score(const Eigen::MatrixXd& ensemble, const Eigen::VectorXd& y);

/// Evaluates the weighting function at a point; always in [0, 1].
double weight(const Eigen::VectorXd& x, const WeightScheme& scheme);

/// Outcome-weighted energy score: members and observation reweighted by the
/// scheme.  The observation factor w(y) = 0 short-circuits to a zero
/// contribution; fewer than two members with positive weight leave the pair
/// term inestimable and yield NaN, which aggregation treats as a sentinel.
double owes(const Eigen::MatrixXd& ensemble, const Eigen::VectorXd& y,
            const WeightScheme& scheme);

/// The chain function v paired with the scheme: componentwise max(x_j, q_j)
/// for the hard indicator, and for the Gaussian scheme the separable
/// antiderivative (x_j - m_j) Phi(z_j) + s_j phi(z_j) + c_j of the marginal
/// normal CDF, anchored so v is the identity deep below the weighted region.
Eigen::VectorXd chain_map(const Eigen::VectorXd& x, const WeightScheme& scheme);

/// Threshold-weighted energy score: the energy score after mapping both the
/// ensemble and the observation through the chain function.
double twes(const Eigen::MatrixXd& ensemble, const Eigen::VectorXd& y,
            const WeightScheme& scheme);

/// Mean scores laid out for side-by-side model comparison: one row per
/// model, columns the plain score followed by the outcome- and
/// threshold-weighted variants per scheme.  Lower is better throughout.
struct ScoreTable {
    std::vector<std::string> models;
    std::vector<std::string> columns;
    Eigen::MatrixXd means;    // models x columns; NaN when nothing contributed
    Eigen::MatrixXi n_valid;  // observations behind each mean
};

/// Scores every model ensemble against each observation row and averages.
/// NaN sentinels (outcome-weighted scores without estimable pair terms) are
/// excluded from the means; zero contributions are kept.
ScoreTable score_table(
    const std::vector<std::pair<std::string, Eigen::MatrixXd>>& model_ensembles,
    const Eigen::MatrixXd& y_series, const std::vector<WeightScheme>& schemes);

} // namespace mevmix
